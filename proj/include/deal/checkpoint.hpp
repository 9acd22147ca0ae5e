// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"
#include "deal/rng.hpp"

namespace deal {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[8] = {'D', 'E', 'A', 'L', 'C', 'K', 'P', 'T'};

/// Named matrix payloads plus run provenance. The on-disk format is
/// little-endian with a trailing FNV-1a checksum; round trips are bit-exact.
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::uint64_t seed = 0;
    std::string config_echo;
    std::vector<std::pair<std::string, DenseMatrix>> sections;

    void add(std::string name, DenseMatrix m) { sections.emplace_back(std::move(name), std::move(m)); }

    const DenseMatrix& at(const std::string& name) const {
        for (const auto& [n, m] : sections)
            if (n == name) return m;
        throw Error("Checkpoint: unknown section " + name);
    }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
  public:
    ByteReader(const std::string& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
    std::uint64_t u64() { return raw(8); }
    double f64() { return std::bit_cast<double>(raw(8)); }

    std::string str(std::size_t len) {
        need(len);
        std::string s = bytes_.substr(at_, len);
        at_ += len;
        return s;
    }

    std::size_t position() const { return at_; }

  private:
    std::uint64_t raw(std::size_t len) {
        need(len);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < len; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[at_ + i])) << (8 * i);
        at_ += len;
        return v;
    }

    void need(std::size_t len) {
        if (at_ + len > limit_) throw ChecksumFailure("checkpoint: truncated payload");
    }

    const std::string& bytes_;
    std::size_t limit_;
    std::size_t at_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_u32(out, ckpt.version);
    detail::put_u64(out, ckpt.seed);
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config_echo.size()));
    out += ckpt.config_echo;
    detail::put_u32(out, static_cast<std::uint32_t>(ckpt.sections.size()));
    for (const auto& [name, m] : ckpt.sections) {
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put_u64(out, m.rows());
        detail::put_u64(out, m.cols());
        for (double v : m.data()) detail::put_f64(out, v);
    }
    detail::put_u64(out, fnv1a64(out.data(), out.size()));
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(kCheckpointMagic) + 12 + 8) throw ChecksumFailure("checkpoint: file too short");
    std::uint64_t stored = 0;
    for (std::size_t i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[bytes.size() - 8 + i])) << (8 * i);
    if (fnv1a64(bytes.data(), bytes.size() - 8) != stored) throw ChecksumFailure("checkpoint: checksum mismatch");
    if (bytes.compare(0, sizeof(kCheckpointMagic), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw VersionMismatch("checkpoint: bad magic");

    detail::ByteReader reader(bytes, bytes.size() - 8);
    reader.str(sizeof(kCheckpointMagic));
    Checkpoint ckpt;
    ckpt.version = reader.u32();
    if (ckpt.version > kCheckpointVersion) throw VersionMismatch("checkpoint: version from the future");
    ckpt.seed = reader.u64();
    ckpt.config_echo = reader.str(reader.u32());
    std::uint32_t count = reader.u32();
    for (std::uint32_t s = 0; s < count; ++s) {
        std::string name = reader.str(reader.u32());
        std::uint64_t rows = reader.u64();
        std::uint64_t cols = reader.u64();
        DenseMatrix m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = reader.f64();
        m.ensure_finite();
        ckpt.add(std::move(name), std::move(m));
    }
    return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoFailure("checkpoint: cannot open for writing: " + path.string());
    std::string bytes = encode_checkpoint(ckpt);
    file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!file) throw IoFailure("checkpoint: write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoFailure("checkpoint: cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace deal
