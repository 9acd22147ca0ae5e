// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "deal/matrix.hpp"

namespace deal {

/// Counter-based generator (splitmix64). The stream is a pure function of
/// the seed and the draw index, so identical seeds replay identical scalars.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes two uniforms per draw.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Derives an independent stream; the parent stream is not advanced.
    Rng split(std::uint64_t tag) const {
        std::uint64_t z = seed_ ^ (0x9e3779b97f4a7c15ull + tag * 0xbf58476d1ce4e5b9ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

    /// Fisher-Yates shuffle of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_u64() % i);
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

inline DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, double mean, double std, Rng& rng) {
    if (std < 0.0) throw Error("gaussian_matrix: std must be >= 0");
    DenseMatrix out(rows, cols);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = mean + std * rng.normal();
    out.ensure_finite();
    return out;
}

/// FNV-1a over raw bytes; used to derive content-keyed rng streams.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t content_hash(const DenseMatrix& m, std::uint64_t h = 0xcbf29ce484222325ull) {
    h = fnv1a64(m.data().data(), m.size() * sizeof(double), h);
    std::uint64_t dims[2] = {m.rows(), m.cols()};
    return fnv1a64(dims, sizeof(dims), h);
}

}  // namespace deal
