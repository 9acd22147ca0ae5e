// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deal/errors.hpp"

namespace deal {

/// Counts arithmetic work done by the matrix kernels while attached.
/// Used by the inference-cost audit; inactive (nullptr) by default.
struct FlopCounter {
    std::uint64_t mul_adds = 0;
    std::uint64_t elementwise = 0;

    std::uint64_t total() const { return mul_adds + elementwise; }
};

inline FlopCounter*& active_flop_counter() {
    thread_local FlopCounter* counter = nullptr;
    return counter;
}

/// Attaches a FlopCounter for the current scope.
class FlopScope {
  public:
    explicit FlopScope(FlopCounter& c) : previous_(active_flop_counter()) { active_flop_counter() = &c; }
    ~FlopScope() { active_flop_counter() = previous_; }
    FlopScope(const FlopScope&) = delete;
    FlopScope& operator=(const FlopScope&) = delete;

  private:
    FlopCounter* previous_;
};

/// Dense row-major matrix of 64-bit floats. Every construction path rejects
/// non-finite entries, so downstream code may assume finiteness.
class DenseMatrix {
  public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0) throw ShapeMismatch("DenseMatrix: dimensions must be positive");
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0) throw ShapeMismatch("DenseMatrix: dimensions must be positive");
        if (data_.size() != rows * cols) throw ShapeMismatch("DenseMatrix: data length != rows*cols");
        ensure_finite();
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix filled(std::size_t rows, std::size_t cols, double value) {
        if (!std::isfinite(value)) throw NonFiniteValue("DenseMatrix::filled: non-finite fill value");
        DenseMatrix m(rows, cols);
        for (double& v : m.data_) v = value;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool same_shape(const DenseMatrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

    bool bit_equal(const DenseMatrix& other) const {
        if (!same_shape(other)) return false;
        for (std::size_t i = 0; i < data_.size(); ++i)
            if (data_[i] != other.data_[i] || std::signbit(data_[i]) != std::signbit(other.data_[i])) return false;
        return true;
    }

    void ensure_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) throw NonFiniteValue("DenseMatrix: non-finite entry");
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {
inline void count_mul_adds(std::uint64_t n) {
    if (FlopCounter* c = active_flop_counter()) c->mul_adds += n;
}
inline void count_elementwise(std::uint64_t n) {
    if (FlopCounter* c = active_flop_counter()) c->elementwise += n;
}
inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(op) + ": shape mismatch");
}
}  // namespace detail

inline DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw ShapeMismatch("matmul: inner dimensions differ");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    detail::count_mul_adds(static_cast<std::uint64_t>(a.rows()) * b.cols() * a.cols());
    out.ensure_finite();
    return out;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require_same_shape(a, b, "add");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    detail::count_elementwise(a.size());
    out.ensure_finite();
    return out;
}

inline DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require_same_shape(a, b, "sub");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    detail::count_elementwise(a.size());
    out.ensure_finite();
    return out;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require_same_shape(a, b, "hadamard");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    detail::count_elementwise(a.size());
    out.ensure_finite();
    return out;
}

inline DenseMatrix scale(const DenseMatrix& a, double alpha) {
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * alpha;
    detail::count_elementwise(a.size());
    out.ensure_finite();
    return out;
}

inline double frobenius_norm(const DenseMatrix& m) {
    double acc = 0.0;
    for (double v : m.data()) acc += v * v;
    return std::sqrt(acc);
}

inline double max_abs(const DenseMatrix& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::abs(v));
    return best;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    detail::require_same_shape(a, b, "max_abs_diff");
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a.data()[i] - b.data()[i]));
    return best;
}

inline DenseMatrix slice_columns(const DenseMatrix& m, std::size_t first, std::size_t count) {
    if (first + count > m.cols()) throw ShapeMismatch("slice_columns: range out of bounds");
    DenseMatrix out(m.rows(), count);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, first + j);
    return out;
}

/// Modified Gram-Schmidt in place (two passes). Columns that vanish under
/// projection are replaced by canonical vectors orthogonal to everything
/// accepted so far and to the optional `against` block.
inline void orthonormalize_columns(DenseMatrix& m, const DenseMatrix* against = nullptr) {
    const std::size_t rows = m.rows();
    for (std::size_t j = 0; j < m.cols(); ++j) {
        std::vector<double> w(rows);
        for (std::size_t i = 0; i < rows; ++i) w[i] = m(i, j);
        auto project_off = [&](const DenseMatrix& basis, std::size_t count) {
            for (std::size_t b = 0; b < count; ++b) {
                double dot = 0.0;
                for (std::size_t i = 0; i < rows; ++i) dot += w[i] * basis(i, b);
                for (std::size_t i = 0; i < rows; ++i) w[i] -= dot * basis(i, b);
            }
        };
        auto run_passes = [&]() {
            for (int pass = 0; pass < 2; ++pass) {
                if (against) project_off(*against, against->cols());
                project_off(m, j);
            }
            double norm = 0.0;
            for (double x : w) norm += x * x;
            return std::sqrt(norm);
        };
        double norm = run_passes();
        if (norm <= 1e-10) {
            bool placed = false;
            for (std::size_t cand = 0; cand < rows && !placed; ++cand) {
                std::fill(w.begin(), w.end(), 0.0);
                w[cand] = 1.0;
                norm = run_passes();
                placed = norm > 0.5;
            }
            if (!placed) throw Error("orthonormalize_columns: no candidate survived");
        }
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = w[i] / norm;
    }
}

/// Sum of |v|^p over all entries: the p-th power of the p-norm.
inline double p_norm_pow(std::span<const double> values, double p) {
    if (!std::isfinite(p) || p < 1.0) throw InvalidOrder("p_norm_pow: order must be finite and >= 1");
    double acc = 0.0;
    for (double v : values) acc += std::pow(std::abs(v), p);
    return acc;
}

inline double p_norm_pow(const DenseMatrix& m, double p) { return p_norm_pow(m.data(), p); }

}  // namespace deal
