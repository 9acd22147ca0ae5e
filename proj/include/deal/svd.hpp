// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"

namespace deal {

/// Thin SVD M = U * diag(S) * V^T with U (rows x k), V (cols x k), k = min(rows, cols).
/// U and V have orthonormal columns; S is sorted nonincreasing.
struct SvdResult {
    DenseMatrix U;
    std::vector<double> S;
    DenseMatrix V;

    DenseMatrix reconstruct() const {
        DenseMatrix us(U.rows(), S.size());
        for (std::size_t i = 0; i < U.rows(); ++i)
            for (std::size_t k = 0; k < S.size(); ++k) us(i, k) = U(i, k) * S[k];
        return matmul(us, transpose(V));
    }
};

namespace detail {

constexpr int kSvdMaxSweeps = 1000;
constexpr double kSvdTol = 1e-14;

// One-sided Jacobi on a tall matrix (rows >= cols): orthogonalizes the
// columns of A by plane rotations accumulated into V.
inline void jacobi_orthogonalize(DenseMatrix& a, DenseMatrix& v) {
    const std::size_t n = a.cols();
    const std::size_t m = a.rows();
    int sweeps = 0;
    bool rotated = true;
    while (rotated) {
        if (++sweeps > kSvdMaxSweeps) throw NonConvergence("svd: sweep cap exceeded");
        rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    app += a(i, p) * a(i, p);
                    aqq += a(i, q) * a(i, q);
                    apq += a(i, p) * a(i, q);
                }
                if (apq == 0.0 || std::abs(apq) <= kSvdTol * std::sqrt(app * aqq)) continue;
                rotated = true;
                double zeta = (aqq - app) / (2.0 * apq);
                double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    double x = a(i, p), y = a(i, q);
                    a(i, p) = c * x - s * y;
                    a(i, q) = s * x + c * y;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double x = v(i, p), y = v(i, q);
                    v(i, p) = c * x - s * y;
                    v(i, q) = s * x + c * y;
                }
            }
        }
    }
}

// Replaces numerically dead U-columns with canonical vectors orthogonalized
// against every other column, keeping U orthonormal for rank-deficient input.
inline void complete_basis(DenseMatrix& u, const std::vector<bool>& dead) {
    const std::size_t m = u.rows();
    const std::size_t k = u.cols();
    for (std::size_t col = 0; col < k; ++col) {
        if (!dead[col]) continue;
        bool placed = false;
        for (std::size_t cand = 0; cand < m && !placed; ++cand) {
            std::vector<double> w(m, 0.0);
            w[cand] = 1.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (j == col) continue;
                if (dead[j] && j > col) continue;  // later dead columns are still zero
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += w[i] * u(i, j);
                for (std::size_t i = 0; i < m; ++i) w[i] -= dot * u(i, j);
            }
            double norm = 0.0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.5) {
                for (std::size_t i = 0; i < m; ++i) u(i, col) = w[i] / norm;
                placed = true;
            }
        }
        if (!placed) throw NonConvergence("svd: basis completion failed");
    }
}

inline SvdResult svd_tall(const DenseMatrix& input) {
    DenseMatrix a = input;
    DenseMatrix v = DenseMatrix::identity(input.cols());
    jacobi_orthogonalize(a, v);

    const std::size_t m = a.rows();
    const std::size_t k = a.cols();
    std::vector<double> sigma(k);
    for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += a(i, j) * a(i, j);
        sigma[j] = std::sqrt(acc);
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    SvdResult out;
    out.S.resize(k);
    out.U = DenseMatrix(m, k);
    out.V = DenseMatrix(input.cols(), k);
    double sigma_max = sigma[order[0]];
    std::vector<bool> dead(k, false);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t src = order[j];
        out.S[j] = sigma[src];
        for (std::size_t i = 0; i < input.cols(); ++i) out.V(i, j) = v(i, src);
        if (sigma[src] > sigma_max * 1e-12 && sigma[src] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.U(i, j) = a(i, src) / sigma[src];
        } else {
            dead[j] = true;
        }
    }
    complete_basis(out.U, dead);
    return out;
}

// Sign convention: the largest-magnitude entry of each U column (first such
// entry on ties) is made nonnegative; V flips with U.
inline void fix_signs(SvdResult& r) {
    for (std::size_t j = 0; j < r.S.size(); ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < r.U.rows(); ++i) {
            double a = std::abs(r.U(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (r.U(arg, j) < 0.0) {
            for (std::size_t i = 0; i < r.U.rows(); ++i) r.U(i, j) = -r.U(i, j);
            for (std::size_t i = 0; i < r.V.rows(); ++i) r.V(i, j) = -r.V(i, j);
        }
    }
}

}  // namespace detail

inline SvdResult svd(const DenseMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw ShapeMismatch("svd: empty matrix");

    // The sweep works on squared column norms; pull extreme magnitudes back
    // into range first. Ordinary inputs are left bit-identical.
    double magnitude = max_abs(m);
    double rescale = 1.0;
    if (magnitude > 1e100 || (magnitude > 0.0 && magnitude < 1e-100)) rescale = magnitude;

    DenseMatrix work = rescale == 1.0 ? m : scale(m, 1.0 / rescale);
    SvdResult out;
    if (work.rows() >= work.cols()) {
        out = detail::svd_tall(work);
    } else {
        SvdResult t = detail::svd_tall(transpose(work));
        out.U = std::move(t.V);
        out.V = std::move(t.U);
        out.S = std::move(t.S);
    }
    detail::fix_signs(out);
    if (rescale != 1.0)
        for (double& s : out.S) s *= rescale;
    return out;
}

}  // namespace deal
