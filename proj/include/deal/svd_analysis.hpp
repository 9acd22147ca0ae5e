// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"
#include "deal/rng.hpp"
#include "deal/svd.hpp"

namespace deal {

/// Best rank-k approximation in Frobenius norm: sum of the top-k singular triples.
inline DenseMatrix truncated_approx(const DenseMatrix& y, std::size_t k) {
    if (k < 1 || k > std::min(y.rows(), y.cols())) throw RankOutOfRange("truncated_approx: k out of range");
    SvdResult r = svd(y);
    DenseMatrix out(y.rows(), y.cols());
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) += r.S[t] * r.U(i, t) * r.V(j, t);
    return out;
}

namespace detail {

// Solves A * X = B for square A by Gaussian elimination with partial pivoting.
inline DenseMatrix solve_linear(DenseMatrix a, DenseMatrix b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) throw ShapeMismatch("solve_linear: incompatible shapes");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(pivot, col))) pivot = i;
        if (a(pivot, col) == 0.0) throw RankDeficient("solve_linear: singular system");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(pivot, j));
        }
        double inv = 1.0 / a(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            double f = a(i, col) * inv;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(col, j);
        }
    }
    DenseMatrix x(n, b.cols());
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = b(i, j);
            for (std::size_t k = i + 1; k < n; ++k) acc -= a(i, k) * x(k, j);
            x(i, j) = acc / a(i, i);
        }
    }
    return x;
}

}  // namespace detail

/// Projection of X's columns onto the column space of Y, computed through the
/// normal equations Y (Y^T Y)^{-1} Y^T X. Requires Y to have full column rank;
/// use projector_estimate_pinv when it does not.
inline DenseMatrix projector_estimate(const DenseMatrix& y, const DenseMatrix& x) {
    if (x.rows() != y.rows()) throw ShapeMismatch("projector_estimate: row counts differ");
    SvdResult r = svd(y);
    if (r.S.front() == 0.0 || r.S.back() <= 1e-10 * r.S.front())
        throw RankDeficient("projector_estimate: Y is rank deficient; request the pseudo-inverse fallback");
    DenseMatrix gram = matmul(transpose(y), y);
    DenseMatrix rhs = matmul(transpose(y), x);
    return matmul(y, detail::solve_linear(std::move(gram), std::move(rhs)));
}

/// Pseudo-inverse fallback for rank-deficient Y: projects onto the span of the
/// singular vectors above the 1e-10 relative cutoff.
inline DenseMatrix projector_estimate_pinv(const DenseMatrix& y, const DenseMatrix& x) {
    if (x.rows() != y.rows()) throw ShapeMismatch("projector_estimate_pinv: row counts differ");
    SvdResult r = svd(y);
    double cutoff = 1e-10 * r.S.front();
    std::size_t keep = 0;
    while (keep < r.S.size() && r.S[keep] > cutoff) ++keep;
    if (keep == 0) return DenseMatrix(x.rows(), x.cols());
    DenseMatrix basis = slice_columns(r.U, 0, keep);
    return matmul(basis, matmul(transpose(basis), x));
}

/// Singular-value shrinkage estimate: sum over the top rank_x triples of
/// ((sigma_k^2 - noise_var) / sigma_k) u_k v_k^T, with negative coefficients
/// clamped to zero.
inline DenseMatrix shrink(const DenseMatrix& y, double noise_var, std::size_t rank_x) {
    if (noise_var < 0.0) throw Error("shrink: noise variance must be >= 0");
    if (rank_x < 1 || rank_x > std::min(y.rows(), y.cols())) throw RankOutOfRange("shrink: rank_x out of range");
    SvdResult r = svd(y);
    DenseMatrix out(y.rows(), y.cols());
    for (std::size_t k = 0; k < rank_x; ++k) {
        if (r.S[k] == 0.0) continue;
        double coef = (r.S[k] * r.S[k] - noise_var) / r.S[k];
        if (coef < 0.0) coef = 0.0;
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) += coef * r.U(i, k) * r.V(j, k);
    }
    return out;
}

/// The perturbed block decomposition of Y = X + D built by projecting the
/// noise onto the principal and complement right subspaces of X. P1 _|_ P2
/// holds exactly because the complement block is projected off col(P1) before
/// its SVD; the projection residue is folded into the stored noise, so the
/// block formula reassembles X + noise exactly.
struct PerturbedDecomposition {
    DenseMatrix P1, Q1;
    std::vector<double> S1;
    DenseMatrix P2, Q2;
    std::vector<double> S2;
    DenseMatrix Vx1, Vx2;  // right bases of X (principal / complement)
    DenseMatrix Ux1;       // principal left basis of X
    DenseMatrix X;         // the clean matrix
    DenseMatrix noise;     // effective noise: X + noise is what the blocks reassemble

    DenseMatrix reassemble() const {
        auto block = [](const DenseMatrix& p, const std::vector<double>& s, const DenseMatrix& q) {
            DenseMatrix ps(p.rows(), s.size());
            for (std::size_t i = 0; i < p.rows(); ++i)
                for (std::size_t k = 0; k < s.size(); ++k) ps(i, k) = p(i, k) * s[k];
            return matmul(ps, transpose(q));
        };
        DenseMatrix y1 = matmul(block(P1, S1, Q1), transpose(Vx1));
        DenseMatrix y2 = matmul(block(P2, S2, Q2), transpose(Vx2));
        return add(y1, y2);
    }
};

/// Largest principal angle (radians) between the column spans of two
/// orthonormal matrices, computed through the sine route for accuracy near 0.
inline double largest_principal_angle(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw ShapeMismatch("largest_principal_angle: row counts differ");
    DenseMatrix residual = sub(b, matmul(a, matmul(transpose(a), b)));
    SvdResult r = svd(residual);
    double s = std::min(1.0, r.S.front());
    return std::asin(s);
}

inline PerturbedDecomposition perturbed_decomposition(const DenseMatrix& x, std::size_t rank_x,
                                                      const DenseMatrix& noise) {
    if (!x.same_shape(noise)) throw ShapeMismatch("perturbed_decomposition: X and noise shapes differ");
    const std::size_t r = x.cols();
    if (rank_x < 1 || rank_x >= std::min(x.rows(), r)) throw RankOutOfRange("perturbed_decomposition: rank_x out of range");

    SvdResult sx = svd(x);
    PerturbedDecomposition d;
    d.X = x;
    d.Ux1 = slice_columns(sx.U, 0, rank_x);
    d.Vx1 = slice_columns(sx.V, 0, rank_x);
    d.Vx2 = slice_columns(sx.V, rank_x, r - rank_x);

    DenseMatrix c1 = matmul(add(x, noise), d.Vx1);
    SvdResult s1 = svd(c1);
    d.P1 = s1.U;
    d.S1 = s1.S;
    d.Q1 = s1.V;

    DenseMatrix c2 = matmul(noise, d.Vx2);
    DenseMatrix c2_proj = sub(c2, matmul(d.P1, matmul(transpose(d.P1), c2)));
    SvdResult s2 = svd(c2_proj);
    d.P2 = s2.U;
    orthonormalize_columns(d.P2, &d.P1);
    d.S2 = s2.S;
    d.Q2 = s2.V;

    // The noise consistent with the enforced orthogonality: the component of
    // D V_x2 lying in col(P1) is dropped.
    DenseMatrix kept = add(matmul(matmul(noise, d.Vx1), transpose(d.Vx1)), matmul(c2_proj, transpose(d.Vx2)));
    d.noise = kept;
    return d;
}

/// Builds a random rank_x matrix with unit-gap spectrum, perturbs it with
/// Gaussian noise, runs the block construction, and returns the largest
/// principal angle between span(P1) and span(Ux1).
inline double theorem1_demo(std::size_t n_x, std::size_t r, std::size_t rank_x, double noise_std, Rng& rng) {
    if (rank_x < 1 || rank_x >= std::min(n_x, r)) throw RankOutOfRange("theorem1_demo: need rank_x < min(n_x, r)");
    if (noise_std < 0.0) throw Error("theorem1_demo: noise_std must be >= 0");

    DenseMatrix u = gaussian_matrix(n_x, rank_x, 0.0, 1.0, rng);
    DenseMatrix v = gaussian_matrix(r, rank_x, 0.0, 1.0, rng);
    orthonormalize_columns(u);
    orthonormalize_columns(v);
    DenseMatrix x(n_x, r);
    for (std::size_t k = 0; k < rank_x; ++k) {
        double sigma = 2.0 - static_cast<double>(k) / static_cast<double>(rank_x);  // spectrum in (1, 2]
        for (std::size_t i = 0; i < n_x; ++i)
            for (std::size_t j = 0; j < r; ++j) x(i, j) += sigma * u(i, k) * v(j, k);
    }

    DenseMatrix noise(n_x, r);
    if (noise_std > 0.0) noise = gaussian_matrix(n_x, r, 0.0, noise_std, rng);

    PerturbedDecomposition d = perturbed_decomposition(x, rank_x, noise);
    return largest_principal_angle(d.P1, d.Ux1);
}

}  // namespace deal
