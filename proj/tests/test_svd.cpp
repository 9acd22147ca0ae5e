// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "deal/matrix.hpp"
#include "deal/rng.hpp"
#include "deal/svd.hpp"

using namespace deal;

namespace {

double orthonormality_defect(const DenseMatrix& u) {
    DenseMatrix g = matmul(transpose(u), u);
    DenseMatrix i = DenseMatrix::identity(u.cols());
    return frobenius_norm(sub(g, i));
}

// Independent oracle: eigenvalues of the Gram matrix M^T M via classical
// two-sided Jacobi rotations on a symmetric matrix.
std::vector<double> gram_eigenvalues(const DenseMatrix& m) {
    DenseMatrix a = matmul(transpose(m), m);
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.rbegin(), eig.rend());
    return eig;
}

}  // namespace

TEST_CASE("identity matrix decomposes to itself") {
    SvdResult r = svd(DenseMatrix::identity(3));
    CHECK(max_abs_diff(r.U, DenseMatrix::identity(3)) == 0.0);
    CHECK(max_abs_diff(r.V, DenseMatrix::identity(3)) == 0.0);
    for (double s : r.S) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("diagonal matrix singular values are its entries") {
    DenseMatrix d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 2.0;
    d(2, 2) = 1.0;
    SvdResult r = svd(d);
    CHECK(r.S[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.S[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.S[2] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("random 6x4 matrix: residual and Gram-eigenvalue oracle") {
    Rng rng(7);
    DenseMatrix m = gaussian_matrix(6, 4, 0.0, 1.0, rng);
    SvdResult r = svd(m);
    CHECK(frobenius_norm(sub(r.reconstruct(), m)) <= 1e-10);
    std::vector<double> eig = gram_eigenvalues(m);
    for (std::size_t i = 0; i < r.S.size(); ++i)
        CHECK(r.S[i] == doctest::Approx(std::sqrt(std::max(0.0, eig[i]))).epsilon(1e-8));
}

TEST_CASE("svd invariants over random shapes") {
    Rng rng(99);
    for (auto [rows, cols] : std::vector<std::pair<std::size_t, std::size_t>>{{5, 5}, {8, 3}, {3, 8}, {10, 6}, {2, 7}}) {
        DenseMatrix m = gaussian_matrix(rows, cols, 0.0, 2.0, rng);
        SvdResult r = svd(m);
        CHECK(orthonormality_defect(r.U) <= 1e-8);
        CHECK(orthonormality_defect(r.V) <= 1e-8);
        for (std::size_t i = 0; i + 1 < r.S.size(); ++i) CHECK(r.S[i] >= r.S[i + 1]);
        for (double s : r.S) CHECK(s >= 0.0);
        double ref = std::max(1.0, frobenius_norm(m));
        CHECK(frobenius_norm(sub(r.reconstruct(), m)) <= 1e-8 * ref);
        // sign convention: largest-magnitude entry of each U column is nonnegative
        for (std::size_t j = 0; j < r.S.size(); ++j) {
            double best = -1.0;
            double at_best = 0.0;
            for (std::size_t i = 0; i < r.U.rows(); ++i) {
                if (std::abs(r.U(i, j)) > best) {
                    best = std::abs(r.U(i, j));
                    at_best = r.U(i, j);
                }
            }
            CHECK(at_best >= 0.0);
        }
    }
}

TEST_CASE("svd is bit-deterministic") {
    Rng rng(31);
    DenseMatrix m = gaussian_matrix(7, 5, 0.0, 1.0, rng);
    SvdResult a = svd(m);
    SvdResult b = svd(m);
    CHECK(a.U.bit_equal(b.U));
    CHECK(a.V.bit_equal(b.V));
    for (std::size_t i = 0; i < a.S.size(); ++i) CHECK(a.S[i] == b.S[i]);
}

TEST_CASE("extreme magnitudes are handled by rescaling") {
    Rng rng(3);
    DenseMatrix base = gaussian_matrix(5, 3, 0.0, 1.0, rng);
    for (double magnitude : {1e160, 1e-160}) {
        DenseMatrix m = scale(base, magnitude);
        SvdResult r = svd(m);
        CHECK(orthonormality_defect(r.U) <= 1e-8);
        for (std::size_t i = 0; i < r.S.size(); ++i) CHECK(std::isfinite(r.S[i]));
        // max-abs comparison: Frobenius sums of squares would overflow here
        CHECK(max_abs_diff(r.reconstruct(), m) <= 1e-8 * max_abs(m));
    }
}

TEST_CASE("rank-deficient input still yields orthonormal factors") {
    Rng rng(17);
    DenseMatrix a = gaussian_matrix(6, 2, 0.0, 1.0, rng);
    DenseMatrix b = gaussian_matrix(4, 2, 0.0, 1.0, rng);
    DenseMatrix low_rank = matmul(a, transpose(b));  // 6x4, rank 2
    SvdResult r = svd(low_rank);
    CHECK(orthonormality_defect(r.U) <= 1e-8);
    CHECK(orthonormality_defect(r.V) <= 1e-8);
    CHECK(r.S[2] <= 1e-10 * r.S[0]);
    CHECK(frobenius_norm(sub(r.reconstruct(), low_rank)) <= 1e-8 * frobenius_norm(low_rank));

    SvdResult z = svd(DenseMatrix(4, 3));  // all-zero matrix
    CHECK(orthonormality_defect(z.U) <= 1e-12);
    for (double s : z.S) CHECK(s == 0.0);
}
