// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "deal/lora.hpp"
#include "deal/matrix.hpp"
#include "deal/rng.hpp"
#include "deal/svd.hpp"

using namespace deal;

TEST_CASE("merge of a zero factor is the zero update") {
    Rng rng(1);
    LoraAdapter adapter(DenseMatrix(4, 2), gaussian_matrix(3, 2, 0.0, 1.0, rng));
    CHECK(max_abs(merge(adapter)) == 0.0);
}

TEST_CASE("merge of unit vectors is a single outer product entry") {
    DenseMatrix a(4, 1);
    a(0, 0) = 1.0;  // e1
    DenseMatrix b(3, 1);
    b(1, 0) = 1.0;  // e2
    DenseMatrix m = merge(LoraAdapter(a, b));
    CHECK(m(0, 1) == 1.0);
    double total = 0.0;
    for (double v : m.data()) total += std::abs(v);
    CHECK(total == 1.0);
}

TEST_CASE("merged update has rank at most r") {
    Rng rng(5);
    LoraAdapter adapter(gaussian_matrix(4, 2, 0.0, 1.0, rng), gaussian_matrix(3, 2, 0.0, 1.0, rng));
    SvdResult s = svd(merge(adapter));
    CHECK(s.S[2] <= 1e-10);
    CHECK(s.S[2] <= 1e-10 * s.S[0]);
}

TEST_CASE("forward with a zero adapter is the backbone alone") {
    Rng rng(3);
    FrozenBackbone backbone(gaussian_matrix(4, 6, 0.0, 1.0, rng));
    LoraAdapter zero(DenseMatrix(4, 2), DenseMatrix(6, 2));
    DenseMatrix x = gaussian_matrix(6, 5, 0.0, 1.0, rng);
    CHECK(max_abs_diff(forward(backbone, zero, x), matmul(backbone.weight(), x)) == 0.0);
    CHECK(max_abs(forward(backbone, zero, DenseMatrix(6, 2))) == 0.0);
}

TEST_CASE("factored forward equals merge-then-multiply") {
    Rng rng(2);
    FrozenBackbone backbone(gaussian_matrix(5, 7, 0.0, 1.0, rng));
    LoraAdapter adapter(gaussian_matrix(5, 2, 0.0, 1.0, rng), gaussian_matrix(7, 2, 0.0, 1.0, rng));
    DenseMatrix x = gaussian_matrix(7, 4, 0.0, 1.0, rng);
    DenseMatrix merged_path = matmul(add(backbone.weight(), merge(adapter)), x);
    CHECK(max_abs_diff(forward(backbone, adapter, x), merged_path) <= 1e-10);
}

TEST_CASE("forward is linear in the input") {
    Rng rng(8);
    FrozenBackbone backbone(gaussian_matrix(4, 6, 0.0, 1.0, rng));
    LoraAdapter adapter(gaussian_matrix(4, 2, 0.0, 1.0, rng), gaussian_matrix(6, 2, 0.0, 1.0, rng));
    DenseMatrix x1 = gaussian_matrix(6, 3, 0.0, 1.0, rng);
    DenseMatrix x2 = gaussian_matrix(6, 3, 0.0, 1.0, rng);
    DenseMatrix lhs = forward(backbone, adapter, add(x1, x2));
    DenseMatrix rhs = add(forward(backbone, adapter, x1), forward(backbone, adapter, x2));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
    CHECK_THROWS_AS(forward(backbone, adapter, DenseMatrix(5, 3)), ShapeMismatch);
}

TEST_CASE("init_adapter starts from a zero update and checks the rank bound") {
    Rng rng(1);
    LoraAdapter adapter = init_adapter(8, 6, 2, rng);
    CHECK(max_abs(merge(adapter)) == 0.0);
    CHECK(adapter.rank == 2);
    CHECK_THROWS_AS(init_adapter(8, 6, 4, rng), RankTooLarge);
}

TEST_CASE("init_adapter A entries have variance near 1/r") {
    Rng rng(4);
    LoraAdapter adapter = init_adapter(100, 100, 8, rng);
    double mean = 0.0;
    for (double v : adapter.A.data()) mean += v;
    mean /= static_cast<double>(adapter.A.size());
    double var = 0.0;
    for (double v : adapter.A.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(adapter.A.size() - 1);
    CHECK(var >= 0.06);
    CHECK(var <= 0.19);
}

TEST_CASE("materialize wraps factors without altering them") {
    Rng rng(6);
    DenseMatrix a = gaussian_matrix(4, 2, 0.0, 1.0, rng);
    DenseMatrix b = gaussian_matrix(6, 2, 0.0, 1.0, rng);
    LoraAdapter adapter = materialize(a, b);
    CHECK(adapter.A.bit_equal(a));
    CHECK(adapter.B.bit_equal(b));
    LoraAdapter zero = materialize(DenseMatrix(4, 2), DenseMatrix(6, 2));
    CHECK(max_abs(merge(zero)) == 0.0);
    CHECK_THROWS_AS(materialize(DenseMatrix(4, 2), DenseMatrix(6, 3)), ShapeMismatch);
}
