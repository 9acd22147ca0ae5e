// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <utility>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"
#include "deal/rng.hpp"

namespace deal {

/// Low-rank adapter: the update is A * B^T with A (m x r), B (n x r).
struct LoraAdapter {
    DenseMatrix A;
    DenseMatrix B;
    std::size_t rank = 0;

    LoraAdapter() = default;

    LoraAdapter(DenseMatrix a, DenseMatrix b) : A(std::move(a)), B(std::move(b)), rank(A.cols()) {
        if (A.cols() != B.cols()) throw ShapeMismatch("LoraAdapter: A and B must share the rank dimension");
    }
};

/// Pretrained weight matrix; never updated after construction.
class FrozenBackbone {
  public:
    explicit FrozenBackbone(DenseMatrix w) : w_(std::move(w)) {}

    const DenseMatrix& weight() const { return w_; }
    std::size_t output_dim() const { return w_.rows(); }
    std::size_t input_dim() const { return w_.cols(); }

  private:
    DenseMatrix w_;
};

/// Materialized update A * B^T.
inline DenseMatrix merge(const LoraAdapter& adapter) { return matmul(adapter.A, transpose(adapter.B)); }

/// (W + A B^T) x evaluated along the factored path W x + A (B^T x).
inline DenseMatrix forward(const FrozenBackbone& backbone, const LoraAdapter& adapter, const DenseMatrix& x) {
    if (x.rows() != backbone.input_dim()) throw ShapeMismatch("forward: input rows must match backbone input dim");
    if (adapter.A.rows() != backbone.output_dim() || adapter.B.rows() != backbone.input_dim())
        throw ShapeMismatch("forward: adapter shapes must match backbone");
    DenseMatrix wx = matmul(backbone.weight(), x);
    DenseMatrix low = matmul(adapter.A, matmul(transpose(adapter.B), x));
    return add(wx, low);
}

/// Fresh adapter: A ~ N(0, 1/r), B = 0, so the initial update is zero.
inline LoraAdapter init_adapter(std::size_t m, std::size_t n, std::size_t r, Rng& rng) {
    if (r < 1 || 2 * r > std::min(m, n)) throw RankTooLarge("init_adapter: rank must satisfy r <= min(m, n) / 2");
    DenseMatrix a = gaussian_matrix(m, r, 0.0, std::sqrt(1.0 / static_cast<double>(r)), rng);
    return LoraAdapter(std::move(a), DenseMatrix(n, r));
}

/// Wraps already-computed factors as a plain adapter. The result's forward
/// pass involves no retention or updater computation.
inline LoraAdapter materialize(DenseMatrix a_new, DenseMatrix b_new) {
    return LoraAdapter(std::move(a_new), std::move(b_new));
}

}  // namespace deal
