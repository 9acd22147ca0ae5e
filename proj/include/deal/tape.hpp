// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"

namespace deal {

/// Regularization group a parameter belongs to.
enum class ParamGroup { retention, updater, adapter };

struct ParamEntry {
    std::string name;
    ParamGroup group;
    DenseMatrix value;
};

/// Ordered, uniquely named collection of trainable matrices. Gradient
/// containers produced from a ParamSet are congruent entry by entry.
struct ParamSet {
    std::vector<ParamEntry> entries;

    void add(std::string name, ParamGroup group, DenseMatrix value) {
        for (const auto& e : entries)
            if (e.name == name) throw Error("ParamSet: duplicate name " + name);
        entries.push_back({std::move(name), group, std::move(value)});
    }

    std::size_t size() const { return entries.size(); }

    const ParamEntry& operator[](std::size_t i) const { return entries[i]; }
    ParamEntry& operator[](std::size_t i) { return entries[i]; }

    const DenseMatrix& at(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e.value;
        throw Error("ParamSet: unknown name " + name);
    }

    /// Shape-congruent all-zero gradient container.
    ParamSet zeros_like() const {
        ParamSet g;
        for (const auto& e : entries) g.entries.push_back({e.name, e.group, DenseMatrix(e.value.rows(), e.value.cols())});
        return g;
    }

    bool congruent(const ParamSet& other) const {
        if (entries.size() != other.entries.size()) return false;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].name != other.entries[i].name || !entries[i].value.same_shape(other.entries[i].value))
                return false;
        return true;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.value.size();
        return n;
    }
};

/// Exponents beyond this magnitude are clamped before exp; the clamp region
/// carries zero gradient.
constexpr double kExpClamp = 40.0;

inline double clamped_exp(double e) {
    if (e > kExpClamp) e = kExpClamp;
    if (e < -kExpClamp) e = -kExpClamp;
    return std::exp(e);
}

/// Define-by-run reverse-mode tape over matrix-valued primitives. Scalars are
/// 1x1 matrices. Each factory validates shapes, evaluates eagerly, and records
/// the node for the backward sweep.
class Tape {
  public:
    enum class Op : std::uint8_t {
        leaf,
        transpose_op,
        matmul_op,
        add_op,
        sub_op,
        hadamard_op,
        scale_op,       // by a compile-time constant
        add_scalar_op,  // broadcast 1x1 node
        sub_scalar_op,
        add_colvec_op,  // broadcast n x 1 node across columns
        exp_clamped_op,
        tanh_op,
        hconcat_op,
        slice_col_op,
        mse_op,
        pnorm_op,
        opaque_op,  // identity with no adjoint rule; fault-injection hook
    };

    struct Node {
        Op op;
        std::vector<int> args;
        double scalar = 0.0;  // scale factor, p order, or column index
        DenseMatrix value;
    };

    int leaf(DenseMatrix v) { return push(Op::leaf, {}, 0.0, std::move(v)); }

    int transpose(int a) { return push(Op::transpose_op, {a}, 0.0, deal::transpose(value(a))); }

    int matmul(int a, int b) { return push(Op::matmul_op, {a, b}, 0.0, deal::matmul(value(a), value(b))); }

    int add(int a, int b) { return push(Op::add_op, {a, b}, 0.0, deal::add(value(a), value(b))); }

    int sub(int a, int b) { return push(Op::sub_op, {a, b}, 0.0, deal::sub(value(a), value(b))); }

    int hadamard(int a, int b) { return push(Op::hadamard_op, {a, b}, 0.0, deal::hadamard(value(a), value(b))); }

    int scale(int a, double alpha) {
        if (!std::isfinite(alpha)) throw NonFiniteValue("tape scale: non-finite factor");
        return push(Op::scale_op, {a}, alpha, deal::scale(value(a), alpha));
    }

    int add_scalar(int a, int s) {
        require_scalar(s, "add_scalar");
        const DenseMatrix& x = value(a);
        double c = value(s)(0, 0);
        DenseMatrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] + c;
        return push(Op::add_scalar_op, {a, s}, 0.0, std::move(out));
    }

    int sub_scalar(int a, int s) {
        require_scalar(s, "sub_scalar");
        const DenseMatrix& x = value(a);
        double c = value(s)(0, 0);
        DenseMatrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] - c;
        return push(Op::sub_scalar_op, {a, s}, 0.0, std::move(out));
    }

    int add_colvec(int a, int v) {
        const DenseMatrix& x = value(a);
        const DenseMatrix& col = value(v);
        if (col.cols() != 1 || col.rows() != x.rows()) throw ShapeMismatch("tape add_colvec: expected matching n x 1");
        DenseMatrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) + col(i, 0);
        return push(Op::add_colvec_op, {a, v}, 0.0, std::move(out));
    }

    int exp_clamped(int a) {
        const DenseMatrix& x = value(a);
        DenseMatrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = clamped_exp(x.data()[i]);
        return push(Op::exp_clamped_op, {a}, 0.0, std::move(out));
    }

    int tanh(int a) {
        const DenseMatrix& x = value(a);
        DenseMatrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::tanh(x.data()[i]);
        return push(Op::tanh_op, {a}, 0.0, std::move(out));
    }

    int hconcat(const std::vector<int>& parts) {
        if (parts.empty()) throw ShapeMismatch("tape hconcat: no inputs");
        std::size_t rows = value(parts[0]).rows();
        std::size_t cols = 0;
        for (int p : parts) {
            if (value(p).rows() != rows) throw ShapeMismatch("tape hconcat: row counts differ");
            cols += value(p).cols();
        }
        DenseMatrix out(rows, cols);
        std::size_t at = 0;
        for (int p : parts) {
            const DenseMatrix& m = value(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) out(i, at + j) = m(i, j);
            at += m.cols();
        }
        return push(Op::hconcat_op, parts, 0.0, std::move(out));
    }

    int slice_col(int a, std::size_t col) {
        const DenseMatrix& x = value(a);
        if (col >= x.cols()) throw ShapeMismatch("tape slice_col: column out of range");
        DenseMatrix out(x.rows(), 1);
        for (std::size_t i = 0; i < x.rows(); ++i) out(i, 0) = x(i, col);
        return push(Op::slice_col_op, {a}, static_cast<double>(col), std::move(out));
    }

    /// Mean of squared entrywise differences; 1x1 output.
    int mse(int pred, int target) {
        const DenseMatrix& p = value(pred);
        const DenseMatrix& t = value(target);
        if (!p.same_shape(t)) throw ShapeMismatch("tape mse: shapes differ");
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            double d = p.data()[i] - t.data()[i];
            acc += d * d;
        }
        DenseMatrix out(1, 1);
        out(0, 0) = acc / static_cast<double>(p.size());
        return push(Op::mse_op, {pred, target}, 0.0, std::move(out));
    }

    /// Sum of |x|^p; 1x1 output. Subgradient 0 at x = 0.
    int p_norm_pow(int a, double p) {
        if (!std::isfinite(p) || p < 1.0) throw InvalidOrder("tape p_norm_pow: order must be finite and >= 1");
        DenseMatrix out(1, 1);
        out(0, 0) = deal::p_norm_pow(value(a), p);
        return push(Op::pnorm_op, {a}, p, std::move(out));
    }

    /// Identity forward with no registered adjoint. Exists so the closed
    /// primitive-set contract (UnregisteredPrimitive on backward) is testable.
    int opaque(int a) { return push(Op::opaque_op, {a}, 0.0, value(a)); }

    const DenseMatrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    std::size_t node_count() const { return nodes_.size(); }

    /// Multiplies the tanh adjoint by the given factor. Fault-injection hook
    /// for the gradient checker's negative control; 1.0 in normal use.
    void set_tanh_adjoint_scale(double s) { tanh_adjoint_scale_ = s; }

    /// Reverse sweep from a 1x1 loss node; returns one adjoint per node.
    std::vector<DenseMatrix> backward(int loss_id) const {
        require_scalar(loss_id, "backward");
        std::vector<DenseMatrix> adj(nodes_.size());
        std::vector<bool> present(nodes_.size(), false);
        auto accumulate = [&](int id, const DenseMatrix& g) {
            auto i = static_cast<std::size_t>(id);
            if (!present[i]) {
                adj[i] = g;
                present[i] = true;
            } else {
                adj[i] = deal::add(adj[i], g);
            }
        };

        DenseMatrix one(1, 1);
        one(0, 0) = 1.0;
        accumulate(loss_id, one);

        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            auto i = static_cast<std::size_t>(id);
            if (!present[i]) continue;
            const Node& n = nodes_[i];
            const DenseMatrix& g = adj[i];
            switch (n.op) {
                case Op::leaf:
                    break;
                case Op::transpose_op:
                    accumulate(n.args[0], deal::transpose(g));
                    break;
                case Op::matmul_op:
                    accumulate(n.args[0], deal::matmul(g, deal::transpose(value(n.args[1]))));
                    accumulate(n.args[1], deal::matmul(deal::transpose(value(n.args[0])), g));
                    break;
                case Op::add_op:
                    accumulate(n.args[0], g);
                    accumulate(n.args[1], g);
                    break;
                case Op::sub_op:
                    accumulate(n.args[0], g);
                    accumulate(n.args[1], deal::scale(g, -1.0));
                    break;
                case Op::hadamard_op:
                    accumulate(n.args[0], deal::hadamard(g, value(n.args[1])));
                    accumulate(n.args[1], deal::hadamard(g, value(n.args[0])));
                    break;
                case Op::scale_op:
                    accumulate(n.args[0], deal::scale(g, n.scalar));
                    break;
                case Op::add_scalar_op:
                case Op::sub_scalar_op: {
                    accumulate(n.args[0], g);
                    double total = 0.0;
                    for (double v : g.data()) total += v;
                    DenseMatrix gs(1, 1);
                    gs(0, 0) = n.op == Op::add_scalar_op ? total : -total;
                    accumulate(n.args[1], gs);
                    break;
                }
                case Op::add_colvec_op: {
                    accumulate(n.args[0], g);
                    DenseMatrix gv(g.rows(), 1);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        double total = 0.0;
                        for (std::size_t c = 0; c < g.cols(); ++c) total += g(r, c);
                        gv(r, 0) = total;
                    }
                    accumulate(n.args[1], gv);
                    break;
                }
                case Op::exp_clamped_op: {
                    const DenseMatrix& x = value(n.args[0]);
                    DenseMatrix gx(g.rows(), g.cols());
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        bool clamped = x.data()[k] > kExpClamp || x.data()[k] < -kExpClamp;
                        gx.data()[k] = clamped ? 0.0 : g.data()[k] * n.value.data()[k];
                    }
                    accumulate(n.args[0], gx);
                    break;
                }
                case Op::tanh_op: {
                    DenseMatrix gx(g.rows(), g.cols());
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        double t = n.value.data()[k];
                        gx.data()[k] = tanh_adjoint_scale_ * g.data()[k] * (1.0 - t * t);
                    }
                    accumulate(n.args[0], gx);
                    break;
                }
                case Op::hconcat_op: {
                    std::size_t at = 0;
                    for (int part : n.args) {
                        std::size_t w = value(part).cols();
                        DenseMatrix gp(g.rows(), w);
                        for (std::size_t r = 0; r < g.rows(); ++r)
                            for (std::size_t c = 0; c < w; ++c) gp(r, c) = g(r, at + c);
                        accumulate(part, gp);
                        at += w;
                    }
                    break;
                }
                case Op::slice_col_op: {
                    const DenseMatrix& x = value(n.args[0]);
                    DenseMatrix gx(x.rows(), x.cols());
                    auto col = static_cast<std::size_t>(n.scalar);
                    for (std::size_t r = 0; r < x.rows(); ++r) gx(r, col) = g(r, 0);
                    accumulate(n.args[0], gx);
                    break;
                }
                case Op::mse_op: {
                    const DenseMatrix& p = value(n.args[0]);
                    const DenseMatrix& t = value(n.args[1]);
                    double w = 2.0 * g(0, 0) / static_cast<double>(p.size());
                    DenseMatrix gp(p.rows(), p.cols());
                    for (std::size_t k = 0; k < p.size(); ++k) gp.data()[k] = w * (p.data()[k] - t.data()[k]);
                    accumulate(n.args[0], gp);
                    accumulate(n.args[1], deal::scale(gp, -1.0));
                    break;
                }
                case Op::pnorm_op: {
                    const DenseMatrix& x = value(n.args[0]);
                    double p = n.scalar;
                    DenseMatrix gx(x.rows(), x.cols());
                    for (std::size_t k = 0; k < x.size(); ++k) {
                        double v = x.data()[k];
                        if (v == 0.0) continue;  // subgradient 0
                        double mag = p * std::pow(std::abs(v), p - 1.0);
                        gx.data()[k] = g(0, 0) * (v > 0.0 ? mag : -mag);
                    }
                    accumulate(n.args[0], gx);
                    break;
                }
                default:
                    throw UnregisteredPrimitive("tape backward: op has no adjoint rule");
            }
        }
        return adj;
    }

  private:
    int push(Op op, std::vector<int> args, double scalar, DenseMatrix value) {
        nodes_.push_back({op, std::move(args), scalar, std::move(value)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    void require_scalar(int id, const char* where) const {
        const DenseMatrix& v = value(id);
        if (v.rows() != 1 || v.cols() != 1) throw ShapeMismatch(std::string("tape ") + where + ": expected 1x1 node");
    }

    std::vector<Node> nodes_;
    double tanh_adjoint_scale_ = 1.0;
};

/// Builds the loss graph on a fresh tape: receives leaf ids aligned with the
/// ParamSet entries and returns the 1x1 loss node id.
using LossBuilder = std::function<int(Tape&, const std::vector<int>&)>;

struct GradOptions {
    double tanh_adjoint_scale = 1.0;  // != 1.0 only in fault-injection tests
};

inline double eval_loss(const LossBuilder& builder, const ParamSet& params) {
    Tape tape;
    std::vector<int> ids;
    ids.reserve(params.size());
    for (const auto& e : params.entries) ids.push_back(tape.leaf(e.value));
    int loss = builder(tape, ids);
    return tape.value(loss)(0, 0);
}

/// Exact reverse-mode gradients of the built loss for every parameter entry.
inline ParamSet grad_of(const LossBuilder& builder, const ParamSet& params, const GradOptions& options = {}) {
    Tape tape;
    tape.set_tanh_adjoint_scale(options.tanh_adjoint_scale);
    std::vector<int> ids;
    ids.reserve(params.size());
    for (const auto& e : params.entries) ids.push_back(tape.leaf(e.value));
    int loss = builder(tape, ids);
    std::vector<DenseMatrix> adj = tape.backward(loss);
    ParamSet grads = params.zeros_like();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const DenseMatrix& g = adj[static_cast<std::size_t>(ids[i])];
        if (!g.empty()) grads[i].value = g;
    }
    return grads;
}

/// Central finite differences (f(x+e) - f(x-e)) / 2e per coordinate; the
/// independent oracle for grad_of.
inline ParamSet finite_diff(const LossBuilder& builder, const ParamSet& params, double epsilon) {
    if (epsilon < 1e-8 || epsilon > 1e-3) throw Error("finite_diff: epsilon outside [1e-8, 1e-3]");
    ParamSet grads = params.zeros_like();
    ParamSet probe = params;
    for (std::size_t e = 0; e < params.size(); ++e) {
        for (std::size_t k = 0; k < params[e].value.size(); ++k) {
            double saved = probe[e].value.data()[k];
            probe[e].value.data()[k] = saved + epsilon;
            double up = eval_loss(builder, probe);
            probe[e].value.data()[k] = saved - epsilon;
            double down = eval_loss(builder, probe);
            probe[e].value.data()[k] = saved;
            grads[e].value.data()[k] = (up - down) / (2.0 * epsilon);
        }
    }
    return grads;
}

/// Worst-case relative disagreement between two gradient containers, with a
/// floor so vanishing gradients compare absolutely.
struct GradCompare {
    double max_rel_error = 0.0;
    std::string worst_name;
};

inline GradCompare compare_grads(const ParamSet& a, const ParamSet& b, double floor = 1e-3) {
    if (!a.congruent(b)) throw ShapeMismatch("compare_grads: containers not congruent");
    GradCompare out;
    for (std::size_t e = 0; e < a.size(); ++e) {
        for (std::size_t k = 0; k < a[e].value.size(); ++k) {
            double x = a[e].value.data()[k];
            double y = b[e].value.data()[k];
            double rel = std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor});
            if (rel > out.max_rel_error) {
                out.max_rel_error = rel;
                out.worst_name = a[e].name;
            }
        }
    }
    return out;
}

}  // namespace deal
