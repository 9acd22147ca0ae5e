// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deal/errors.hpp"
#include "deal/lora.hpp"
#include "deal/matrix.hpp"
#include "deal/model.hpp"
#include "deal/rng.hpp"
#include "deal/tape.hpp"
#include "deal/tasks.hpp"

namespace deal {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    double lambda1 = 0.01;
    double lambda2 = 0.001;
    double reg_a = 10.0;  // regularization order on retention params
    double reg_b = 2.0;   // regularization order on updater params; reg_a >= reg_b
    double learning_rate = 1e-3;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::sgd;
    UpdateStrategy strategy = UpdateStrategy::both;
    bool iterate_base = false;  // feed each batch the previous batch's (A', B')

    void validate() const {
        if (reg_a < 1.0 || reg_b < 1.0) throw ConfigError("TrainConfig: regularization orders must be >= 1");
        if (reg_a < reg_b) throw ConfigError("TrainConfig: requires a >= b for the regularization orders");
        if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("TrainConfig: lambdas must be >= 0");
        if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning rate must be positive");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch size must be >= 1");
    }
};

struct OptimizerState {
    std::size_t t = 0;
    ParamSet m, v;  // adam moments, lazily shaped
};

/// One optimizer step; SGD is stateless, adam uses bias-corrected moments.
inline ParamSet step(const ParamSet& params, const ParamSet& grads, const TrainConfig& cfg, OptimizerState& state) {
    if (!params.congruent(grads)) throw ShapeMismatch("step: gradient container not congruent");
    ParamSet out = params;
    if (cfg.optimizer == OptimizerKind::sgd) {
        for (std::size_t e = 0; e < out.size(); ++e)
            for (std::size_t k = 0; k < out[e].value.size(); ++k)
                out[e].value.data()[k] -= cfg.learning_rate * grads[e].value.data()[k];
        return out;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (state.m.size() == 0) {
        state.m = params.zeros_like();
        state.v = params.zeros_like();
    }
    ++state.t;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t e = 0; e < out.size(); ++e) {
        for (std::size_t k = 0; k < out[e].value.size(); ++k) {
            double g = grads[e].value.data()[k];
            double& m = state.m[e].value.data()[k];
            double& v = state.v[e].value.data()[k];
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            out[e].value.data()[k] -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + eps);
        }
    }
    return out;
}

namespace detail {

inline DenseMatrix gather_columns(const DenseMatrix& m, const std::vector<std::size_t>& idx, std::size_t first,
                                  std::size_t count) {
    DenseMatrix out(m.rows(), count);
    for (std::size_t j = 0; j < count; ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, idx[first + j]);
    return out;
}

struct LossAndGrads {
    double loss;
    ParamSet grads;
};

inline LossAndGrads loss_and_grads(const LossBuilder& builder, const ParamSet& params) {
    Tape tape;
    std::vector<int> ids;
    ids.reserve(params.size());
    for (const auto& e : params.entries) ids.push_back(tape.leaf(e.value));
    int loss_id = builder(tape, ids);
    std::vector<DenseMatrix> adj = tape.backward(loss_id);
    ParamSet grads = params.zeros_like();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const DenseMatrix& g = adj[static_cast<std::size_t>(ids[i])];
        if (!g.empty()) grads[i].value = g;
    }
    return {tape.value(loss_id)(0, 0), std::move(grads)};
}

}  // namespace detail

/// Graph of Eq-style DEAL loss: MSE of the factored forward pass through the
/// pipeline factors, plus lambda1 |theta1|_a^a + lambda2 |theta2|_b^b.
inline LossBuilder deal_loss_builder(const DealModel& model, const DenseMatrix& q, const DenseMatrix& g,
                                     const TrainConfig& cfg) {
    std::vector<ParamGroup> groups;
    for (const auto& e : model_params(model).entries) groups.push_back(e.group);
    return [&model, &q, &g, cfg, groups](Tape& tape, const std::vector<int>& ids) {
        int base_a = tape.leaf(model.base.A);
        int base_b = tape.leaf(model.base.B);
        PipelineNodes nodes = build_pipeline(tape, model, ids, base_a, base_b);
        int w = tape.leaf(model.backbone.weight());
        int qn = tape.leaf(q);
        int pred = tape.add(tape.matmul(w, qn), tape.matmul(nodes.a_prime, tape.matmul(tape.transpose(nodes.b_prime), qn)));
        int loss = tape.mse(pred, tape.leaf(g));
        int reg1 = -1, reg2 = -1;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (groups[i] == ParamGroup::retention) {
                int term = tape.p_norm_pow(ids[i], cfg.reg_a);
                reg1 = reg1 < 0 ? term : tape.add(reg1, term);
            } else if (groups[i] == ParamGroup::updater) {
                int term = tape.p_norm_pow(ids[i], cfg.reg_b);
                reg2 = reg2 < 0 ? term : tape.add(reg2, term);
            }
        }
        if (reg1 >= 0) loss = tape.add(loss, tape.scale(reg1, cfg.lambda1));
        if (reg2 >= 0) loss = tape.add(loss, tape.scale(reg2, cfg.lambda2));
        return loss;
    };
}

inline double deal_loss(const DealModel& model, const DenseMatrix& q, const DenseMatrix& g, const TrainConfig& cfg) {
    cfg.validate();
    return eval_loss(deal_loss_builder(model, q, g, cfg), model_params(model));
}

/// Plain LoRA loss: MSE of the factored forward pass over the adapter factors
/// alone, no retention, no updater, no regularizers.
inline LossBuilder seq_lora_loss_builder(const FrozenBackbone& backbone, const DenseMatrix& q, const DenseMatrix& g) {
    return [&backbone, &q, &g](Tape& tape, const std::vector<int>& ids) {
        int w = tape.leaf(backbone.weight());
        int qn = tape.leaf(q);
        int pred = tape.add(tape.matmul(w, qn), tape.matmul(ids[0], tape.matmul(tape.transpose(ids[1]), qn)));
        return tape.mse(pred, tape.leaf(g));
    };
}

struct TrainedDeal {
    DealModel model;
    std::vector<double> history;
};

struct TrainedAdapter {
    LoraAdapter adapter;
    std::vector<double> history;
};

namespace detail {

// Shared minibatch loop. builder_for(Qb, Gb) yields the per-batch loss graph;
// on_batch_end runs after each optimizer step (hook for iterate_base).
template <typename BuilderFactory, typename BatchHook>
std::vector<double> minibatch_loop(ParamSet& params, const TaskDataset& data, const TrainConfig& cfg,
                                   BuilderFactory&& builder_for, BatchHook&& on_batch_end) {
    std::vector<double> history;
    const std::size_t total = data.Q_train.cols();
    Rng shuffle_stream = Rng(cfg.seed).split(0x5482ull);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> perm = shuffle_stream.permutation(total);
        for (std::size_t start = 0; start < total; start += cfg.batch_size) {
            std::size_t count = std::min(cfg.batch_size, total - start);
            DenseMatrix qb = gather_columns(data.Q_train, perm, start, count);
            DenseMatrix gb = gather_columns(data.G_train, perm, start, count);
            try {
                LossAndGrads lg = loss_and_grads(builder_for(qb, gb), params);
                if (!std::isfinite(lg.loss))
                    throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch) + " step " +
                                        std::to_string(history.size()));
                history.push_back(lg.loss);
                on_batch_end(lg);
            } catch (const NonFiniteValue&) {
                throw NonFiniteLoss("training produced non-finite values at epoch " + std::to_string(epoch) +
                                    " step " + std::to_string(history.size()));
            }
        }
    }
    return history;
}

}  // namespace detail

/// Algorithm-style DEAL training: per batch, rebuild (A', B') through the
/// pipeline, form the effective update, compute the regularized loss, and
/// update only the retention and updater parameters. The backbone and the
/// base adapter are never modified.
inline TrainedDeal train_deal(DealModel model, const TaskDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.Q_train.cols() == 0) throw Error("train_deal: dataset is empty");
    ParamSet params = model_params(model);
    OptimizerState opt;
    std::vector<double> history = detail::minibatch_loop(
        params, data, cfg,
        [&](const DenseMatrix& qb, const DenseMatrix& gb) {
            apply_params(model, params);
            return deal_loss_builder(model, qb, gb, cfg);
        },
        [&](detail::LossAndGrads& lg) {
            if (cfg.iterate_base) model.base = materialize_model(model);  // pre-update factors
            params = step(params, lg.grads, cfg, opt);
        });
    apply_params(model, params);
    return {std::move(model), std::move(history)};
}

/// Baseline: direct MSE minimization over the adapter factors.
inline TrainedAdapter train_seq_lora(const FrozenBackbone& backbone, LoraAdapter adapter, const TaskDataset& data,
                                     const TrainConfig& cfg) {
    cfg.validate();
    if (data.Q_train.cols() == 0) throw Error("train_seq_lora: dataset is empty");
    ParamSet params;
    params.add("adapter.A", ParamGroup::adapter, adapter.A);
    params.add("adapter.B", ParamGroup::adapter, adapter.B);
    OptimizerState opt;
    std::vector<double> history = detail::minibatch_loop(
        params, data, cfg,
        [&](const DenseMatrix& qb, const DenseMatrix& gb) { return seq_lora_loss_builder(backbone, qb, gb); },
        [&](detail::LossAndGrads& lg) { params = step(params, lg.grads, cfg, opt); });
    return {LoraAdapter(params.at("adapter.A"), params.at("adapter.B")), std::move(history)};
}

/// Adapter init stream shared by every method so runs are paired by seed.
inline LoraAdapter init_adapter_for_task(std::size_t m, std::size_t n, std::size_t rank, std::uint64_t seed,
                                         std::size_t task_index) {
    Rng stream = Rng(seed).split(0xada0ull + task_index);
    return init_adapter(m, n, rank, stream);
}

/// Oracle baseline: an independent adapter per task, each trained in
/// isolation with the plain LoRA objective.
inline std::vector<TrainedAdapter> train_per_task(const FrozenBackbone& backbone,
                                                  const std::vector<TaskDataset>& tasks, std::size_t rank,
                                                  const TrainConfig& cfg) {
    cfg.validate();
    std::vector<TrainedAdapter> out;
    out.reserve(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        LoraAdapter adapter = init_adapter_for_task(backbone.output_dim(), backbone.input_dim(), rank, cfg.seed, t);
        out.push_back(train_seq_lora(backbone, std::move(adapter), tasks[t], cfg));
    }
    return out;
}

}  // namespace deal
