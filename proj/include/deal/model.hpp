// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "deal/errors.hpp"
#include "deal/lora.hpp"
#include "deal/matrix.hpp"
#include "deal/retention.hpp"
#include "deal/tape.hpp"
#include "deal/updater.hpp"

namespace deal {

/// Which adapter factors the retention/updater pipeline rewrites; the other
/// side passes through unchanged.
enum class UpdateStrategy { a_only, b_only, both };

inline std::string to_string(UpdateStrategy s) {
    switch (s) {
        case UpdateStrategy::a_only: return "a_only";
        case UpdateStrategy::b_only: return "b_only";
        default: return "both";
    }
}

struct ModelConfig {
    std::size_t retention_layers = 1;  // K
    std::size_t kernels = 0;           // J; 0 means rank
    std::size_t updater_depth = 1;
    double base_width = 0.25;
    UpdateStrategy strategy = UpdateStrategy::both;
};

/// Frozen backbone plus frozen base adapter, with per-side retention banks
/// and updater nets producing the effective factors A' and B'.
struct DealModel {
    FrozenBackbone backbone;
    LoraAdapter base;
    ModelConfig config;
    WaveletBank retention_a, retention_b;
    UpdaterNet updater_a, updater_b;

    bool updates_a() const { return config.strategy != UpdateStrategy::b_only; }
    bool updates_b() const { return config.strategy != UpdateStrategy::a_only; }
};

inline DealModel make_deal_model(FrozenBackbone backbone, LoraAdapter base, const ModelConfig& config) {
    const std::size_t m = base.A.rows();
    const std::size_t n = base.B.rows();
    const std::size_t r = base.rank;
    if (backbone.output_dim() != m || backbone.input_dim() != n)
        throw ShapeMismatch("make_deal_model: adapter does not match backbone");
    DealModel model{std::move(backbone), std::move(base), config, {}, {}, {}, {}};
    std::size_t kernels = config.kernels == 0 ? r : config.kernels;
    if (model.updates_a()) {
        model.retention_a = make_wavelet_bank(m, r, config.retention_layers, kernels, config.base_width);
        model.updater_a = make_updater(m, config.updater_depth);
    }
    if (model.updates_b()) {
        model.retention_b = make_wavelet_bank(n, r, config.retention_layers, kernels, config.base_width);
        model.updater_b = make_updater(n, config.updater_depth);
    }
    return model;
}

/// The trainable parameters: retention banks (theta_1) then updater nets
/// (theta_2), sides A before B, in canonical collect order.
inline ParamSet model_params(const DealModel& model) {
    ParamSet params;
    if (model.updates_a()) collect_params(model.retention_a, "retention_a", params);
    if (model.updates_b()) collect_params(model.retention_b, "retention_b", params);
    if (model.updates_a()) collect_params(model.updater_a, "updater_a", params);
    if (model.updates_b()) collect_params(model.updater_b, "updater_b", params);
    return params;
}

inline void apply_params(DealModel& model, const ParamSet& params) {
    std::size_t cursor = 0;
    if (model.updates_a()) cursor = assign_params(model.retention_a, params, cursor);
    if (model.updates_b()) cursor = assign_params(model.retention_b, params, cursor);
    if (model.updates_a()) cursor = assign_params(model.updater_a, params, cursor);
    if (model.updates_b()) cursor = assign_params(model.updater_b, params, cursor);
    if (cursor != params.size()) throw ShapeMismatch("apply_params: parameter count mismatch");
}

/// Plain evaluation of the effective factors (A', B'). Passthrough sides
/// return the base factor unchanged.
inline std::pair<DenseMatrix, DenseMatrix> pipeline_factors(const DealModel& model) {
    DenseMatrix a_prime = model.updates_a()
                              ? updater_forward(retention_forward(model.base.A, model.retention_a), model.updater_a)
                              : model.base.A;
    DenseMatrix b_prime = model.updates_b()
                              ? updater_forward(retention_forward(model.base.B, model.retention_b), model.updater_b)
                              : model.base.B;
    return {std::move(a_prime), std::move(b_prime)};
}

/// Extracts (A', B') and wraps them as a plain adapter whose forward cost
/// equals any other adapter of the same rank.
inline LoraAdapter materialize_model(const DealModel& model) {
    auto [a_prime, b_prime] = pipeline_factors(model);
    return materialize(std::move(a_prime), std::move(b_prime));
}

/// Tape node ids of the effective factors, built from param leaves laid out
/// in model_params order. base_a/base_b are the (constant) factor leaves.
struct PipelineNodes {
    int a_prime;
    int b_prime;
};

inline PipelineNodes build_pipeline(Tape& tape, const DealModel& model, const std::vector<int>& param_leaves,
                                    int base_a, int base_b) {
    std::size_t cursor = 0;
    int a_after_retention = base_a;
    int b_after_retention = base_b;
    if (model.updates_a())
        std::tie(a_after_retention, cursor) = build_retention(tape, base_a, model.retention_a, param_leaves, cursor);
    if (model.updates_b())
        std::tie(b_after_retention, cursor) = build_retention(tape, base_b, model.retention_b, param_leaves, cursor);
    PipelineNodes nodes{a_after_retention, b_after_retention};
    if (model.updates_a()) std::tie(nodes.a_prime, cursor) = build_updater(tape, a_after_retention, model.updater_a, param_leaves, cursor);
    if (model.updates_b()) std::tie(nodes.b_prime, cursor) = build_updater(tape, b_after_retention, model.updater_b, param_leaves, cursor);
    return nodes;
}

}  // namespace deal
