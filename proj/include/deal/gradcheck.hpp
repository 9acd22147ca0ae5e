// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deal/lora.hpp"
#include "deal/model.hpp"
#include "deal/rng.hpp"
#include "deal/tape.hpp"
#include "deal/training.hpp"

namespace deal {

/// One gradient-fidelity check of the full DEAL loss at a randomized
/// parameter point: reverse-mode against central finite differences.
struct GradCheckCase {
    std::size_t dim = 4;     // m = n
    std::size_t rank = 2;    // adapter rank
    std::size_t layers = 1;  // retention depth K
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    GradCheckCase config;
    double max_rel_error = 0.0;
    std::string worst_param;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::vector<GradCheckResult> cases;

    bool pass(double tolerance = 1e-4) const { return max_rel_error <= tolerance; }
};

namespace detail {

inline void jitter_params(ParamSet& params, Rng& rng, double std) {
    for (auto& e : params.entries)
        for (std::size_t k = 0; k < e.value.size(); ++k) e.value.data()[k] += std * rng.normal();
}

}  // namespace detail

inline GradCheckResult run_gradcheck_case(const GradCheckCase& cs, const GradOptions& options = {}) {
    Rng rng = Rng(cs.seed).split(0x6c4dull);
    const std::size_t m = cs.dim, n = cs.dim, r = cs.rank, batch = 4;

    FrozenBackbone backbone(gaussian_matrix(m, n, 0.0, 0.5, rng));
    LoraAdapter base = init_adapter(m, n, r, rng);
    base.B = gaussian_matrix(n, r, 0.0, 0.4, rng);
    ModelConfig mc;
    mc.retention_layers = cs.layers;
    DealModel model = make_deal_model(std::move(backbone), std::move(base), mc);

    ParamSet params = model_params(model);
    detail::jitter_params(params, rng, 0.2);  // probe away from the identity point
    apply_params(model, params);

    DenseMatrix q = gaussian_matrix(n, batch, 0.0, 1.0, rng);
    DenseMatrix g = gaussian_matrix(m, batch, 0.0, 1.0, rng);
    TrainConfig cfg;
    cfg.seed = cs.seed;

    LossBuilder builder = deal_loss_builder(model, q, g, cfg);
    ParamSet exact = grad_of(builder, params, options);
    ParamSet fd = finite_diff(builder, params, 1e-5);
    GradCompare cmp = compare_grads(exact, fd);
    return {cs, cmp.max_rel_error, cmp.worst_name};
}

/// The full fidelity suite: 5 seeds x factor sizes {4x2, 16x4, 32x8} x K in {1, 2}.
inline GradCheckReport run_gradcheck_suite(std::uint64_t base_seed, const GradOptions& options = {}) {
    GradCheckReport report;
    const std::vector<std::pair<std::size_t, std::size_t>> sizes{{4, 2}, {16, 4}, {32, 8}};
    for (std::uint64_t s = 0; s < 5; ++s) {
        for (auto [dim, rank] : sizes) {
            for (std::size_t layers : {1, 2}) {
                GradCheckCase cs{dim, rank, layers, base_seed + s};
                GradCheckResult result = run_gradcheck_case(cs, options);
                if (result.max_rel_error > report.max_rel_error) {
                    report.max_rel_error = result.max_rel_error;
                    report.worst_param = result.worst_param;
                }
                report.cases.push_back(std::move(result));
            }
        }
    }
    return report;
}

}  // namespace deal
