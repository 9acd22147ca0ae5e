// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deal/errors.hpp"
#include "deal/lora.hpp"
#include "deal/matrix.hpp"
#include "deal/model.hpp"
#include "deal/rng.hpp"
#include "deal/tasks.hpp"
#include "deal/training.hpp"

namespace deal {

enum class Method { deal, seq_lora, per_task };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::deal: return "deal";
        case Method::seq_lora: return "seq_lora";
        default: return "per_task";
    }
}

inline Method parse_method(const std::string& name) {
    if (name == "deal") return Method::deal;
    if (name == "seq_lora") return Method::seq_lora;
    if (name == "per_task") return Method::per_task;
    throw ConfigError("unknown method: " + name);
}

/// Result of one continual run. accuracy_after[t][i] is the test accuracy (in
/// percent) on task i measured after finishing task t, for i <= t.
struct RunReport {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<std::size_t> order;
    std::vector<std::vector<double>> accuracy_after;
    double average_accuracy = 0.0;
    std::optional<double> rouge1;
    std::vector<std::vector<double>> loss_curves;  // one per task
    std::vector<LoraAdapter> final_adapters;       // one, or one per task for per_task
    double wall_seconds = 0.0;
};

/// Mean of the final column a[.][T]; requires it to be fully populated.
inline double average_accuracy(const std::vector<std::vector<double>>& accuracy_after, std::size_t task_count) {
    if (task_count < 1 || accuracy_after.size() < task_count) throw IncompleteMatrix("average_accuracy: missing columns");
    const std::vector<double>& final_col = accuracy_after[task_count - 1];
    if (final_col.size() != task_count) throw IncompleteMatrix("average_accuracy: final column incomplete");
    double total = 0.0;
    for (double a : final_col) total += a;
    return total / static_cast<double>(task_count);
}

/// Unigram F1 with multiset (clipped-count) intersection; 0 when either list
/// is empty.
inline double rouge1(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
    if (pred.empty() || ref.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& tok : ref) ++counts[tok];
    std::size_t overlap = 0;
    for (const auto& tok : pred) {
        auto it = counts.find(tok);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

/// Argmax over the task's label rows, ties toward the lowest class index.
inline std::size_t decode_class(const DenseMatrix& logits, std::size_t column, std::size_t class_count) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < class_count; ++c)
        if (logits(c, column) > logits(best, column)) best = c;
    return best;
}

inline double accuracy_percent(const FrozenBackbone& backbone, const LoraAdapter& adapter, const TaskDataset& task) {
    DenseMatrix pred = forward(backbone, adapter, task.Q_test);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < task.Q_test.cols(); ++s) {
        std::size_t truth = decode_class(task.G_test, s, task.class_count);
        if (decode_class(pred, s, task.class_count) == truth) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(task.Q_test.cols());
}

/// Single-token label emission: rouge against the reference label token.
inline double rouge1_percentish(const FrozenBackbone& backbone, const LoraAdapter& adapter, const TaskDataset& task) {
    DenseMatrix pred = forward(backbone, adapter, task.Q_test);
    double total = 0.0;
    for (std::size_t s = 0; s < task.Q_test.cols(); ++s) {
        std::vector<std::string> out{"label" + std::to_string(decode_class(pred, s, task.class_count))};
        std::vector<std::string> ref{"label" + std::to_string(decode_class(task.G_test, s, task.class_count))};
        total += rouge1(out, ref);
    }
    return 100.0 * total / static_cast<double>(task.Q_test.cols());
}

struct BenchOptions {
    std::size_t rank = 4;
    ModelConfig model;
    bool emit_rouge = false;
    // Pretrained mode seeds the backbone's class rows with the task family's
    // root hidden map, mimicking a capable base model that adapters correct.
    bool pretrained_backbone = true;
    double backbone_std = 0.01;  // random mode only
};

/// The frozen backbone shared by every method of a run.
inline FrozenBackbone bench_backbone(const SequenceSpec& spec, const BenchOptions& options, std::uint64_t seed) {
    if (options.pretrained_backbone) {
        DenseMatrix root = detail::hidden_map_for(spec, 0, Rng(spec.seed));
        DenseMatrix w(spec.output_dim, spec.input_dim);
        for (std::size_t c = 0; c < spec.classes_per_task; ++c)
            for (std::size_t i = 0; i < spec.input_dim; ++i) w(c, i) = root(c, i);
        return FrozenBackbone(std::move(w));
    }
    Rng stream = Rng(seed).split(0xbac0ull);
    return FrozenBackbone(gaussian_matrix(spec.output_dim, spec.input_dim, 0.0, options.backbone_std, stream));
}

/// Instrumentation for the data-isolation contract: the runner never holds
/// more than one task's training split at a time.
struct ProtocolAudit {
    std::size_t max_live_train_sets = 0;
};

/// Sequential continual-learning protocol: train on tasks in order, evaluate
/// on all tasks seen so far after each one, never revisit earlier training
/// data. Tasks are generated on demand and their training splits dropped as
/// soon as the task is finished.
inline RunReport run_continual(Method method, const SequenceSpec& spec, const BenchOptions& options,
                               const TrainConfig& cfg, ProtocolAudit* audit = nullptr) {
    spec.validate();
    cfg.validate();
    auto started = std::chrono::steady_clock::now();

    std::vector<std::size_t> order = spec.order;
    if (order.empty()) {
        order.resize(spec.task_count);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    }
    if (order.size() != spec.task_count) throw InvalidPermutation("run_continual: order length != task_count");
    std::vector<bool> seen(spec.task_count, false);
    for (std::size_t idx : order) {
        if (idx >= spec.task_count || seen[idx]) throw InvalidPermutation("run_continual: order is not a permutation");
        seen[idx] = true;
    }

    FrozenBackbone backbone = bench_backbone(spec, options, cfg.seed);

    RunReport report;
    report.method = to_string(method);
    report.seed = cfg.seed;
    report.order = order;

    std::vector<TaskDataset> test_sets;  // only test splits are retained
    std::vector<LoraAdapter> per_task_adapters;
    LoraAdapter current = init_adapter_for_task(spec.output_dim, spec.input_dim, options.rank, cfg.seed, 0);

    auto record_live_sets = [&](const TaskDataset& active) {
        if (!audit) return;
        std::size_t live = active.Q_train.empty() ? 0 : 1;
        for (const TaskDataset& seen : test_sets)
            if (!seen.Q_train.empty()) ++live;
        audit->max_live_train_sets = std::max(audit->max_live_train_sets, live);
    };

    for (std::size_t t = 0; t < spec.task_count; ++t) {
        TaskDataset task = gen_task(spec, order[t], Rng(spec.seed));
        record_live_sets(task);

        switch (method) {
            case Method::seq_lora: {
                TrainedAdapter trained = train_seq_lora(backbone, std::move(current), task, cfg);
                current = std::move(trained.adapter);
                report.loss_curves.push_back(std::move(trained.history));
                break;
            }
            case Method::per_task: {
                // keyed by task identity so isolation is order-independent
                LoraAdapter fresh =
                    init_adapter_for_task(spec.output_dim, spec.input_dim, options.rank, cfg.seed, order[t]);
                TrainedAdapter trained = train_seq_lora(backbone, std::move(fresh), task, cfg);
                per_task_adapters.push_back(std::move(trained.adapter));
                report.loss_curves.push_back(std::move(trained.history));
                break;
            }
            case Method::deal: {
                if (t == 0) {
                    // nothing learned yet to retain: the first task fits the base adapter
                    TrainedAdapter trained = train_seq_lora(backbone, std::move(current), task, cfg);
                    current = std::move(trained.adapter);
                    report.loss_curves.push_back(std::move(trained.history));
                } else {
                    ModelConfig mc = options.model;
                    mc.strategy = cfg.strategy;
                    DealModel model = make_deal_model(backbone, std::move(current), mc);
                    TrainedDeal trained = train_deal(std::move(model), task, cfg);
                    current = materialize_model(trained.model);
                    report.loss_curves.push_back(std::move(trained.history));
                }
                break;
            }
        }

        // retain only the test split before evaluation
        record_live_sets(task);
        task.Q_train = DenseMatrix();
        task.G_train = DenseMatrix();
        test_sets.push_back(std::move(task));

        std::vector<double> column;
        for (std::size_t i = 0; i <= t; ++i) {
            const LoraAdapter& adapter = method == Method::per_task ? per_task_adapters[i] : current;
            column.push_back(accuracy_percent(backbone, adapter, test_sets[i]));
        }
        report.accuracy_after.push_back(std::move(column));
    }

    report.average_accuracy = average_accuracy(report.accuracy_after, spec.task_count);
    if (options.emit_rouge) {
        double total = 0.0;
        for (std::size_t i = 0; i < spec.task_count; ++i) {
            const LoraAdapter& adapter = method == Method::per_task ? per_task_adapters[i] : current;
            total += rouge1_percentish(backbone, adapter, test_sets[i]);
        }
        report.rouge1 = total / static_cast<double>(spec.task_count);
    }
    if (method == Method::per_task)
        report.final_adapters = std::move(per_task_adapters);
    else
        report.final_adapters.push_back(std::move(current));
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace deal
