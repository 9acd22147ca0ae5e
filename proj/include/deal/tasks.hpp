// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"
#include "deal/rng.hpp"

namespace deal {

/// One classification task: inputs as columns, one-hot targets as columns.
struct TaskDataset {
    std::string name;
    DenseMatrix Q_train, G_train;
    DenseMatrix Q_test, G_test;
    std::size_t class_count = 0;
    std::uint64_t generator_seed = 0;
    DenseMatrix hidden_map;  // class_count x n map that generated the labels
};

/// Recipe for a task sequence. Consecutive hidden maps share a `similarity`
/// fraction of their structure; `order` (empty = identity) permutes the
/// generated tasks.
struct SequenceSpec {
    std::size_t task_count = 3;
    std::size_t input_dim = 32;
    std::size_t output_dim = 8;
    std::size_t classes_per_task = 4;
    std::size_t train_samples = 512;
    std::size_t test_samples = 256;
    double similarity = 0.5;
    double label_noise_std = 0.1;
    std::uint64_t seed = 0;
    std::vector<std::size_t> order;

    void validate() const {
        if (task_count < 1) throw ConfigError("SequenceSpec: task_count must be >= 1");
        if (classes_per_task < 2) throw ConfigError("SequenceSpec: classes_per_task must be >= 2");
        if (classes_per_task > output_dim) throw ConfigError("SequenceSpec: classes_per_task cannot exceed output_dim");
        if (similarity < 0.0 || similarity > 1.0) throw ConfigError("SequenceSpec: similarity must lie in [0, 1]");
        if (label_noise_std < 0.0) throw ConfigError("SequenceSpec: label_noise_std must be >= 0");
        if (train_samples < 1 || test_samples < 1) throw ConfigError("SequenceSpec: sample counts must be >= 1");
    }
};

namespace detail {

// Hidden map chain: T_0 fresh, T_t = similarity * T_{t-1} + (1 - similarity) * fresh,
// rows re-orthonormalized after each step. Orthonormal rows make the class
// logits exactly iid standard normal, so every class is equally likely.
inline DenseMatrix hidden_map_for(const SequenceSpec& spec, std::size_t task_index, const Rng& root) {
    DenseMatrix map;
    for (std::size_t t = 0; t <= task_index; ++t) {
        if (t > 0 && spec.similarity == 1.0) continue;  // identical label function, bitwise
        Rng stream = root.split(0x7a51ull + t);
        DenseMatrix fresh = gaussian_matrix(spec.classes_per_task, spec.input_dim, 0.0, 1.0, stream);
        if (t == 0) {
            map = fresh;
        } else {
            DenseMatrix blended(spec.classes_per_task, spec.input_dim);
            for (std::size_t i = 0; i < blended.size(); ++i)
                blended.data()[i] = spec.similarity * map.data()[i] + (1.0 - spec.similarity) * fresh.data()[i];
            map = std::move(blended);
        }
        DenseMatrix cols = transpose(map);
        orthonormalize_columns(cols);
        map = transpose(cols);
    }
    return map;
}

// Balanced split: sample index s targets class s % class_count and inputs are
// rejection-sampled until the noisy argmax label matches. The stream is keyed
// by the hidden map's content, so identical label functions yield identical
// datasets.
inline void sample_split(const SequenceSpec& spec, const DenseMatrix& map, std::uint64_t split_tag,
                         std::size_t samples, DenseMatrix& q_out, DenseMatrix& g_out) {
    Rng stream = Rng(content_hash(map, fnv1a64(&spec.seed, sizeof(spec.seed)))).split(split_tag);
    const std::size_t n = spec.input_dim;
    const std::size_t cc = spec.classes_per_task;
    q_out = DenseMatrix(n, samples);
    g_out = DenseMatrix(spec.output_dim, samples);
    std::vector<double> x(n), logits(cc);
    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t target = s % cc;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000) throw NonConvergence("sample_split: rejection sampling stalled");
            for (std::size_t i = 0; i < n; ++i) x[i] = stream.normal();
            std::size_t argmax = 0;
            for (std::size_t c = 0; c < cc; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += map(c, i) * x[i];
                logits[c] = acc + spec.label_noise_std * stream.normal();
                if (logits[c] > logits[argmax]) argmax = c;
            }
            if (argmax == target) break;
        }
        for (std::size_t i = 0; i < n; ++i) q_out(i, s) = x[i];
        g_out(target, s) = 1.0;
    }
}

}  // namespace detail

/// Generates one task of the sequence. The rng argument carries the base
/// seed; pass Rng(spec.seed) for the canonical datasets.
inline TaskDataset gen_task(const SequenceSpec& spec, std::size_t task_index, Rng root) {
    spec.validate();
    if (task_index >= spec.task_count) throw ConfigError("gen_task: task index out of range");
    TaskDataset task;
    task.name = "task" + std::to_string(task_index);
    task.class_count = spec.classes_per_task;
    task.generator_seed = root.seed();
    task.hidden_map = detail::hidden_map_for(spec, task_index, root);
    detail::sample_split(spec, task.hidden_map, 0x7261ull, spec.train_samples, task.Q_train, task.G_train);
    detail::sample_split(spec, task.hidden_map, 0x7385ull, spec.test_samples, task.Q_test, task.G_test);
    return task;
}

/// Generates all tasks and applies the order permutation.
inline std::vector<TaskDataset> make_sequence(const SequenceSpec& spec) {
    spec.validate();
    std::vector<std::size_t> order = spec.order;
    if (order.empty()) {
        order.resize(spec.task_count);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    }
    if (order.size() != spec.task_count) throw InvalidPermutation("make_sequence: order length != task_count");
    std::vector<bool> seen(spec.task_count, false);
    for (std::size_t idx : order) {
        if (idx >= spec.task_count || seen[idx]) throw InvalidPermutation("make_sequence: order is not a permutation");
        seen[idx] = true;
    }
    std::vector<TaskDataset> tasks;
    tasks.reserve(spec.task_count);
    for (std::size_t position = 0; position < spec.task_count; ++position)
        tasks.push_back(gen_task(spec, order[position], Rng(spec.seed)));
    return tasks;
}

}  // namespace deal
