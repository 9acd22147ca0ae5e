// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deal/bench.hpp"
#include "deal/errors.hpp"
#include "deal/model.hpp"
#include "deal/tasks.hpp"
#include "deal/training.hpp"

namespace deal {

/// Full experiment description: the task sequence recipe, the method list,
/// the ablation grids, and the training knobs shared by every cell.
struct ExperimentConfig {
    std::string run_name = "run";
    std::string out_dir = "runs";
    SequenceSpec sequence;
    std::vector<std::string> methods{"deal", "seq_lora", "per_task"};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<double> a_values{10.0};
    std::vector<double> b_values{2.0};
    std::vector<std::size_t> rank_values{4};
    std::vector<std::string> strategies{"both"};
    std::vector<std::vector<std::size_t>> orders;  // empty: identity order only
    TrainConfig train;
    ModelConfig model;
    bool emit_rouge = false;
    bool pretrained_backbone = true;
    std::size_t jobs = 1;

    void validate() const {
        sequence.validate();
        if (methods.empty()) throw ConfigError("methods: at least one method required");
        for (const std::string& m : methods) parse_method(m);
        if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
        for (double a : a_values)
            if (a < 1.0) throw ConfigError("a_values: regularization orders must be >= 1");
        for (double b : b_values)
            if (b < 1.0) throw ConfigError("b_values: regularization orders must be >= 1");
        bool any_valid = false;
        for (double a : a_values)
            for (double b : b_values)
                if (a >= b) any_valid = true;
        if (!any_valid) throw ConfigError("a_values/b_values: entire grid violates a >= b");
        std::size_t cap = std::min(sequence.output_dim, sequence.input_dim) / 2;
        for (std::size_t r : rank_values)
            if (r < 1 || r > cap)
                throw ConfigError("rank_values: rank " + std::to_string(r) + " violates r <= min(m, n)/2 = " +
                                  std::to_string(cap));
        for (const std::string& s : strategies)
            if (s != "a_only" && s != "b_only" && s != "both") throw ConfigError("strategies: unknown value " + s);
        for (const auto& order : orders) {
            if (order.size() != sequence.task_count) throw ConfigError("order: length must equal tasks");
            std::vector<bool> seen(sequence.task_count, false);
            for (std::size_t idx : order) {
                if (idx >= sequence.task_count || seen[idx])
                    throw ConfigError("order: not a permutation of 0..tasks-1");
                seen[idx] = true;
            }
        }
        if (train.epochs < 1) throw ConfigError("epochs: must be >= 1");
        train.validate();
        if (jobs < 1) throw ConfigError("jobs: must be >= 1");
    }
};

namespace detail {

struct ConfigLine {
    std::string key;
    std::string value;
};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<ConfigLine> tokenize_config(const std::string& text) {
    std::vector<ConfigLine> lines;
    std::istringstream stream(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        if (std::size_t hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        std::string line = trim(raw);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        ConfigLine entry{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (entry.key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        lines.push_back(std::move(entry));
    }
    return lines;
}

inline std::vector<std::string> split_list(const std::string& key, const std::string& value) {
    if (value.size() < 2 || value.front() != '[' || value.back() != ']')
        throw ConfigError(key + ": expected a [..] list");
    std::vector<std::string> items;
    std::string body = value.substr(1, value.size() - 2);
    std::string token;
    for (char c : body) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!token.empty()) items.push_back(std::exchange(token, ""));
        } else {
            token.push_back(c);
        }
    }
    if (!token.empty()) items.push_back(token);
    return items;
}

inline double parse_real(const std::string& key, const std::string& token) {
    try {
        std::size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + token + "'");
    }
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& token) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw ConfigError(key + ": expected a nonnegative integer, got '" + token + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& token) {
    if (token == "true") return true;
    if (token == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + token + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : detail::tokenize_config(text)) {
        if (key == "run_name") cfg.run_name = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "tasks") cfg.sequence.task_count = detail::parse_unsigned(key, value);
        else if (key == "input_dim") cfg.sequence.input_dim = detail::parse_unsigned(key, value);
        else if (key == "output_dim") cfg.sequence.output_dim = detail::parse_unsigned(key, value);
        else if (key == "classes_per_task") cfg.sequence.classes_per_task = detail::parse_unsigned(key, value);
        else if (key == "train_samples") cfg.sequence.train_samples = detail::parse_unsigned(key, value);
        else if (key == "test_samples") cfg.sequence.test_samples = detail::parse_unsigned(key, value);
        else if (key == "similarity") cfg.sequence.similarity = detail::parse_real(key, value);
        else if (key == "label_noise_std") cfg.sequence.label_noise_std = detail::parse_real(key, value);
        else if (key == "methods") {
            cfg.methods.clear();
            for (const auto& item : detail::split_list(key, value)) cfg.methods.push_back(item);
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& item : detail::split_list(key, value)) cfg.seeds.push_back(detail::parse_unsigned(key, item));
        } else if (key == "a_values") {
            cfg.a_values.clear();
            for (const auto& item : detail::split_list(key, value)) cfg.a_values.push_back(detail::parse_real(key, item));
        } else if (key == "b_values") {
            cfg.b_values.clear();
            for (const auto& item : detail::split_list(key, value)) cfg.b_values.push_back(detail::parse_real(key, item));
        } else if (key == "rank_values") {
            cfg.rank_values.clear();
            for (const auto& item : detail::split_list(key, value))
                cfg.rank_values.push_back(detail::parse_unsigned(key, item));
        } else if (key == "strategies") {
            cfg.strategies.clear();
            for (const auto& item : detail::split_list(key, value)) cfg.strategies.push_back(item);
        } else if (key == "order") {
            std::vector<std::size_t> order;
            for (const auto& item : detail::split_list(key, value)) order.push_back(detail::parse_unsigned(key, item));
            cfg.orders.push_back(std::move(order));
        } else if (key == "lambda1") cfg.train.lambda1 = detail::parse_real(key, value);
        else if (key == "lambda2") cfg.train.lambda2 = detail::parse_real(key, value);
        else if (key == "learning_rate") cfg.train.learning_rate = detail::parse_real(key, value);
        else if (key == "epochs") cfg.train.epochs = detail::parse_unsigned(key, value);
        else if (key == "batch_size") cfg.train.batch_size = detail::parse_unsigned(key, value);
        else if (key == "optimizer") {
            if (value == "sgd") cfg.train.optimizer = OptimizerKind::sgd;
            else if (value == "adam") cfg.train.optimizer = OptimizerKind::adam;
            else throw ConfigError("optimizer: expected sgd or adam, got '" + value + "'");
        } else if (key == "iterate_base") cfg.train.iterate_base = detail::parse_bool(key, value);
        else if (key == "retention_layers") cfg.model.retention_layers = detail::parse_unsigned(key, value);
        else if (key == "kernels") cfg.model.kernels = detail::parse_unsigned(key, value);
        else if (key == "updater_depth") cfg.model.updater_depth = detail::parse_unsigned(key, value);
        else if (key == "base_width") cfg.model.base_width = detail::parse_real(key, value);
        else if (key == "emit_rouge") cfg.emit_rouge = detail::parse_bool(key, value);
        else if (key == "pretrained_backbone") cfg.pretrained_backbone = detail::parse_bool(key, value);
        else if (key == "jobs") cfg.jobs = detail::parse_unsigned(key, value);
        else throw ConfigError("unknown key: " + key);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw IoFailure("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

}  // namespace deal
