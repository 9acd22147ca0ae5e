// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deal/bench.hpp"
#include "deal/checkpoint.hpp"
#include "deal/config.hpp"
#include "deal/rng.hpp"

namespace deal {

/// One fully resolved grid cell.
struct CellSpec {
    std::size_t index = 0;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<std::size_t> order;  // empty means identity
    double reg_a = 10.0;
    double reg_b = 2.0;
    std::size_t rank = 4;
    std::string strategy = "both";
};

/// Expands the grids in deterministic order, dropping a < b cells with a log
/// line. An empty expansion is a configuration error.
inline std::vector<CellSpec> expand_grid(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    std::vector<CellSpec> cells;
    std::vector<std::vector<std::size_t>> orders = cfg.orders;
    if (orders.empty()) orders.push_back({});
    std::size_t index = 0;
    for (const std::string& method : cfg.methods)
        for (std::uint64_t seed : cfg.seeds)
            for (std::size_t o = 0; o < orders.size(); ++o)
                for (double a : cfg.a_values)
                    for (double b : cfg.b_values) {
                        if (a < b) {
                            if (log)
                                *log << "skipping cell (a=" << a << ", b=" << b << "): violates a >= b\n";
                            continue;
                        }
                        for (std::size_t rank : cfg.rank_values)
                            for (const std::string& strategy : cfg.strategies)
                                cells.push_back({index++, method, seed, orders[o], a, b, rank, strategy});
                    }
    if (cells.empty()) throw ConfigError("a_values/b_values: entire grid violates a >= b");
    return cells;
}

inline UpdateStrategy parse_strategy(const std::string& s) {
    if (s == "a_only") return UpdateStrategy::a_only;
    if (s == "b_only") return UpdateStrategy::b_only;
    if (s == "both") return UpdateStrategy::both;
    throw ConfigError("strategies: unknown value " + s);
}

namespace detail {

inline nlohmann::json cell_echo(const ExperimentConfig& cfg, const CellSpec& cell) {
    nlohmann::json echo;
    echo["run_name"] = cfg.run_name;
    echo["tasks"] = cfg.sequence.task_count;
    echo["input_dim"] = cfg.sequence.input_dim;
    echo["output_dim"] = cfg.sequence.output_dim;
    echo["classes_per_task"] = cfg.sequence.classes_per_task;
    echo["train_samples"] = cfg.sequence.train_samples;
    echo["test_samples"] = cfg.sequence.test_samples;
    echo["similarity"] = cfg.sequence.similarity;
    echo["label_noise_std"] = cfg.sequence.label_noise_std;
    echo["method"] = cell.method;
    echo["seed"] = cell.seed;
    echo["order"] = cell.order;
    echo["a"] = cell.reg_a;
    echo["b"] = cell.reg_b;
    echo["rank"] = cell.rank;
    echo["strategy"] = cell.strategy;
    echo["lambda1"] = cfg.train.lambda1;
    echo["lambda2"] = cfg.train.lambda2;
    echo["learning_rate"] = cfg.train.learning_rate;
    echo["epochs"] = cfg.train.epochs;
    echo["batch_size"] = cfg.train.batch_size;
    echo["optimizer"] = cfg.train.optimizer == OptimizerKind::adam ? "adam" : "sgd";
    echo["iterate_base"] = cfg.train.iterate_base;
    echo["retention_layers"] = cfg.model.retention_layers;
    echo["kernels"] = cfg.model.kernels;
    echo["updater_depth"] = cfg.model.updater_depth;
    echo["pretrained_backbone"] = cfg.pretrained_backbone;
    echo["emit_rouge"] = cfg.emit_rouge;
    return echo;
}

}  // namespace detail

/// Runs one cell and assembles its result record. Everything except
/// wall_time is a deterministic function of the cell configuration.
inline nlohmann::json run_cell(const ExperimentConfig& cfg, const CellSpec& cell,
                               RunReport* report_out = nullptr) {
    SequenceSpec spec = cfg.sequence;
    spec.seed = cell.seed;
    spec.order = cell.order;

    TrainConfig train = cfg.train;
    train.seed = cell.seed;
    train.reg_a = cell.reg_a;
    train.reg_b = cell.reg_b;
    train.strategy = parse_strategy(cell.strategy);

    BenchOptions options;
    options.rank = cell.rank;
    options.model = cfg.model;
    options.emit_rouge = cfg.emit_rouge;
    options.pretrained_backbone = cfg.pretrained_backbone;

    RunReport report = run_continual(parse_method(cell.method), spec, options, train);

    nlohmann::json echo = detail::cell_echo(cfg, cell);
    nlohmann::json record;
    record["run"] = cfg.run_name;
    record["cell"] = cell.index;
    record["method"] = cell.method;
    record["seed"] = cell.seed;
    record["order"] = report.order;
    record["a"] = cell.reg_a;
    record["b"] = cell.reg_b;
    record["rank"] = cell.rank;
    record["strategy"] = cell.strategy;
    record["aa"] = report.average_accuracy;
    if (report.rouge1) record["rouge1"] = *report.rouge1;
    else record["rouge1"] = nullptr;
    record["accuracy_matrix"] = report.accuracy_after;
    record["loss_curves"] = report.loss_curves;
    record["config"] = echo;
    std::string canonical = echo.dump();
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical.data(), canonical.size());
    record["config_hash"] = hash.str();
    record["wall_time"] = report.wall_seconds;
    if (report_out) *report_out = std::move(report);
    return record;
}

/// Plain-text mean-AA table grouped by (method, a, b, rank, strategy).
inline std::string summarize_records(const std::vector<nlohmann::json>& records) {
    struct Agg {
        double aa_sum = 0.0;
        double rouge_sum = 0.0;
        std::size_t rouge_count = 0;
        std::size_t count = 0;
    };
    std::map<std::string, Agg> groups;
    for (const auto& record : records) {
        std::ostringstream key;
        key << std::left << std::setw(10) << record["method"].get<std::string>() << " a=" << record["a"].get<double>()
            << " b=" << record["b"].get<double>() << " rank=" << record["rank"].get<std::size_t>() << " "
            << record["strategy"].get<std::string>();
        Agg& agg = groups[key.str()];
        agg.aa_sum += record["aa"].get<double>();
        if (!record["rouge1"].is_null()) {
            agg.rouge_sum += record["rouge1"].get<double>();
            ++agg.rouge_count;
        }
        ++agg.count;
    }
    std::ostringstream out;
    out << "group                                   cells  mean_aa";
    bool any_rouge = false;
    for (const auto& [key, agg] : groups) any_rouge = any_rouge || agg.rouge_count > 0;
    if (any_rouge) out << "  mean_r1";
    out << "\n";
    for (const auto& [key, agg] : groups) {
        out << std::left << std::setw(40) << key << std::setw(7) << agg.count << std::fixed << std::setprecision(2)
            << agg.aa_sum / static_cast<double>(agg.count);
        if (any_rouge) {
            out << "  ";
            if (agg.rouge_count > 0)
                out << std::fixed << std::setprecision(2) << agg.rouge_sum / static_cast<double>(agg.rouge_count);
            else
                out << "-";
        }
        out << "\n";
    }
    return out.str();
}

struct ExperimentResult {
    std::filesystem::path results_path;
    std::filesystem::path summary_path;
    std::size_t cell_count = 0;
};

/// Executes the whole grid. Cells run independently (optionally jobs-wide);
/// records land in results.jsonl in cell order, each cell's final adapter in
/// checkpoints/. DEAL_OUT_DIR overrides the configured output directory.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    std::filesystem::path out_dir = cfg.out_dir;
    if (const char* env = std::getenv("DEAL_OUT_DIR"); env && *env) out_dir = env;
    out_dir /= cfg.run_name;
    std::filesystem::create_directories(out_dir / "checkpoints");

    std::vector<CellSpec> cells = expand_grid(cfg, &log);
    std::vector<nlohmann::json> records(cells.size());
    std::vector<RunReport> reports(cells.size());

    std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
    for (std::size_t start = 0; start < cells.size(); start += jobs) {
        std::size_t count = std::min(jobs, cells.size() - start);
        std::vector<std::future<nlohmann::json>> batch;
        for (std::size_t i = 0; i < count; ++i) {
            const CellSpec& cell = cells[start + i];
            batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                       [&cfg, &cell, &reports, idx = start + i] {
                                           try {
                                               return run_cell(cfg, cell, &reports[idx]);
                                           } catch (const std::exception& e) {
                                               throw Error("cell " + std::to_string(cell.index) + " (" + cell.method +
                                                           ", seed " + std::to_string(cell.seed) + "): " + e.what());
                                           }
                                       }));
        }
        for (std::size_t i = 0; i < count; ++i) {
            records[start + i] = batch[i].get();
            log << "cell " << cells[start + i].index << " (" << cells[start + i].method << ", seed "
                << cells[start + i].seed << ") aa=" << std::fixed << std::setprecision(2)
                << records[start + i]["aa"].get<double>() << "\n";
        }
    }

    std::ofstream results(out_dir / "results.jsonl", std::ios::trunc);
    if (!results) throw IoFailure("run_experiment: cannot write results.jsonl under " + out_dir.string());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        results << records[i].dump() << "\n";
        Checkpoint ckpt;
        ckpt.seed = cells[i].seed;
        ckpt.config_echo = records[i]["config"].dump();
        SequenceSpec spec = cfg.sequence;
        spec.seed = cells[i].seed;
        BenchOptions options;
        options.pretrained_backbone = cfg.pretrained_backbone;
        ckpt.add("backbone.W", bench_backbone(spec, options, cells[i].seed).weight());
        for (std::size_t a = 0; a < reports[i].final_adapters.size(); ++a) {
            std::string prefix = "adapter" + std::to_string(a);
            ckpt.add(prefix + ".A", reports[i].final_adapters[a].A);
            ckpt.add(prefix + ".B", reports[i].final_adapters[a].B);
        }
        std::ostringstream name;
        name << "cell_" << std::setw(4) << std::setfill('0') << cells[i].index << ".ckpt";
        save_checkpoint(out_dir / "checkpoints" / name.str(), ckpt);
    }
    results.close();

    std::ofstream summary(out_dir / "summary.txt", std::ios::trunc);
    summary << summarize_records(records);
    summary.close();
    log << summarize_records(records);
    return {out_dir / "results.jsonl", out_dir / "summary.txt", cells.size()};
}

/// Dataset payloads in the checkpoint format, for exact reruns.
inline Checkpoint dataset_checkpoint(const TaskDataset& task) {
    Checkpoint ckpt;
    ckpt.seed = task.generator_seed;
    ckpt.config_echo = task.name + "/" + std::to_string(task.class_count);
    ckpt.add("Q_train", task.Q_train);
    ckpt.add("G_train", task.G_train);
    ckpt.add("Q_test", task.Q_test);
    ckpt.add("G_test", task.G_test);
    ckpt.add("hidden_map", task.hidden_map);
    return ckpt;
}

inline TaskDataset dataset_from_checkpoint(const Checkpoint& ckpt) {
    TaskDataset task;
    std::size_t slash = ckpt.config_echo.find('/');
    if (slash == std::string::npos) throw ChecksumFailure("dataset checkpoint: malformed echo");
    task.name = ckpt.config_echo.substr(0, slash);
    task.class_count = std::stoull(ckpt.config_echo.substr(slash + 1));
    task.generator_seed = ckpt.seed;
    task.Q_train = ckpt.at("Q_train");
    task.G_train = ckpt.at("G_train");
    task.Q_test = ckpt.at("Q_test");
    task.G_test = ckpt.at("G_test");
    task.hidden_map = ckpt.at("hidden_map");
    return task;
}

/// Reads a results.jsonl back and renders the summary table.
inline std::string render_report(const std::filesystem::path& results_path) {
    std::ifstream file(results_path);
    if (!file) throw IoFailure("report: cannot open " + results_path.string());
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded())
            throw ConfigError("report: line " + std::to_string(line_no) + " is not valid JSON");
        records.push_back(std::move(record));
    }
    if (records.empty()) throw ConfigError("report: no records in " + results_path.string());
    return summarize_records(records);
}

}  // namespace deal
