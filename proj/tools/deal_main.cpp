// SPDX-License-Identifier: Apache-2.0
//
// Command-line harness: grid experiments, the subspace-perturbation demo,
// the gradient-fidelity check, and result reporting.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deal/deal.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGradcheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

int cmd_run(const std::string& config_path, std::size_t jobs_override) {
    deal::ExperimentConfig cfg;
    try {
        cfg = deal::parse_config_file(config_path);
        if (jobs_override > 0) cfg.jobs = jobs_override;
        cfg.validate();
    } catch (const deal::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    try {
        deal::ExperimentResult result = deal::run_experiment(cfg, std::cout);
        std::cout << "wrote " << result.cell_count << " records to " << result.results_path.string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

int cmd_theorem1(std::size_t n_x, std::size_t r, std::size_t rank_x, const std::vector<double>& noise_levels,
                 std::size_t trials, std::uint64_t seed, const std::string& out_path) {
    if (rank_x < 1 || rank_x >= std::min(n_x, r)) {
        std::cerr << "invalid dims: need 1 <= rank_x < min(n_x, r)\n";
        return kExitConfigError;
    }
    for (double level : noise_levels) {
        if (level < 0.0) {
            std::cerr << "invalid noise level " << level << ": must be >= 0\n";
            return kExitConfigError;
        }
    }
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path, std::ios::trunc);
        if (!file) {
            std::cerr << "cannot open " << out_path << "\n";
            return kExitRuntimeError;
        }
        out = &file;
    }
    for (double level : noise_levels) {
        for (std::size_t trial = 0; trial < trials; ++trial) {
            deal::Rng rng(seed + trial);
            double angle = deal::theorem1_demo(n_x, r, rank_x, level, rng);
            nlohmann::json record{{"noise_std", level}, {"trial", trial}, {"angle", angle}};
            *out << record.dump() << "\n";
        }
    }
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt_adjoint) {
    deal::GradOptions options;
    if (corrupt_adjoint) options.tanh_adjoint_scale = 1.001;
    deal::GradCheckReport report = deal::run_gradcheck_suite(seed, options);
    std::printf("gradcheck: %zu cases, max relative error %.3e (worst: %s)\n", report.cases.size(),
                report.max_rel_error, report.worst_param.c_str());
    if (!report.pass()) {
        std::printf("gradcheck: FAILED tolerance 1e-4\n");
        return kExitGradcheckFailed;
    }
    std::printf("gradcheck: OK\n");
    return kExitOk;
}

int cmd_report(const std::string& results_path) {
    try {
        std::cout << deal::render_report(results_path);
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "report error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual low-rank fine-tuning experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::size_t jobs = 0;
    CLI::App* run = app.add_subcommand("run", "execute an experiment grid from a config file");
    run->add_option("config", config_path, "flat key-value config file")->required();
    run->add_option("--jobs", jobs, "worker count for independent cells");

    std::size_t n_x = 12, r = 8, rank_x = 3, trials = 100;
    std::uint64_t t1_seed = 1;
    std::vector<double> noise_levels{0.0, 0.5};
    std::string t1_out;
    CLI::App* theorem1 = app.add_subcommand("theorem1", "emit principal-angle samples for the perturbed-subspace demo");
    theorem1->add_option("--nx", n_x, "rows of the clean matrix");
    theorem1->add_option("--r", r, "columns of the clean matrix");
    theorem1->add_option("--rank-x", rank_x, "rank of the clean matrix");
    theorem1->add_option("--noise", noise_levels, "noise std levels");
    theorem1->add_option("--trials", trials, "trials per level");
    theorem1->add_option("--seed", t1_seed, "base seed");
    theorem1->add_option("--out", t1_out, "output file (default stdout)");

    std::uint64_t gc_seed = 1;
    bool corrupt = false;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "reverse-mode vs finite-difference fidelity suite");
    gradcheck->add_option("--seed", gc_seed, "base seed");
    gradcheck->add_flag("--corrupt-adjoint", corrupt, "fault injection: perturb one adjoint rule")->group("");

    std::string results_path;
    CLI::App* report = app.add_subcommand("report", "summarize a results.jsonl file");
    report->add_option("results", results_path, "path to results.jsonl")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    if (run->parsed()) return cmd_run(config_path, jobs);
    if (theorem1->parsed()) return cmd_theorem1(n_x, r, rank_x, noise_levels, trials, t1_seed, t1_out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, corrupt);
    if (report->parsed()) return cmd_report(results_path);
    return kExitConfigError;
}
