#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perllm/config.hpp"
#include "perllm/experiment.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"perllm - edge-cloud LLM inference scheduling simulator"};

    std::string config_path;
    std::string scheduler_list;
    std::string bandwidth_mode;
    std::string out_dir = "out";
    std::int64_t requests = -1;
    std::string seed_str;
    int replications = -1;
    bool trace = false;

    app.add_option("--config", config_path, "experiment config file (key = value)");
    app.add_option("--scheduler", scheduler_list,
                   "comma-separated scheduler kinds (overrides config)");
    app.add_option("--requests", requests, "total service requests (overrides config)");
    app.add_option("--seed", seed_str, "base seed (overrides config and PERLLM_SEED)");
    app.add_option("--bandwidth-mode", bandwidth_mode, "stable|fluctuating");
    app.add_option("--replications", replications, "replications per scheduler");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--trace", trace, "write per-completion NDJSON traces");

    CLI11_PARSE(app, argc, argv);

    try {
        perllm::ExperimentSpec spec;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "error: cannot open config '" << config_path << "'\n";
                return 1;
            }
            spec = perllm::load_config(in);
        } else {
            std::istringstream empty;
            spec = perllm::load_config(empty);
        }

        if (seed_str.empty()) {
            if (const char* env = std::getenv("PERLLM_SEED")) seed_str = env;
        }
        if (!seed_str.empty()) spec.scenario.seed = std::stoull(seed_str);
        if (requests >= 0) spec.scenario.total_requests = requests;
        if (replications >= 1) spec.replications = replications;
        if (trace) spec.emit_trace = true;
        if (!bandwidth_mode.empty()) {
            if (bandwidth_mode == "stable")
                spec.scenario.bandwidth_mode = perllm::BandwidthMode::stable;
            else if (bandwidth_mode == "fluctuating")
                spec.scenario.bandwidth_mode = perllm::BandwidthMode::fluctuating;
            else {
                std::cerr << "error: bandwidth-mode must be stable|fluctuating\n";
                return 1;
            }
        }
        if (!scheduler_list.empty()) {
            spec.schedulers.clear();
            std::stringstream ss(scheduler_list);
            std::string item;
            while (std::getline(ss, item, ',')) {
                perllm::SchedulerKind k;
                if (!perllm::scheduler_kind_from_string(item, k)) {
                    std::cerr << "error: unknown scheduler '" << item << "'\n";
                    return 1;
                }
                spec.schedulers.push_back(k);
            }
        }

        const perllm::ExperimentResult result = perllm::run_experiment(spec);

        fs::create_directories(out_dir);
        {
            std::ofstream os(fs::path(out_dir) / "results.csv");
            perllm::write_results_csv(result, os);
        }
        {
            std::ofstream os(fs::path(out_dir) / "summary.csv");
            perllm::write_summary_csv(result, os);
        }
        {
            std::ofstream os(fs::path(out_dir) / "summary.json");
            perllm::write_summary_json(result, os);
        }
        if (spec.emit_trace) {
            for (const perllm::RunRow& row : result.rows) {
                std::ostringstream name;
                name << "trace_" << perllm::to_string(row.scheduler) << "_r"
                     << row.replication << ".ndjson";
                std::ofstream os(fs::path(out_dir) / name.str());
                perllm::write_trace_ndjson(row.trace, os);
            }
        }

        std::cout << std::left << std::setw(16) << "scheduler" << std::right
                  << std::setw(10) << "success" << std::setw(14) << "proc_time_s"
                  << std::setw(14) << "tput_tok_s" << std::setw(16) << "energy_j"
                  << "\n";
        for (const perllm::SchedulerSummary& s : result.summaries) {
            std::cout << std::left << std::setw(16) << perllm::to_string(s.scheduler)
                      << std::right << std::fixed << std::setprecision(4)
                      << std::setw(10) << s.success_mean << std::setw(14)
                      << s.processing_mean << std::setprecision(1) << std::setw(14)
                      << s.throughput_mean << std::setw(16) << s.energy_mean << "\n"
                      << std::defaultfloat;
        }
        bool incomplete = false;
        for (const perllm::RunRow& row : result.rows)
            if (row.metrics.horizon_exhausted) incomplete = true;
        if (incomplete) {
            std::cerr << "warning: at least one run exhausted its horizon; metrics are "
                         "partial\n";
            return 2;
        }
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
