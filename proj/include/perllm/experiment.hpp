#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <atomic>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "perllm/config.hpp"
#include "perllm/simulator.hpp"

namespace perllm {

struct RunRow {
    SchedulerKind scheduler;
    int replication = 0;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    std::vector<TraceRecord> trace;
};

struct SchedulerSummary {
    SchedulerKind scheduler;
    int runs = 0;
    double success_mean = 0, success_stdev = 0;
    double processing_mean = 0, processing_stdev = 0;
    double throughput_mean = 0, throughput_stdev = 0;
    double energy_mean = 0, energy_stdev = 0;
    double energy_weighted_mean = 0, energy_weighted_stdev = 0;
    double regret_mean = 0, regret_stdev = 0;
};

struct ExperimentResult {
    std::vector<RunRow> rows;          // ordered by (scheduler, replication)
    std::vector<SchedulerSummary> summaries;
};

namespace experiment_detail {

inline std::pair<double, double> mean_stdev(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return {mean, std::sqrt(var)};
}

// Fixed-precision number formatting so equal runs serialize byte-identically.
inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace experiment_detail

// Runs schedulers x replications; replication r uses seed base+r. Rows are
// ordered deterministically regardless of worker completion order.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    std::vector<std::pair<SchedulerKind, int>> jobs;
    for (SchedulerKind k : spec.schedulers)
        for (int r = 0; r < spec.replications; ++r) jobs.emplace_back(k, r);

    const unsigned workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(jobs.size())));
    std::vector<RunRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
            const auto [kind, rep] = jobs[i];
            ScenarioConfig cfg = spec.scenario;
            cfg.scheduler = kind;
            cfg.seed = spec.scenario.seed + static_cast<std::uint64_t>(rep);
            Simulator sim(cfg);
            RunRow row{kind, rep, cfg.seed, {}, {}};
            if (spec.emit_trace)
                sim.set_trace_sink(
                    [&row](const TraceRecord& t) { row.trace.push_back(t); });
            row.metrics = sim.run();
            rows[i] = std::move(row);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    ExperimentResult result;
    result.rows = std::move(rows);

    for (SchedulerKind k : spec.schedulers) {
        std::vector<double> succ, proc, tput, energy, wenergy, regret;
        for (const RunRow& row : result.rows) {
            if (row.scheduler != k) continue;
            succ.push_back(row.metrics.success_rate);
            proc.push_back(row.metrics.avg_processing_time);
            tput.push_back(row.metrics.throughput);
            energy.push_back(row.metrics.energy_total);
            wenergy.push_back(row.metrics.energy_total_weighted);
            regret.push_back(row.metrics.regret_final);
        }
        SchedulerSummary s;
        s.scheduler = k;
        s.runs = static_cast<int>(succ.size());
        using experiment_detail::mean_stdev;
        std::tie(s.success_mean, s.success_stdev) = mean_stdev(succ);
        std::tie(s.processing_mean, s.processing_stdev) = mean_stdev(proc);
        std::tie(s.throughput_mean, s.throughput_stdev) = mean_stdev(tput);
        std::tie(s.energy_mean, s.energy_stdev) = mean_stdev(energy);
        std::tie(s.energy_weighted_mean, s.energy_weighted_stdev) = mean_stdev(wenergy);
        std::tie(s.regret_mean, s.regret_stdev) = mean_stdev(regret);
        result.summaries.push_back(s);
    }
    return result;
}

// Column order is part of the output contract; additions are append-only.
inline void write_results_csv(const ExperimentResult& result, std::ostream& os) {
    using experiment_detail::fmt;
    os << "scheduler,seed,success_rate,avg_processing_time_s,throughput_tok_s,"
          "energy_total_j,energy_tran_j,energy_infer_j,energy_idle_j,regret_final,"
          "energy_weighted_j\n";
    for (const RunRow& row : result.rows) {
        const RunMetrics& m = row.metrics;
        os << to_string(row.scheduler) << ',' << row.seed << ','
           << fmt(m.success_rate) << ',' << fmt(m.avg_processing_time) << ','
           << fmt(m.throughput) << ',' << fmt(m.energy_total) << ','
           << fmt(m.energy_tran) << ',' << fmt(m.energy_infer) << ','
           << fmt(m.energy_idle) << ',' << fmt(m.regret_final) << ','
           << fmt(m.energy_total_weighted) << '\n';
    }
}

inline void write_summary_csv(const ExperimentResult& result, std::ostream& os) {
    using experiment_detail::fmt;
    os << "scheduler,runs,success_mean,success_stdev,processing_mean,processing_stdev,"
          "throughput_mean,throughput_stdev,energy_mean,energy_stdev,"
          "energy_weighted_mean,energy_weighted_stdev,regret_mean,regret_stdev\n";
    for (const SchedulerSummary& s : result.summaries) {
        os << to_string(s.scheduler) << ',' << s.runs << ',' << fmt(s.success_mean)
           << ',' << fmt(s.success_stdev) << ',' << fmt(s.processing_mean) << ','
           << fmt(s.processing_stdev) << ',' << fmt(s.throughput_mean) << ','
           << fmt(s.throughput_stdev) << ',' << fmt(s.energy_mean) << ','
           << fmt(s.energy_stdev) << ',' << fmt(s.energy_weighted_mean) << ','
           << fmt(s.energy_weighted_stdev) << ',' << fmt(s.regret_mean) << ','
           << fmt(s.regret_stdev) << '\n';
    }
}

// One JSON object per completed service.
inline void write_trace_ndjson(const std::vector<TraceRecord>& trace, std::ostream& os) {
    using experiment_detail::fmt;
    for (const TraceRecord& t : trace) {
        os << "{\"slot\":" << t.slot << ",\"service\":" << t.service_id
           << ",\"server\":" << t.server_id << ",\"queue_wait_s\":" << fmt(t.queue_wait)
           << ",\"transmission_s\":" << fmt(t.transmission_time)
           << ",\"inference_s\":" << fmt(t.inference_time)
           << ",\"e_tran_j\":" << fmt(t.e_tran) << ",\"e_infer_j\":" << fmt(t.e_infer)
           << ",\"deadline_met\":" << (t.deadline_met ? "true" : "false") << "}\n";
    }
}

inline void write_summary_json(const ExperimentResult& result, std::ostream& os) {
    using experiment_detail::fmt;
    os << "{\n  \"schedulers\": [\n";
    for (std::size_t i = 0; i < result.summaries.size(); ++i) {
        const SchedulerSummary& s = result.summaries[i];
        os << "    {\"name\": \"" << to_string(s.scheduler) << "\", \"runs\": " << s.runs
           << ", \"success_rate\": {\"mean\": " << fmt(s.success_mean)
           << ", \"stdev\": " << fmt(s.success_stdev) << "}"
           << ", \"avg_processing_time_s\": {\"mean\": " << fmt(s.processing_mean)
           << ", \"stdev\": " << fmt(s.processing_stdev) << "}"
           << ", \"throughput_tok_s\": {\"mean\": " << fmt(s.throughput_mean)
           << ", \"stdev\": " << fmt(s.throughput_stdev) << "}"
           << ", \"energy_total_j\": {\"mean\": " << fmt(s.energy_mean)
           << ", \"stdev\": " << fmt(s.energy_stdev) << "}"
           << ", \"energy_weighted_j\": {\"mean\": " << fmt(s.energy_weighted_mean)
           << ", \"stdev\": " << fmt(s.energy_weighted_stdev) << "}"
           << ", \"regret_final\": {\"mean\": " << fmt(s.regret_mean)
           << ", \"stdev\": " << fmt(s.regret_stdev) << "}}"
           << (i + 1 < result.summaries.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
}

}  // namespace perllm
