#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <perllm/experiment.hpp>

#include <sstream>
#include <string>

using namespace perllm;

namespace {

ExperimentSpec small_spec() {
    ExperimentSpec spec;
    spec.scenario.total_requests = 400;
    spec.scenario.seed = 11;
    spec.schedulers = {SchedulerKind::cs_ucb, SchedulerKind::cloud_only};
    spec.replications = 3;
    return spec;
}

}  // namespace

TEST_CASE("rows and summaries cover schedulers x replications in order") {
    const ExperimentSpec spec = small_spec();
    const ExperimentResult result = run_experiment(spec);
    REQUIRE(result.rows.size() == 6);
    REQUIRE(result.summaries.size() == 2);
    std::size_t i = 0;
    for (SchedulerKind k : spec.schedulers)
        for (int rep = 0; rep < spec.replications; ++rep, ++i) {
            CHECK(result.rows[i].scheduler == k);
            CHECK(result.rows[i].replication == rep);
            CHECK(result.rows[i].seed ==
                  spec.scenario.seed + static_cast<std::uint64_t>(rep));
        }
    for (const SchedulerSummary& s : result.summaries) CHECK(s.runs == 3);
}

TEST_CASE("summaries aggregate the row metrics") {
    const ExperimentResult result = run_experiment(small_spec());
    const SchedulerSummary& s = result.summaries[0];
    double mean = 0.0;
    for (int rep = 0; rep < 3; ++rep)
        mean += result.rows[static_cast<std::size_t>(rep)].metrics.success_rate;
    mean /= 3.0;
    CHECK(s.success_mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.success_stdev >= 0.0);
}

TEST_CASE("identical specs serialize byte-identically") {
    ExperimentSpec spec = small_spec();
    spec.emit_trace = true;
    spec.replications = 2;
    const ExperimentResult a = run_experiment(spec);
    const ExperimentResult b = run_experiment(spec);

    auto render = [](const ExperimentResult& r) {
        std::ostringstream results, summary, json, trace;
        write_results_csv(r, results);
        write_summary_csv(r, summary);
        write_summary_json(r, json);
        for (const RunRow& row : r.rows) write_trace_ndjson(row.trace, trace);
        return results.str() + summary.str() + json.str() + trace.str();
    };
    CHECK(render(a) == render(b));
}

TEST_CASE("the results CSV header is the documented contract") {
    const ExperimentResult result = run_experiment(small_spec());
    std::ostringstream os;
    write_results_csv(result, os);
    const std::string text = os.str();
    const std::string header = text.substr(0, text.find('\n'));
    CHECK(header ==
          "scheduler,seed,success_rate,avg_processing_time_s,throughput_tok_s,"
          "energy_total_j,energy_tran_j,energy_infer_j,energy_idle_j,regret_final,"
          "energy_weighted_j");
    // one header + one line per row
    std::size_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == 1 + result.rows.size());
}

TEST_CASE("trace NDJSON emits one object per completed service") {
    ExperimentSpec spec;
    spec.scenario.total_requests = 50;
    spec.schedulers = {SchedulerKind::round_robin};
    spec.emit_trace = true;
    const ExperimentResult result = run_experiment(spec);
    REQUIRE(result.rows.size() == 1);
    std::ostringstream os;
    write_trace_ndjson(result.rows[0].trace, os);
    const std::string text = os.str();
    std::size_t lines = 0;
    for (char c : text)
        if (c == '\n') ++lines;
    CHECK(lines == static_cast<std::size_t>(result.rows[0].metrics.completed));
    CHECK(text.find("\"deadline_met\":") != std::string::npos);
}
