#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <perllm/simulator.hpp>

#include <cmath>
#include <vector>

using namespace perllm;

namespace {

ScenarioConfig small_scenario(SchedulerKind scheduler, std::int64_t requests = 2000,
                              std::uint64_t seed = 7) {
    ScenarioConfig cfg;
    cfg.scheduler = scheduler;
    cfg.total_requests = requests;
    cfg.seed = seed;
    return cfg;
}

bool metrics_equal(const RunMetrics& a, const RunMetrics& b) {
    return a.success_rate == b.success_rate &&
           a.avg_processing_time == b.avg_processing_time &&
           a.throughput == b.throughput &&
           a.energy_total_weighted == b.energy_total_weighted &&
           a.energy_total == b.energy_total && a.energy_tran == b.energy_tran &&
           a.energy_infer == b.energy_infer && a.energy_idle == b.energy_idle &&
           a.regret_series == b.regret_series && a.regret_final == b.regret_final &&
           a.busy_time == b.busy_time && a.idle_time == b.idle_time &&
           a.completed == b.completed && a.total_requests == b.total_requests &&
           a.slots_executed == b.slots_executed && a.plans_emitted == b.plans_emitted;
}

}  // namespace

TEST_CASE("a positive request count with a zero arrival rate is rejected") {
    ScenarioConfig cfg;
    cfg.arrival_rate = 0.0;
    cfg.total_requests = 10;
    RngStream rng(1);
    CHECK_THROWS_AS(generate_workload(cfg, rng), InvalidRate);
}

TEST_CASE("workload generation is deterministic for a pinned seed") {
    ScenarioConfig cfg;
    cfg.total_requests = 500;
    const Workload a = generate_workload(cfg, RngStream(99));
    const Workload b = generate_workload(cfg, RngStream(99));
    REQUIRE(a.total == b.total);
    REQUIRE(a.slots.size() == b.slots.size());
    for (std::size_t s = 0; s < a.slots.size(); ++s) {
        REQUIRE(a.slots[s].size() == b.slots[s].size());
        for (std::size_t i = 0; i < a.slots[s].size(); ++i) {
            CHECK(a.slots[s][i].id == b.slots[s][i].id);
            CHECK(a.slots[s][i].input_bits == b.slots[s][i].input_bits);
            CHECK(a.slots[s][i].deadline == b.slots[s][i].deadline);
            CHECK(a.slots[s][i].service_class == b.slots[s][i].service_class);
        }
    }
}

TEST_CASE("[DERIVED] deadlines drawn from U[2,6] have mean near 4") {
    ScenarioConfig cfg;
    cfg.total_requests = 10000;
    const Workload w = generate_workload(cfg, RngStream(4242));
    double sum = 0.0;
    std::int64_t count = 0;
    for (const auto& slot : w.slots)
        for (const ServiceRequest& r : slot) {
            CHECK(r.deadline >= 2.0);
            CHECK(r.deadline <= 6.0);
            sum += r.deadline;
            ++count;
        }
    REQUIRE(count == 10000);
    CHECK(sum / static_cast<double>(count) == doctest::Approx(4.0).epsilon(0.025));
}

TEST_CASE("bandwidth fluctuation: identity in stable mode, bounded otherwise") {
    RngStream rng(5);
    CHECK(fluctuate_bandwidth(100.0, BandwidthMode::stable, 0.2, rng) == 100.0);
    RngStream a(6), b(6);
    for (int i = 0; i < 200; ++i) {
        const double x = fluctuate_bandwidth(100.0, BandwidthMode::fluctuating, 0.2, a);
        CHECK(x >= 80.0);
        CHECK(x <= 120.0);
        CHECK(x == fluctuate_bandwidth(100.0, BandwidthMode::fluctuating, 0.2, b));
    }
}

TEST_CASE("an empty workload yields a clean run") {
    ScenarioConfig cfg;
    cfg.total_requests = 0;
    const RunMetrics m = run(cfg);
    CHECK(m.completed == 0);
    CHECK(m.success_rate == 1.0);
    CHECK(m.energy_tran == 0.0);
    CHECK(m.energy_infer == 0.0);
    CHECK(m.throughput == 0.0);
}

TEST_CASE("a single unconstrained request matches the closed-form trace") {
    ScenarioConfig cfg;
    cfg.total_requests = 1;
    cfg.arrival_rate = 1.0;
    cfg.bandwidth_mode = BandwidthMode::stable;
    cfg.scheduler = SchedulerKind::cloud_only;
    Simulator sim(cfg);
    std::vector<TraceRecord> trace;
    sim.set_trace_sink([&](const TraceRecord& r) { trace.push_back(r); });
    const RunMetrics m = sim.run();
    REQUIRE(m.completed == 1);
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].deadline_met);
    CHECK(m.success_rate == 1.0);
    CHECK(m.avg_processing_time ==
          doctest::Approx(trace[0].queue_wait + trace[0].transmission_time +
                          trace[0].inference_time)
              .epsilon(1e-12));
}

TEST_CASE("cs_ucb beats cloud_only on success and weighted energy") {
    const RunMetrics ucb = run(small_scenario(SchedulerKind::cs_ucb));
    const RunMetrics cloud = run(small_scenario(SchedulerKind::cloud_only));
    CHECK(ucb.success_rate > cloud.success_rate);
    CHECK(ucb.energy_total_weighted < cloud.energy_total_weighted);
}

TEST_CASE("two runs with equal seeds produce identical metrics") {
    for (SchedulerKind k : {SchedulerKind::cs_ucb, SchedulerKind::epsilon_greedy,
                            SchedulerKind::round_robin}) {
        const RunMetrics a = run(small_scenario(k, 800));
        const RunMetrics b = run(small_scenario(k, 800));
        CHECK(metrics_equal(a, b));
    }
}

TEST_CASE("token conservation and completion accounting") {
    ScenarioConfig cfg = small_scenario(SchedulerKind::cs_ucb, 1500);
    const Workload w = generate_workload(cfg, RngStream(cfg.seed).substream(1));
    double generated_tokens = 0.0;
    for (const auto& slot : w.slots)
        for (const ServiceRequest& r : slot)
            generated_tokens += static_cast<double>(r.total_tokens());

    const RunMetrics m = run(cfg);
    CHECK(m.completed == m.total_requests);  // nothing is dropped
    const double total_time =
        static_cast<double>(m.slots_executed) * cfg.slot_length;
    // Throughput counts only tokens delivered within deadline, so the
    // delivered total can never exceed what was generated.
    CHECK(m.throughput * total_time <= generated_tokens * (1.0 + 1e-9));
}

TEST_CASE("busy and idle time partition every executed slot") {
    ScenarioConfig cfg = small_scenario(SchedulerKind::round_robin, 1000);
    const RunMetrics m = run(cfg);
    REQUIRE(m.busy_time.size() == cfg.fleet.size());
    for (std::size_t j = 0; j < m.busy_time.size(); ++j) {
        CHECK(m.busy_time[j] >= 0.0);
        CHECK(m.idle_time[j] >= 0.0);
        CHECK(m.busy_time[j] + m.idle_time[j] ==
              doctest::Approx(static_cast<double>(m.slots_executed) * cfg.slot_length)
                  .epsilon(1e-9));
    }
}

TEST_CASE("every emitted plan respects the residuals it was built against") {
    ScenarioConfig cfg = small_scenario(SchedulerKind::cs_ucb, 1200);
    Simulator sim(cfg);
    std::int64_t checked = 0;
    sim.set_plan_hook([&](const AssignmentPlan& plan,
                          const std::vector<ServerState>& states,
                          const std::vector<RequestInSlot>& batch) {
        ++checked;
        // C4: each batch service appears exactly once.
        CHECK(plan.entries().size() + plan.deferred().size() == batch.size());
        // C2/C3: sequential subtraction never goes negative.
        std::vector<double> cu(states.size()), bw(states.size());
        for (std::size_t j = 0; j < states.size(); ++j) {
            cu[j] = states[j].residual_compute;
            bw[j] = states[j].residual_bandwidth;
        }
        for (const PlanEntry& e : plan.entries()) {
            const auto j = static_cast<std::size_t>(e.server_id - 1);
            cu[j] -= e.reserved_compute;
            bw[j] -= e.reserved_bandwidth;
            CHECK(cu[j] >= -1e-9);
            CHECK(bw[j] >= -1e-9);
        }
    });
    sim.run();
    CHECK(checked > 0);
}
