#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <perllm/bandit_cs_ucb.hpp>
#include <perllm/rng.hpp>
#include <perllm/simulator.hpp>

#include <cmath>
#include <limits>
#include <vector>

using namespace perllm;

namespace {

Fleet two_server_fleet() {
    std::vector<ServerSpec> specs;
    specs.push_back({1, ServerKind::edge, 1000.0, 100.0, 100.0, 20.0, 30.0, 100.0});
    specs.push_back({2, ServerKind::cloud, 1001.0, 300.0, 480.0, 50.0, 80.0, 300.0});
    return Fleet::validate(std::move(specs));
}

std::vector<ServerState> idle_states(const Fleet& fleet) {
    std::vector<ServerState> states(static_cast<std::size_t>(fleet.size()));
    for (int j = 1; j <= fleet.size(); ++j) {
        states[static_cast<std::size_t>(j - 1)].residual_compute =
            fleet.server(j).compute_capacity;
        states[static_cast<std::size_t>(j - 1)].residual_bandwidth =
            fleet.server(j).bandwidth_capacity;
    }
    return states;
}

RequestInSlot make_request(int id, double bits, int tokens, double deadline) {
    ServiceRequest req;
    req.id = id;
    req.input_bits = bits;
    req.prompt_tokens = tokens / 2;
    req.output_tokens = tokens - tokens / 2;
    req.deadline = deadline;
    req.compute_demand = static_cast<double>(tokens);
    req.service_class = 0;
    return {req, 0.0};
}

}  // namespace

TEST_CASE("unplayed arms score positive infinity") {
    ArmStats a;
    CHECK(ucb_score(a, 10.0, BanditConfig{}) ==
          std::numeric_limits<double>::infinity());
}

TEST_CASE("ucb score matches the hand-computed value") {
    // Independent hand evaluation: mean 0.5 plus delta * sqrt(ln(e)/4)
    // = 0.5 + 1 * sqrt(1/4) = 1.0 with no penalty term.
    const double expected_by_hand = 0.5 + std::sqrt(1.0 / 4.0);

    ArmStats a;
    a.play_count = 4;
    a.mean_reward = 0.5;
    BanditConfig cfg;
    cfg.delta = 1.0;
    cfg.theta = 1.0;
    const double t = std::exp(1.0);
    CHECK(ucb_score(a, t, cfg, 0.0) ==
          doctest::Approx(expected_by_hand).epsilon(1e-9));
}

TEST_CASE("more plays shrink the exploration bonus") {
    ArmStats few, many;
    few.play_count = 4;
    many.play_count = 16;
    few.mean_reward = many.mean_reward = 0.5;
    CHECK(ucb_score(many, 100.0, BanditConfig{}) <
          ucb_score(few, 100.0, BanditConfig{}));
}

TEST_CASE("scaling rewards, delta, and penalty together preserves the argmax") {
    RngStream rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        BanditConfig base;
        base.delta = rng.uniform(0.1, 2.0);
        BanditConfig scaled = base;
        const double c = rng.uniform(0.5, 5.0);
        scaled.delta = base.delta * c;
        const double p = rng.uniform(0.0, 0.5);

        std::vector<ArmStats> arms(4);
        int best_base = 0, best_scaled = 0;
        double sb = -1e300, ss = -1e300;
        for (int i = 0; i < 4; ++i) {
            arms[static_cast<std::size_t>(i)].play_count = rng.uniform_int(1, 50);
            arms[static_cast<std::size_t>(i)].mean_reward = rng.uniform(-2.0, 2.0);
            const double s1 =
                ucb_score(arms[static_cast<std::size_t>(i)], 100.0, base, p);
            ArmStats scaled_arm = arms[static_cast<std::size_t>(i)];
            scaled_arm.mean_reward *= c;
            const double s2 = ucb_score(scaled_arm, 100.0, scaled, p * c);
            if (s1 > sb) { sb = s1; best_base = i; }
            if (s2 > ss) { ss = s2; best_scaled = i; }
        }
        CHECK(best_base == best_scaled);
    }
}

TEST_CASE("penalty is the positive part of -f") {
    FeasibilityReport r;
    r.f_value = 0.3;
    CHECK(penalty(r) == doctest::Approx(0.0));
    r.f_value = 0.0;
    CHECK(penalty(r) == doctest::Approx(0.0));
    r.f_value = -0.25;
    CHECK(penalty(r) == doctest::Approx(0.25));
}

TEST_CASE("slot reward anchors") {
    BanditConfig cfg;
    cfg.lambda = 2.0;
    CHECK(slot_reward(0.0, 0.0, cfg, 100.0) == doctest::Approx(0.0));
    CHECK(slot_reward(100.0, 0.0, cfg, 100.0) == doctest::Approx(-1.0));
}

TEST_CASE("slot reward matches the hand-computed value") {
    // Independent hand evaluation: -(0.5 E_ref / E_ref) + 2 * (-0.25)
    // = -0.5 - 0.5 = -1.0.
    const double expected_by_hand = -0.5 + 2.0 * -0.25;

    BanditConfig cfg;
    cfg.lambda = 2.0;
    const double e_ref = 320.0;
    CHECK(slot_reward(0.5 * e_ref, -0.25, cfg, e_ref) ==
          doctest::Approx(expected_by_hand).epsilon(1e-9));
}

TEST_CASE("arm updates keep a running mean") {
    ArmTable arms(2);
    BanditConfig cfg;
    cfg.lambda = 2.0;
    const double e_ref = 100.0;

    SUBCASE("first sample is the mean") {
        std::vector<ArmCredit> credits{{3, 1, 50.0}};
        update_arms(arms, credits, 0.0, cfg, e_ref, 7);
        CHECK(arms.at(3, 1).play_count == 1);
        CHECK(arms.at(3, 1).mean_reward == doctest::Approx(-0.5));
        CHECK(arms.at(3, 1).last_update_slot == 7);
    }
    SUBCASE("two samples average") {
        std::vector<ArmCredit> c1{{3, 1, 50.0}};
        std::vector<ArmCredit> c2{{3, 1, 100.0}};
        update_arms(arms, c1, 0.0, cfg, e_ref, 1);
        update_arms(arms, c2, 0.0, cfg, e_ref, 2);
        CHECK(arms.at(3, 1).play_count == 2);
        CHECK(arms.at(3, 1).mean_reward == doctest::Approx((-0.5 + -1.0) / 2.0));
    }
    SUBCASE("two services on one server credit by class") {
        std::vector<ArmCredit> same{{3, 1, 50.0}, {3, 1, 50.0}};
        update_arms(arms, same, 0.0, cfg, e_ref, 1);
        CHECK(arms.at(3, 1).play_count == 2);

        ArmTable arms2(2);
        std::vector<ArmCredit> mixed{{3, 1, 50.0}, {4, 1, 50.0}};
        update_arms(arms2, mixed, 0.0, cfg, e_ref, 1);
        CHECK(arms2.at(3, 1).play_count == 1);
        CHECK(arms2.at(4, 1).play_count == 1);
    }
}

TEST_CASE("single request with unplayed arms goes to the lowest-id feasible server") {
    const Fleet fleet = two_server_fleet();
    const auto states = idle_states(fleet);
    ArmTable arms(fleet.size());
    std::vector<RequestInSlot> batch{make_request(1, 10.0, 100, 6.0)};
    const AssignmentPlan plan =
        select_super_arm(batch, states, fleet, arms, BanditConfig{}, 5, 1.0);
    REQUIRE(plan.entries().size() == 1);
    CHECK(plan.entries()[0].server_id == 1);
}

TEST_CASE("a converged dominant arm wins the selection") {
    const Fleet fleet = two_server_fleet();
    const auto states = idle_states(fleet);
    ArmTable arms(fleet.size());
    for (int j = 1; j <= 2; ++j) {
        arms.at(0, j).play_count = 1000;
        arms.at(0, j).mean_reward = j == 2 ? 5.0 : -5.0;
    }
    std::vector<RequestInSlot> batch{make_request(1, 10.0, 100, 6.0)};
    const AssignmentPlan plan =
        select_super_arm(batch, states, fleet, arms, BanditConfig{}, 5000, 1.0);
    REQUIRE(plan.entries().size() == 1);
    CHECK(plan.entries()[0].server_id == 2);
}

TEST_CASE("greedy construction fills capacity and defers the overflow") {
    // Instance engineered so at most two of the three requests fit:
    // request 1 is edge-infeasible by deadline and must take the cloud,
    // request 3 fits only the edge, and request 2 then fits nowhere.
    const Fleet fleet = two_server_fleet();
    const auto states = idle_states(fleet);
    ArmTable arms(fleet.size());
    std::vector<RequestInSlot> batch{
        make_request(1, 10.0, 600, 4.0),   // edge inference 6 s > deadline
        make_request(2, 10.0, 500, 8.0),
        make_request(3, 10.0, 800, 8.2),  // tighter slack: handled before 2
    };
    const AssignmentPlan plan =
        select_super_arm(batch, states, fleet, arms, BanditConfig{}, 5, 1.0);

    // Independent brute force over all 2^3 server assignments, with the
    // resource and deadline arithmetic recomputed from first principles.
    const double edge_cap = 1000.0, cloud_cap = 1001.0;
    int best_served = 0;
    for (int mask = 0; mask < 8; ++mask) {
        double edge_used = 0.0, cloud_used = 0.0;
        bool ok = true;
        for (int i = 0; i < 3 && ok; ++i) {
            const ServiceRequest& r = batch[static_cast<std::size_t>(i)].request;
            const bool on_cloud = (mask >> i) & 1;
            const double rate = on_cloud ? 300.0 : 100.0;
            const double t_infer = static_cast<double>(r.total_tokens()) / rate;
            const double t_tran_budget = r.deadline - t_infer;
            if (t_tran_budget <= 0.0) ok = false;
            if (on_cloud)
                cloud_used += r.compute_demand;
            else
                edge_used += r.compute_demand;
        }
        if (ok && edge_used <= edge_cap && cloud_used <= cloud_cap)
            best_served = 3;
    }
    // No full assignment exists; two services is the maximum.
    CHECK(best_served == 0);

    CHECK(plan.entries().size() == 2);
    CHECK(plan.deferred() == std::vector<int>{2});
    for (const PlanEntry& e : plan.entries()) {
        if (e.service_id == 1) CHECK(e.server_id == 2);
        if (e.service_id == 3) CHECK(e.server_id == 1);
    }
}

TEST_CASE("both arms of a class get explored within two slots") {
    const Fleet fleet = two_server_fleet();
    const auto states = idle_states(fleet);
    ArmTable arms(fleet.size());
    BanditConfig cfg;
    for (std::int64_t slot = 1; slot <= 2; ++slot) {
        std::vector<RequestInSlot> batch{make_request(1, 10.0, 100, 6.0)};
        const AssignmentPlan plan =
            select_super_arm(batch, states, fleet, arms, cfg, slot, 1.0);
        REQUIRE(plan.entries().size() == 1);
        std::vector<ArmCredit> credits{{0, plan.entries()[0].server_id, 10.0}};
        update_arms(arms, credits, 0.5, cfg, 100.0, slot);
    }
    CHECK(arms.at(0, 1).play_count == 1);
    CHECK(arms.at(0, 2).play_count == 1);
}

TEST_CASE("regret is zero when the policy always plays the oracle plan") {
    RegretLedger ledger(OracleSource::exact);
    BanditConfig cfg;
    for (int t = 0; t < 10; ++t) ledger.record(0.7, 0.7, cfg);
    for (double r : ledger.series()) CHECK(r == doctest::Approx(0.0));
    CHECK(ledger.final_regret() == doctest::Approx(0.0));
}

TEST_CASE("regret accumulates oracle minus realized") {
    RegretLedger ledger(OracleSource::exact);
    BanditConfig cfg;  // alpha = beta = 1
    ledger.record(-1.0, 0.0, cfg);
    ledger.record(-1.0, 0.0, cfg);
    REQUIRE(ledger.series().size() == 2);
    CHECK(ledger.series()[1] == doctest::Approx(2.0));
}

TEST_CASE("best-observed ledger tracks the running maximum") {
    RegretLedger ledger(OracleSource::best_observed);
    BanditConfig cfg;
    ledger.record(0.5, 0.0, cfg);   // best 0.5, increment 0
    ledger.record(0.2, 0.0, cfg);   // best 0.5, increment 0.3
    CHECK(ledger.final_regret() == doctest::Approx(0.3));
}

TEST_CASE("regret increments diminish on a stationary instance") {
    ScenarioConfig cfg;
    std::vector<ServerSpec> fleet;
    fleet.push_back({1, ServerKind::edge, 1000.0, 100.0, 100.0, 20.0, 30.0, 100.0});
    fleet.push_back({2, ServerKind::edge, 1000.0, 100.0, 100.0, 20.0, 30.0, 100.0});
    fleet.push_back({3, ServerKind::cloud, 5000.0, 300.0, 480.0, 50.0, 80.0, 300.0});
    cfg.fleet = std::move(fleet);
    cfg.arrival_rate = 0.8;
    cfg.total_requests = 3200;  // spans roughly 4000 slots
    cfg.horizon = 20000;
    cfg.bandwidth_mode = BandwidthMode::stable;
    cfg.regret_oracle = RegretOracle::exact;
    cfg.seed = 17;

    Simulator sim(cfg);
    const RunMetrics m = sim.run();
    REQUIRE(m.regret_series.size() >= 4000);
    const double r500 = m.regret_series[499];
    const double r1000 = m.regret_series[999];
    const double r2000 = m.regret_series[1999];
    const double r4000 = m.regret_series[3999];
    // Average per-slot regret over successive windows must shrink.
    CHECK((r4000 - r2000) / 2000.0 < (r2000 - r1000) / 1000.0);
    CHECK((r2000 - r1000) / 1000.0 < (r1000 - r500) / 500.0);
}
