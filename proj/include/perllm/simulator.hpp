#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "perllm/baselines.hpp"
#include "perllm/bandit_cs_ucb.hpp"
#include "perllm/constraint_engine.hpp"
#include "perllm/cost_models.hpp"
#include "perllm/domain.hpp"
#include "perllm/oracle.hpp"
#include "perllm/rng.hpp"

namespace perllm {

enum class BandwidthMode { stable, fluctuating };
enum class RegretOracle { off, exact, best_observed, automatic };

// Five edge CPUs plus one cloud GPU; bandwidths 100 / 300 Mbps. Power
// figures are configuration defaults that make the cloud faster but
// costlier per token.
inline std::vector<ServerSpec> default_fleet() {
    std::vector<ServerSpec> specs;
    for (int j = 1; j <= 5; ++j)
        specs.push_back({j, ServerKind::edge, 1000.0, 100.0, 100.0, 20.0, 30.0, 100.0});
    specs.push_back({6, ServerKind::cloud, 5000.0, 300.0, 480.0, 50.0, 80.0, 300.0});
    return specs;
}

struct ScenarioConfig {
    std::vector<ServerSpec> fleet = default_fleet();
    double slot_length = 1.0;
    std::int64_t total_requests = 10000;
    double arrival_rate = 5.5;  // mean arrivals per slot
    double deadline_lo = 2.0;
    double deadline_hi = 6.0;
    double input_bits_lo = 10.0;  // Mb
    double input_bits_hi = 100.0;
    int prompt_tokens_lo = 50;
    int prompt_tokens_hi = 200;
    int output_tokens_lo = 50;
    int output_tokens_hi = 200;
    double kappa = 1.0;  // compute units per token
    BandwidthMode bandwidth_mode = BandwidthMode::fluctuating;
    double fluctuation_fraction = 0.2;
    std::uint64_t seed = 42;
    SchedulerKind scheduler = SchedulerKind::cs_ucb;
    std::int64_t horizon = 50000;
    double epsilon = 0.25;  // epsilon_greedy exploration probability
    BanditConfig bandit;
    EnergyWeights weights;
    RegretOracle regret_oracle = RegretOracle::automatic;
};

class InvalidRate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Quartile boundaries derived from the configured size/deadline ranges,
// so classification is fixed per scenario rather than data-dependent.
inline ClassBounds class_bounds_from(const ScenarioConfig& cfg) {
    ClassBounds b;
    const double size_lo = cfg.input_bits_lo +
                           static_cast<double>(cfg.prompt_tokens_lo + cfg.output_tokens_lo);
    const double size_hi = cfg.input_bits_hi +
                           static_cast<double>(cfg.prompt_tokens_hi + cfg.output_tokens_hi);
    for (int q = 1; q <= 3; ++q) {
        b.size[static_cast<std::size_t>(q - 1)] =
            size_lo + (size_hi - size_lo) * q / 4.0;
        b.deadline[static_cast<std::size_t>(q - 1)] =
            cfg.deadline_lo + (cfg.deadline_hi - cfg.deadline_lo) * q / 4.0;
    }
    return b;
}

// Reward normalizer: weighted energy of one maximum-size service on the
// cloud at nominal bandwidth.
inline double reference_energy(const ScenarioConfig& cfg, const Fleet& fleet) {
    const ServerSpec& cloud = fleet.cloud();
    const double t_tran = cfg.input_bits_hi / cloud.bandwidth_capacity;
    const double tokens =
        static_cast<double>(cfg.prompt_tokens_hi + cfg.output_tokens_hi);
    const double t_infer = tokens / cloud.tokens_per_second;
    return energy_of_assignment(cloud, t_tran, t_infer, cfg.weights).weighted_total;
}

struct Workload {
    std::vector<std::vector<ServiceRequest>> slots;  // arrivals per slot
    std::int64_t total = 0;
};

inline Workload generate_workload(const ScenarioConfig& cfg, RngStream rng) {
    Workload w;
    if (cfg.total_requests > 0 && cfg.arrival_rate <= 0.0)
        throw InvalidRate("arrival rate must be positive when requests > 0");
    const ClassBounds bounds = class_bounds_from(cfg);
    std::int64_t next_id = 1;
    std::int64_t slot = 0;
    while (w.total < cfg.total_requests) {
        int k = rng.poisson(cfg.arrival_rate);
        k = static_cast<int>(
            std::min<std::int64_t>(k, cfg.total_requests - w.total));
        std::vector<ServiceRequest> batch;
        for (int i = 0; i < k; ++i) {
            ServiceRequest req;
            req.id = static_cast<int>(next_id++);
            req.arrival_slot = slot;
            req.input_bits = rng.uniform(cfg.input_bits_lo, cfg.input_bits_hi);
            req.prompt_tokens = static_cast<int>(
                rng.uniform_int(cfg.prompt_tokens_lo, cfg.prompt_tokens_hi));
            req.output_tokens = static_cast<int>(
                rng.uniform_int(cfg.output_tokens_lo, cfg.output_tokens_hi));
            req.deadline = rng.uniform(cfg.deadline_lo, cfg.deadline_hi);
            req.compute_demand = cfg.kappa * static_cast<double>(req.total_tokens());
            req.service_class = classify_service(req, bounds);
            batch.push_back(req);
        }
        w.slots.push_back(std::move(batch));
        w.total += k;
        ++slot;
    }
    return w;
}

inline double fluctuate_bandwidth(double nominal, BandwidthMode mode, double fraction,
                                  RngStream& rng) {
    if (mode == BandwidthMode::stable) return nominal;
    return nominal * (1.0 + rng.uniform(-fraction, fraction));
}

struct TraceRecord {
    std::int64_t slot = 0;
    int service_id = 0;
    int server_id = 0;
    double queue_wait = 0.0;
    double transmission_time = 0.0;
    double inference_time = 0.0;
    double e_tran = 0.0;
    double e_infer = 0.0;
    bool deadline_met = false;
};

struct RunMetrics {
    double success_rate = 1.0;
    double avg_processing_time = 0.0;  // queue wait + transmission + inference
    double throughput = 0.0;  // tokens delivered within deadline per second
    double energy_total_weighted = 0.0;
    double energy_total = 0.0;
    double energy_tran = 0.0;
    double energy_infer = 0.0;
    double energy_idle = 0.0;
    std::vector<double> regret_series;
    double regret_final = 0.0;
    std::vector<double> busy_time;  // per server, indexed by id-1
    std::vector<double> idle_time;  // per server, indexed by id-1
    std::int64_t completed = 0;
    std::int64_t total_requests = 0;
    std::int64_t slots_executed = 0;
    std::int64_t plans_emitted = 0;
    bool horizon_exhausted = false;
};

// Slot-driven event loop: reveal arrivals and deferred work, draw
// bandwidth, let the scheduler emit a plan, realize outcomes with
// proportional congestion sharing, update the bandit, accumulate metrics.
class Simulator {
public:
    explicit Simulator(ScenarioConfig cfg)
        : cfg_(std::move(cfg)),
          fleet_(Fleet::validate(cfg_.fleet)),
          energy_ref_(reference_energy(cfg_, fleet_)),
          arms_(fleet_.size()) {}

    using TraceSink = std::function<void(const TraceRecord&)>;
    using PlanHook = std::function<void(const AssignmentPlan&,
                                        const std::vector<ServerState>&,
                                        const std::vector<RequestInSlot>&)>;

    void set_trace_sink(TraceSink sink) { trace_sink_ = std::move(sink); }
    // Invoked for every emitted plan together with the residuals it was
    // built against; used by the constraint-safety checks.
    void set_plan_hook(PlanHook hook) { plan_hook_ = std::move(hook); }

    const ArmTable& arms() const { return arms_; }
    const Fleet& fleet() const { return fleet_; }
    double energy_ref() const { return energy_ref_; }

    RunMetrics run() {
        RngStream base(cfg_.seed);
        const Workload workload = generate_workload(cfg_, base.substream(1));
        RngStream sched_rng = base.substream(3);

        const int n = fleet_.size();
        const double slot_len = cfg_.slot_length;
        RegretOracle regret_mode = cfg_.regret_oracle;
        if (regret_mode == RegretOracle::automatic)
            regret_mode = cfg_.scheduler == SchedulerKind::cs_ucb
                              ? RegretOracle::best_observed
                              : RegretOracle::off;
        RegretLedger ledger(regret_mode == RegretOracle::exact
                                ? OracleSource::exact
                                : OracleSource::best_observed);

        struct ActiveJob {
            int service_id;
            int server_id;
            double reserved_bandwidth;
            double reserved_compute;
            double tran_end;
            double finish;
        };
        std::vector<ActiveJob> active;
        std::vector<RequestInSlot> deferred;
        std::unordered_map<int, ServiceRequest> by_id;

        RunMetrics m;
        m.busy_time.assign(static_cast<std::size_t>(fleet_.size()), 0.0);
        m.idle_time.assign(static_cast<std::size_t>(fleet_.size()), 0.0);
        m.total_requests = workload.total;
        double sum_elapsed = 0.0;
        double tokens_done = 0.0;
        double last_finish = 0.0;
        std::uint64_t rr_cursor = 0;

        std::int64_t slot = 0;
        for (; slot < cfg_.horizon; ++slot) {
            const double t0 = static_cast<double>(slot) * slot_len;
            std::erase_if(active, [&](const ActiveJob& j) { return j.finish <= t0; });

            std::vector<RequestInSlot> batch = std::move(deferred);
            deferred.clear();
            if (slot < static_cast<std::int64_t>(workload.slots.size()))
                for (const ServiceRequest& req :
                     workload.slots[static_cast<std::size_t>(slot)]) {
                    by_id.emplace(req.id, req);
                    batch.push_back({req, 0.0});
                }
            for (RequestInSlot& r : batch)
                r.queue_wait =
                    static_cast<double>(slot - r.request.arrival_slot) * slot_len;

            const bool drained =
                slot >= static_cast<std::int64_t>(workload.slots.size()) &&
                batch.empty() && active.empty();
            if (drained) break;

            // Scheduler-visible residuals use nominal bandwidth: the slot's
            // fluctuation draw is revealed only at execution.
            std::vector<ServerState> states(static_cast<std::size_t>(n));
            for (int j = 1; j <= n; ++j) {
                const ServerSpec& spec = fleet_.server(j);
                ServerState& st = states[static_cast<std::size_t>(j - 1)];
                st.residual_compute = spec.compute_capacity;
                st.residual_bandwidth = spec.bandwidth_capacity;
                for (const ActiveJob& job : active) {
                    if (job.server_id != j) continue;
                    st.residual_compute -= job.reserved_compute;
                    if (job.tran_end > t0) st.residual_bandwidth -= job.reserved_bandwidth;
                    st.queue_backlog += job.finish - t0;
                }
                st.residual_compute = std::max(0.0, st.residual_compute);
                st.residual_bandwidth = std::max(0.0, st.residual_bandwidth);
            }

            const AssignmentPlan plan = dispatch(batch, states, slot, sched_rng, rr_cursor);
            ++m.plans_emitted;
            if (plan_hook_) plan_hook_(plan, states, batch);

            // Reveal this slot's effective bandwidth per server.
            std::vector<double> effective(static_cast<std::size_t>(n));
            for (int j = 1; j <= n; ++j) {
                RngStream bw_rng = base.substream(
                    2, static_cast<std::uint64_t>(slot) * 1000 + static_cast<std::uint64_t>(j));
                effective[static_cast<std::size_t>(j - 1)] =
                    fluctuate_bandwidth(fleet_.server(j).bandwidth_capacity,
                                        cfg_.bandwidth_mode, cfg_.fluctuation_fraction,
                                        bw_rng);
            }

            // Realize transmissions: new flows share what the fluctuating
            // link leaves after carry-over commitments.
            std::vector<std::vector<const PlanEntry*>> per_server(
                static_cast<std::size_t>(n));
            for (const PlanEntry& e : plan.entries())
                per_server[static_cast<std::size_t>(e.server_id - 1)].push_back(&e);

            double slot_active_energy = 0.0;  // weighted tran+infer
            std::vector<PredictedService> realized;
            std::vector<ArmCredit> credits;
            for (int j = 1; j <= n; ++j) {
                const auto& flows = per_server[static_cast<std::size_t>(j - 1)];
                if (flows.empty()) continue;
                const ServerSpec& spec = fleet_.server(j);
                double carryover = 0.0;
                for (const ActiveJob& job : active)
                    if (job.server_id == j && job.tran_end > t0)
                        carryover += job.reserved_bandwidth;
                // Carry-over flows keep their rate; new flows share the
                // rest. The floor keeps a congested link from starving a
                // committed flow outright.
                const double eff = effective[static_cast<std::size_t>(j - 1)];
                const double available = std::max(0.1 * eff, eff - carryover);
                std::vector<double> demands;
                demands.reserve(flows.size());
                for (const PlanEntry* e : flows) demands.push_back(e->reserved_bandwidth);
                const std::vector<double> alloc = congestion_share(demands, available);
                for (std::size_t k = 0; k < flows.size(); ++k) {
                    const PlanEntry& e = *flows[k];
                    const ServiceRequest& req = by_id.at(e.service_id);
                    const double wait =
                        static_cast<double>(slot - req.arrival_slot) * slot_len;
                    const double t_tran =
                        transmission_time(req.input_bits, std::max(alloc[k], 1e-9));
                    const double t_infer = inference_time(
                        req, spec, e.reserved_compute / req.compute_demand);
                    const double finish = t0 + t_tran + t_infer;
                    const bool met = wait + t_tran + t_infer <= req.deadline + 1e-9;

                    active.push_back({e.service_id, j, e.reserved_bandwidth,
                                      e.reserved_compute, t0 + t_tran, finish});
                    last_finish = std::max(last_finish, finish);

                    const CostBreakdown cost =
                        energy_of_assignment(spec, t_tran, t_infer, cfg_.weights);
                    slot_active_energy += cost.weighted_total;
                    m.energy_tran += cost.e_tran;
                    m.energy_infer += cost.e_infer;

                    ++m.completed;
                    sum_elapsed += wait + t_tran + t_infer;
                    if (met) {
                        ++successes_;
                        tokens_done += static_cast<double>(req.total_tokens());
                    }
                    realized.push_back({req.id, wait + t_tran + t_infer, req.deadline});
                    credits.push_back(
                        {req.service_class, j, cost.weighted_total});
                    if (trace_sink_)
                        trace_sink_({slot, req.id, j, wait, t_tran, t_infer, cost.e_tran,
                                     cost.e_infer, met});
                }
            }

            // Idle accounting: jobs start at slot boundaries, so per-server
            // busy time inside the slot is the span to the latest finish.
            for (int j = 1; j <= n; ++j) {
                double max_finish = t0;
                for (const ActiveJob& job : active)
                    if (job.server_id == j) max_finish = std::max(max_finish, job.finish);
                const double busy = std::min(slot_len, max_finish - t0);
                const double idle = idle_energy(fleet_.server(j), busy, slot_len);
                m.energy_idle += idle;
                m.busy_time[static_cast<std::size_t>(j - 1)] += busy;
                m.idle_time[static_cast<std::size_t>(j - 1)] += slot_len - busy;
            }

            const FeasibilityReport f = evaluate_f(plan, states, fleet_, realized);
            const double reward =
                slot_reward(slot_active_energy, f.f_value, cfg_.bandit, energy_ref_);
            if (cfg_.scheduler == SchedulerKind::cs_ucb ||
                cfg_.scheduler == SchedulerKind::epsilon_greedy)
                update_arms(arms_, credits, f.f_value, cfg_.bandit, energy_ref_, slot);

            if (regret_mode == RegretOracle::exact) {
                const OracleSolution opt =
                    solve_exact(batch, states, fleet_, cfg_.weights, cfg_.bandit,
                                energy_ref_, slot, slot_len);
                // Regret compares the oracle against the value of the
                // chosen plan under the same scoring, not against the
                // realized (congestion-noisy) reward; identical decisions
                // must contribute zero regret.
                std::vector<int> choice(batch.size(), kDeferChoice);
                for (std::size_t i = 0; i < batch.size(); ++i)
                    for (const PlanEntry& e : plan.entries())
                        if (e.service_id == batch[i].request.id)
                            choice[i] = e.server_id;
                const auto chosen_score =
                    score_choice(batch, states, fleet_, cfg_.weights, cfg_.bandit,
                                 energy_ref_, slot_len, choice);
                ledger.record(chosen_score.value_or(reward), opt.reward, cfg_.bandit);
            } else if (regret_mode == RegretOracle::best_observed) {
                ledger.record(reward, 0.0, cfg_.bandit);
            }

            for (int id : plan.deferred()) {
                const ServiceRequest& req = by_id.at(id);
                deferred.push_back(
                    {req, static_cast<double>(slot + 1 - req.arrival_slot) * slot_len});
            }
        }

        m.slots_executed = slot;
        m.horizon_exhausted = m.completed < m.total_requests;
        if (m.completed > 0) {
            m.success_rate =
                static_cast<double>(successes_) / static_cast<double>(m.completed);
            m.avg_processing_time = sum_elapsed / static_cast<double>(m.completed);
        }
        const double total_time =
            std::max(last_finish, static_cast<double>(slot) * slot_len);
        if (total_time > 0.0) m.throughput = tokens_done / total_time;
        m.energy_total = m.energy_tran + m.energy_infer + m.energy_idle;
        m.energy_total_weighted = cfg_.weights.w_tran * m.energy_tran +
                                  cfg_.weights.w_infer * m.energy_infer +
                                  cfg_.weights.w_idle * m.energy_idle;
        m.regret_series = ledger.series();
        m.regret_final = ledger.final_regret();
        return m;
    }

private:
    AssignmentPlan dispatch(const std::vector<RequestInSlot>& batch,
                            const std::vector<ServerState>& states, std::int64_t slot,
                            RngStream& rng, std::uint64_t& rr_cursor) {
        switch (cfg_.scheduler) {
            case SchedulerKind::cs_ucb:
                return select_super_arm(batch, states, fleet_, arms_, cfg_.bandit, slot,
                                        cfg_.slot_length);
            case SchedulerKind::cloud_only:
                return cloud_only_select(batch, states, fleet_, slot, cfg_.slot_length);
            case SchedulerKind::edge_only:
                return edge_only_select(batch, states, fleet_, slot, cfg_.slot_length);
            case SchedulerKind::round_robin:
                return round_robin_select(batch, states, fleet_, slot, cfg_.slot_length,
                                          rr_cursor);
            case SchedulerKind::epsilon_greedy:
                return epsilon_greedy_select(batch, states, fleet_, arms_, cfg_.epsilon,
                                             rng, slot, cfg_.slot_length);
            case SchedulerKind::oracle_greedy:
                return oracle_greedy_select(batch, states, fleet_, cfg_.weights, slot,
                                            cfg_.slot_length);
        }
        throw std::logic_error("unknown scheduler kind");
    }

    ScenarioConfig cfg_;
    Fleet fleet_;
    double energy_ref_;
    ArmTable arms_;
    std::int64_t successes_ = 0;
    TraceSink trace_sink_;
    PlanHook plan_hook_;
};

inline RunMetrics run(const ScenarioConfig& cfg) { return Simulator(cfg).run(); }

}  // namespace perllm
