#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "perllm/bandit_cs_ucb.hpp"
#include "perllm/constraint_engine.hpp"
#include "perllm/cost_models.hpp"
#include "perllm/domain.hpp"

namespace perllm {

class InstanceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OracleSolution {
    AssignmentPlan plan;
    double reward = 0.0;
    std::int64_t enumerated_count = 0;
};

namespace oracle_detail {

// Cheapest eventual placement of a deferred service. Time and energy use
// the same expected-allocation model as serving (the flow shares the link
// in proportion to demand; alone it gets the whole link), so deferral is
// never cheaper or faster than the same placement made now — it is the
// cheapest real placement, one slot later. The phantom reservation uses
// the admission-control rate (upload sized to finish within min(slot,
// remaining time budget)), matching what a real reservation would hold.
struct FuturePlacement {
    int server_id = 0;
    double weighted_energy = 0.0;
    double t_tran = 0.0;
    double t_infer = 0.0;
    double reserve_rate = 0.0;
};

inline FuturePlacement cheapest_future_placement(const ServiceRequest& req,
                                                 double queue_wait, const Fleet& fleet,
                                                 const EnergyWeights& w,
                                                 double slot_length) {
    FuturePlacement best{0, std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
    for (const ServerSpec& s : fleet.servers()) {
        const double t_infer = inference_time(req, s);
        double time_left = req.deadline - queue_wait - t_infer;
        if (time_left <= 0.0) time_left = slot_length;
        const double t_tran = req.input_bits / s.bandwidth_capacity;
        const double e = energy_of_assignment(s, t_tran, t_infer, w).weighted_total;
        if (e < best.weighted_energy)
            best = {s.id, e, t_tran, t_infer,
                    req.input_bits / std::min(time_left, slot_length)};
    }
    return best;
}

}  // namespace oracle_detail

// Scores one per-service choice vector (server ids 1..N, or kDeferChoice
// for deferral) under the same reservation rules the schedulers use.
// Returns nullopt when some placement violates C2/C3. Shared by the exact
// oracle and by tests that compare scheduler plans against it.
inline constexpr int kDeferChoice = 0;  // choice value meaning "defer"

inline std::optional<double> score_choice(std::span<const RequestInSlot> batch,
                                          std::span<const ServerState> states,
                                          const Fleet& fleet, const EnergyWeights& weights,
                                          const BanditConfig& cfg, double energy_ref,
                                          double slot_length,
                                          std::span<const int> choice) {
    std::vector<ServerState> work(states.begin(), states.end());
    std::vector<PredictedService> predicted;
    // First pass: validate reservations (C2/C3) and accumulate per-server
    // upload demand; deferral charges its pseudo-cost immediately.
    std::vector<double> server_bits(states.size(), 0.0);
    struct Served {
        std::size_t index;
        int server_id;
    };
    std::vector<Served> served;
    double energy = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const RequestInSlot& r = batch[i];
        if (choice[i] == kDeferChoice) {
            // Deferral postpones the cost of serving, it does not avoid
            // it: charge the cheapest eventual placement's energy and a
            // phantom reservation on that server, plus one slot of wait.
            // Uncapped and never rejected, so all-defer stays scoreable;
            // oversubscription just drives f negative.
            const auto future = oracle_detail::cheapest_future_placement(
                r.request, r.queue_wait, fleet, weights, slot_length);
            energy += future.weighted_energy;
            predicted.push_back(
                {r.request.id,
                 r.queue_wait + slot_length + future.t_tran + future.t_infer,
                 r.request.deadline});
            ServerState& fst = work[static_cast<std::size_t>(future.server_id - 1)];
            fst.residual_compute -= r.request.compute_demand;
            fst.residual_bandwidth -= future.reserve_rate;
            continue;
        }
        const int sid = choice[i];
        const ServerSpec& spec = fleet.server(sid);
        ServerState& st = work[static_cast<std::size_t>(sid - 1)];
        const auto entry = try_reserve(r.request, r.queue_wait, spec, st, slot_length,
                                       /*require_deadline=*/false);
        if (!entry) return std::nullopt;  // violates C2/C3
        st.residual_bandwidth -= entry->reserved_bandwidth;
        st.residual_compute -= entry->reserved_compute;
        server_bits[static_cast<std::size_t>(sid - 1)] += r.request.input_bits;
        served.push_back({i, sid});
    }
    // Second pass: expected times and energies under the realized
    // allocation model — flows on a server share the link in proportion
    // to demand, so every flow on server j finishes its upload after
    // (total bits on j) / capacity_j; a lone flow gets the whole link.
    for (const Served& sv : served) {
        const RequestInSlot& r = batch[sv.index];
        const ServerSpec& spec = fleet.server(sv.server_id);
        const double t_tran =
            server_bits[static_cast<std::size_t>(sv.server_id - 1)] /
            spec.bandwidth_capacity;
        const double t_infer = inference_time(r.request, spec);
        energy += energy_of_assignment(spec, t_tran, t_infer, weights).weighted_total;
        predicted.push_back(
            {r.request.id, r.queue_wait + t_tran + t_infer, r.request.deadline});
    }
    // Idle energy is excluded from the reward; it is tracked in run
    // metrics instead.

    // f(y) over the candidate, same per-index reading as evaluate_f.
    double f = 1.0;
    for (const PredictedService& p : predicted)
        f = std::min(f, (p.deadline - p.predicted_time) / p.deadline);
    for (std::size_t j = 0; j < states.size(); ++j) {
        const ServerSpec& spec = fleet.servers()[j];
        f = std::min(f, work[j].residual_compute / spec.compute_capacity);
        f = std::min(f, work[j].residual_bandwidth / spec.bandwidth_capacity);
    }
    return slot_reward(energy, f, cfg, energy_ref);
}

// Exhaustive search over every per-service server choice plus deferral as
// an extra pseudo-choice. Reservations follow the same rules as the
// schedulers so rewards are directly comparable. Deterministic tie-break:
// the lexicographically smallest assignment vector (servers ascending,
// deferral last) wins.
inline OracleSolution solve_exact(std::span<const RequestInSlot> batch,
                                  std::span<const ServerState> states, const Fleet& fleet,
                                  const EnergyWeights& weights, const BanditConfig& cfg,
                                  double energy_ref, std::int64_t slot,
                                  double slot_length) {
    const int n = fleet.size();
    const std::size_t m = batch.size();
    const int defer_choice = n;  // choices per service: server ids 1..n, then defer

    double candidates = 1.0;
    for (std::size_t i = 0; i < m; ++i) candidates *= static_cast<double>(n + 1);
    if (candidates > 1e6)
        throw InstanceTooLarge("oracle instance exceeds the enumeration guard");

    std::vector<int> choice(m, 0);  // 0..n-1 -> server id choice+1, n -> defer
    std::vector<int> best_choice;
    double best_reward = -std::numeric_limits<double>::infinity();
    std::int64_t examined = 0;

    std::vector<ServerState> work(states.size());
    std::vector<int> mapped(m, 0);  // choice values translated for score_choice

    const auto evaluate = [&]() -> std::optional<double> {
        for (std::size_t i = 0; i < m; ++i)
            mapped[i] = choice[i] == defer_choice ? kDeferChoice : choice[i] + 1;
        return score_choice(batch, states, fleet, weights, cfg, energy_ref, slot_length,
                            mapped);
    };

    while (true) {
        ++examined;
        if (const auto reward = evaluate(); reward && *reward > best_reward) {
            best_reward = *reward;
            best_choice = choice;
        }
        // mixed-radix increment, service 0 most significant (lexicographic order)
        std::size_t pos = m;
        while (pos > 0) {
            if (++choice[pos - 1] <= defer_choice) break;
            choice[pos - 1] = 0;
            --pos;
        }
        if (pos == 0 || m == 0) break;
    }

    // All-defer is always resource-feasible, so a best choice exists.
    std::vector<PlanEntry> plan_entries;
    std::vector<int> deferred;
    work.assign(states.begin(), states.end());
    for (std::size_t i = 0; i < m; ++i) {
        const RequestInSlot& r = batch[i];
        if (best_choice.empty() || best_choice[i] == defer_choice) {
            deferred.push_back(r.request.id);
            continue;
        }
        const int sid = best_choice[i] + 1;
        ServerState& st = work[static_cast<std::size_t>(sid - 1)];
        const auto entry = try_reserve(r.request, r.queue_wait, fleet.server(sid), st,
                                       slot_length, /*require_deadline=*/false);
        st.residual_bandwidth -= entry->reserved_bandwidth;
        st.residual_compute -= entry->reserved_compute;
        plan_entries.push_back(*entry);
    }
    std::vector<ServiceRequest> reqs;
    reqs.reserve(m);
    for (const RequestInSlot& r : batch) reqs.push_back(r.request);
    AssignmentPlan plan = AssignmentPlan::build(slot, std::move(plan_entries),
                                                std::move(deferred), states, reqs);
    return OracleSolution{std::move(plan), best_reward, examined};
}

}  // namespace perllm
