#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "perllm/bandit_cs_ucb.hpp"
#include "perllm/constraint_engine.hpp"
#include "perllm/domain.hpp"
#include "perllm/rng.hpp"

namespace perllm {

enum class SchedulerKind {
    cs_ucb,
    cloud_only,
    edge_only,
    round_robin,
    epsilon_greedy,
    oracle_greedy,
};

inline const char* to_string(SchedulerKind k) {
    switch (k) {
        case SchedulerKind::cs_ucb: return "cs_ucb";
        case SchedulerKind::cloud_only: return "cloud_only";
        case SchedulerKind::edge_only: return "edge_only";
        case SchedulerKind::round_robin: return "round_robin";
        case SchedulerKind::epsilon_greedy: return "epsilon_greedy";
        case SchedulerKind::oracle_greedy: return "oracle_greedy";
    }
    return "unknown";
}

inline bool scheduler_kind_from_string(const std::string& s, SchedulerKind& out) {
    for (SchedulerKind k :
         {SchedulerKind::cs_ucb, SchedulerKind::cloud_only, SchedulerKind::edge_only,
          SchedulerKind::round_robin, SchedulerKind::epsilon_greedy,
          SchedulerKind::oracle_greedy}) {
        if (s == to_string(k)) {
            out = k;
            return true;
        }
    }
    return false;
}

namespace detail {

// Shared skeleton: walk the batch in ascending-slack order, let the
// chooser pick among deadline-feasible servers, defer on failure.
// `fallback` picks a server ignoring C1 when nothing is deadline-feasible
// (or returns -1 to defer).
inline AssignmentPlan greedy_plan(
    std::span<const RequestInSlot> batch, std::span<const ServerState> states,
    const Fleet& fleet, std::int64_t slot, double slot_length,
    const std::function<int(const RequestInSlot&, const std::vector<int>&,
                            std::span<const ServerState>)>& chooser,
    const std::function<int(const RequestInSlot&, std::span<const ServerState>)>&
        fallback,
    bool deadline_aware = true) {
    std::vector<ServerState> work(states.begin(), states.end());

    std::vector<std::size_t> order(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) order[k] = k;
    auto slack = [&](const RequestInSlot& r) {
        double best = std::numeric_limits<double>::infinity();
        for (const ServerSpec& s : fleet.servers())
            best = std::min(best, inference_time(r.request, s) +
                                      r.request.input_bits / s.bandwidth_capacity);
        return r.request.deadline - r.queue_wait - best;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = slack(batch[a]);
        const double sb = slack(batch[b]);
        if (sa != sb) return sa < sb;
        return batch[a].request.id < batch[b].request.id;
    });

    std::vector<PlanEntry> entries;
    std::vector<int> deferred;
    for (std::size_t k : order) {
        const RequestInSlot& r = batch[k];
        std::vector<int> feas;
        if (deadline_aware) {
            feas = feasible_servers(r.request, r.queue_wait, fleet, work, slot_length);
        } else {
            for (const ServerSpec& s : fleet.servers())
                if (try_reserve(r.request, r.queue_wait, s,
                                work[static_cast<std::size_t>(s.id - 1)], slot_length,
                                /*require_deadline=*/false))
                    feas.push_back(s.id);
        }
        int sid = feas.empty() ? -1 : chooser(r, feas, work);
        const bool require_deadline = deadline_aware && sid >= 0;
        if (sid < 0) sid = fallback(r, work);
        std::optional<PlanEntry> entry;
        if (sid >= 1) {
            entry = try_reserve(r.request, r.queue_wait, fleet.server(sid),
                                work[static_cast<std::size_t>(sid - 1)], slot_length,
                                require_deadline);
        }
        if (entry) {
            ServerState& st = work[static_cast<std::size_t>(entry->server_id - 1)];
            st.residual_bandwidth -= entry->reserved_bandwidth;
            st.residual_compute -= entry->reserved_compute;
            entries.push_back(*entry);
        } else {
            deferred.push_back(r.request.id);
        }
    }

    std::vector<ServiceRequest> reqs;
    reqs.reserve(batch.size());
    for (const RequestInSlot& r : batch) reqs.push_back(r.request);
    return AssignmentPlan::build(slot, std::move(entries), std::move(deferred), states,
                                 reqs);
}

inline double load_fraction(const ServerSpec& spec, const ServerState& st) {
    return std::max(1.0 - st.residual_compute / spec.compute_capacity,
                    1.0 - st.residual_bandwidth / spec.bandwidth_capacity);
}

inline int resource_feasible(const ServiceRequest& req, double wait,
                             const ServerSpec& spec, const ServerState& st,
                             double slot_length) {
    return try_reserve(req, wait, spec, st, slot_length, /*require_deadline=*/false)
               ? spec.id
               : -1;
}

}  // namespace detail

// FineInfer proxy: everything goes to the cloud, overflow queues up.
inline AssignmentPlan cloud_only_select(std::span<const RequestInSlot> batch,
                                        std::span<const ServerState> states,
                                        const Fleet& fleet, std::int64_t slot,
                                        double slot_length) {
    auto cloud = [&](const RequestInSlot& r, std::span<const ServerState> work) {
        return detail::resource_feasible(r.request, r.queue_wait, fleet.cloud(),
                                         work[static_cast<std::size_t>(fleet.cloud_id() - 1)],
                                         slot_length);
    };
    auto chooser = [&](const RequestInSlot& r, const std::vector<int>&,
                       std::span<const ServerState> work) { return cloud(r, work); };
    return detail::greedy_plan(batch, states, fleet, slot, slot_length, chooser, cloud,
                               /*deadline_aware=*/false);
}

// AGOD proxy: least-loaded feasible edge, overflow queues up.
inline AssignmentPlan edge_only_select(std::span<const RequestInSlot> batch,
                                       std::span<const ServerState> states,
                                       const Fleet& fleet, std::int64_t slot,
                                       double slot_length) {
    auto best_edge = [&](const RequestInSlot& r, std::span<const ServerState> work,
                         bool require_deadline) {
        int best = -1;
        double best_load = std::numeric_limits<double>::infinity();
        for (const ServerSpec& s : fleet.servers()) {
            if (s.is_cloud()) continue;
            const ServerState& st = work[static_cast<std::size_t>(s.id - 1)];
            if (!try_reserve(r.request, r.queue_wait, s, st, slot_length, require_deadline))
                continue;
            const double load = detail::load_fraction(s, st);
            if (load < best_load) {
                best_load = load;
                best = s.id;
            }
        }
        return best;
    };
    auto chooser = [&](const RequestInSlot& r, const std::vector<int>&,
                       std::span<const ServerState> work) { return best_edge(r, work, false); };
    auto fallback = [&](const RequestInSlot& r, std::span<const ServerState> work) {
        return best_edge(r, work, false);
    };
    return detail::greedy_plan(batch, states, fleet, slot, slot_length, chooser, fallback,
                               /*deadline_aware=*/false);
}

// Generic control: cycles through the resource-feasible list.
inline AssignmentPlan round_robin_select(std::span<const RequestInSlot> batch,
                                         std::span<const ServerState> states,
                                         const Fleet& fleet, std::int64_t slot,
                                         double slot_length, std::uint64_t& cursor) {
    auto chooser = [&](const RequestInSlot&, const std::vector<int>& feas,
                       std::span<const ServerState>) {
        return feas[static_cast<std::size_t>(cursor++ % feas.size())];
    };
    auto fallback = [&](const RequestInSlot& r, std::span<const ServerState> work) {
        return detail::resource_feasible(r.request, r.queue_wait, fleet.cloud(),
                                         work[static_cast<std::size_t>(fleet.cloud_id() - 1)],
                                         slot_length);
    };
    return detail::greedy_plan(batch, states, fleet, slot, slot_length, chooser, fallback,
                               /*deadline_aware=*/false);
}

// RewardlessGuidance proxy: epsilon-greedy exploitation of the arm means
// over resource-feasible servers. Like the other baseline proxies it has
// no deadline-aware filter; that mechanism belongs to cs_ucb.
inline AssignmentPlan epsilon_greedy_select(std::span<const RequestInSlot> batch,
                                            std::span<const ServerState> states,
                                            const Fleet& fleet, const ArmTable& arms,
                                            double epsilon, RngStream& rng,
                                            std::int64_t slot, double slot_length) {
    auto chooser = [&](const RequestInSlot& r, const std::vector<int>& feas,
                       std::span<const ServerState>) {
        if (rng.uniform01() < epsilon)
            return feas[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(feas.size()) - 1))];
        int best = feas.front();
        double best_mean = -std::numeric_limits<double>::infinity();
        for (int sid : feas) {
            const ArmStats& a = arms.at(r.request.service_class, sid);
            const double mean = a.play_count == 0 ? 0.0 : a.mean_reward;
            if (mean > best_mean) {
                best_mean = mean;
                best = sid;
            }
        }
        return best;
    };
    auto fallback = [&](const RequestInSlot& r, std::span<const ServerState> work) {
        return detail::resource_feasible(r.request, r.queue_wait, fleet.cloud(),
                                         work[static_cast<std::size_t>(fleet.cloud_id() - 1)],
                                         slot_length);
    };
    return detail::greedy_plan(batch, states, fleet, slot, slot_length, chooser, fallback,
                               /*deadline_aware=*/false);
}

// Myopic true-cost control: picks the feasible server with the lowest
// predicted weighted energy for each request.
inline AssignmentPlan oracle_greedy_select(std::span<const RequestInSlot> batch,
                                           std::span<const ServerState> states,
                                           const Fleet& fleet, const EnergyWeights& weights,
                                           std::int64_t slot, double slot_length) {
    auto chooser = [&](const RequestInSlot& r, const std::vector<int>& feas,
                       std::span<const ServerState> work) {
        int best = feas.front();
        double best_cost = std::numeric_limits<double>::infinity();
        for (int sid : feas) {
            const ServerSpec& s = fleet.server(sid);
            const auto entry =
                try_reserve(r.request, r.queue_wait, s,
                            work[static_cast<std::size_t>(sid - 1)], slot_length,
                            /*require_deadline=*/false);
            if (!entry) continue;
            const double t_tran =
                transmission_time(r.request.input_bits, entry->reserved_bandwidth);
            const double t_infer = inference_time(r.request, s);
            const double cost =
                energy_of_assignment(s, t_tran, t_infer, weights).weighted_total;
            if (cost < best_cost) {
                best_cost = cost;
                best = sid;
            }
        }
        return best;
    };
    auto fallback = [&](const RequestInSlot& r, std::span<const ServerState> work) {
        return detail::resource_feasible(r.request, r.queue_wait, fleet.cloud(),
                                         work[static_cast<std::size_t>(fleet.cloud_id() - 1)],
                                         slot_length);
    };
    return detail::greedy_plan(batch, states, fleet, slot, slot_length, chooser, fallback,
                               /*deadline_aware=*/false);
}

}  // namespace perllm
