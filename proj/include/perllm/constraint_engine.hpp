#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "perllm/cost_models.hpp"
#include "perllm/domain.hpp"

namespace perllm {

enum class SlackDim { time, compute, bandwidth };

// Minimum normalized slack across the time / compute / bandwidth
// constraints. Nonnegative iff the scheme is feasible.
struct FeasibilityReport {
    double f_value = 1.0;
    double slack_time = 1.0;
    double slack_compute = 1.0;
    double slack_bandwidth = 1.0;
    bool violated = false;
    SlackDim worst_dimension = SlackDim::time;
};

struct PredictedService {
    int service_id = 0;
    double predicted_time = 0.0;  // queue wait + transmission + inference
    double deadline = 0.0;
};

// Time slack is taken per service and resource slack per server; the
// overall value is the minimum across all of them. Resource slack is
// measured against the slot residuals and normalized by nominal capacity.
inline FeasibilityReport evaluate_f(const AssignmentPlan& plan,
                                    std::span<const ServerState> states,
                                    const Fleet& fleet,
                                    std::span<const PredictedService> predicted) {
    FeasibilityReport r;
    for (const PredictedService& p : predicted) {
        const double slack = (p.deadline - p.predicted_time) / p.deadline;
        r.slack_time = std::min(r.slack_time, slack);
    }
    std::vector<double> bw(states.size(), 0.0), cu(states.size(), 0.0);
    for (const PlanEntry& e : plan.entries()) {
        bw[static_cast<std::size_t>(e.server_id - 1)] += e.reserved_bandwidth;
        cu[static_cast<std::size_t>(e.server_id - 1)] += e.reserved_compute;
    }
    for (std::size_t j = 0; j < states.size(); ++j) {
        const ServerSpec& spec = fleet.servers()[j];
        r.slack_compute = std::min(
            r.slack_compute, (states[j].residual_compute - cu[j]) / spec.compute_capacity);
        r.slack_bandwidth = std::min(
            r.slack_bandwidth,
            (states[j].residual_bandwidth - bw[j]) / spec.bandwidth_capacity);
    }
    r.f_value = std::min({r.slack_time, r.slack_compute, r.slack_bandwidth});
    r.violated = r.f_value < 0.0;
    if (r.f_value == r.slack_time)
        r.worst_dimension = SlackDim::time;
    else if (r.f_value == r.slack_compute)
        r.worst_dimension = SlackDim::compute;
    else
        r.worst_dimension = SlackDim::bandwidth;
    return r;
}

// ---------------------------------------------------------------------
// Reservation building, shared by every scheduler and by the oracle so
// that identical server choices always produce identical reservations.
// ---------------------------------------------------------------------

// Longest acceptable upload when the deadline is already lost: beyond
// this the flow would pin link capacity across too many slots.
inline constexpr double kMaxTranSlots = 4.0;

// Compute is reserved at full demand; bandwidth is sized so the upload
// finishes within min(slot, remaining time budget).
inline std::optional<PlanEntry> try_reserve(const ServiceRequest& req, double queue_wait,
                                            const ServerSpec& server,
                                            const ServerState& state, double slot_length,
                                            bool require_deadline) {
    if (state.residual_compute + 1e-12 < req.compute_demand) return std::nullopt;
    const double t_infer = inference_time(req, server);
    double time_left = req.deadline - queue_wait - t_infer;
    if (require_deadline && time_left <= 0.0) return std::nullopt;
    if (time_left <= 0.0) time_left = slot_length;  // already hopeless; just make progress
    const double bw_needed = require_deadline
                                 ? req.input_bits / time_left
                                 : req.input_bits / (kMaxTranSlots * slot_length);
    if (state.residual_bandwidth + 1e-12 < bw_needed) return std::nullopt;
    const double bw_want = req.input_bits / std::min(time_left, slot_length);
    const double reserved_bw = std::min(bw_want, state.residual_bandwidth);
    if (reserved_bw <= 0.0) return std::nullopt;
    return PlanEntry{req.id, server.id, reserved_bw, req.compute_demand};
}

inline double predicted_processing_time(const ServiceRequest& req, const ServerSpec& server,
                                        const PlanEntry& entry) {
    return transmission_time(req.input_bits, entry.reserved_bandwidth) +
           inference_time(req, server, entry.reserved_compute / req.compute_demand);
}

// Servers where the request fits C2/C3 residuals and the predicted
// processing time still meets the deadline (Algorithm line-5 filter).
inline std::vector<int> feasible_servers(const ServiceRequest& req, double queue_wait,
                                         const Fleet& fleet,
                                         std::span<const ServerState> states,
                                         double slot_length) {
    std::vector<int> out;
    for (const ServerSpec& s : fleet.servers()) {
        const ServerState& st = states[static_cast<std::size_t>(s.id - 1)];
        if (try_reserve(req, queue_wait, s, st, slot_length, /*require_deadline=*/true))
            out.push_back(s.id);
    }
    return out;
}

}  // namespace perllm
