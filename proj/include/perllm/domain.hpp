#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace perllm {

enum class ServerKind { edge, cloud };

// Static description of one server. The fleet is 1-indexed; the cloud
// server always carries the largest id.
struct ServerSpec {
    int id = 0;
    ServerKind kind = ServerKind::edge;
    double compute_capacity = 0.0;    // abstract compute units per second
    double bandwidth_capacity = 0.0;  // Mbps, nominal
    double power_active = 0.0;        // W while running inference
    double power_transmit = 0.0;      // W while receiving an upload
    double power_idle = 0.0;          // W on standby
    double tokens_per_second = 0.0;

    bool is_cloud() const { return kind == ServerKind::cloud; }
};

// Per-slot view of what is still available on a server.
struct ServerState {
    double residual_compute = 0.0;
    double residual_bandwidth = 0.0;
    double queue_backlog = 0.0;  // seconds of committed work
};

struct ServiceRequest {
    int id = 0;
    std::int64_t arrival_slot = 0;
    double input_bits = 0.0;  // megabits uploaded before inference
    int prompt_tokens = 0;
    int output_tokens = 0;
    double deadline = 0.0;  // seconds from arrival
    double compute_demand = 0.0;
    int service_class = 0;

    int total_tokens() const { return prompt_tokens + output_tokens; }
};

class FleetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Validated server set: contiguous ids 1..N, exactly one cloud at id N.
class Fleet {
public:
    static Fleet validate(std::vector<ServerSpec> specs) {
        if (specs.empty()) throw FleetError("NoCloud: fleet is empty");
        std::sort(specs.begin(), specs.end(),
                  [](const ServerSpec& a, const ServerSpec& b) { return a.id < b.id; });
        int clouds = 0;
        int cloud_id = -1;
        for (std::size_t k = 0; k < specs.size(); ++k) {
            const ServerSpec& s = specs[k];
            if (s.id != static_cast<int>(k) + 1)
                throw FleetError("NonContiguousIds: server id " + std::to_string(s.id));
            if (s.compute_capacity <= 0 || s.bandwidth_capacity <= 0 ||
                s.power_active <= 0 || s.power_transmit <= 0 || s.power_idle <= 0 ||
                s.tokens_per_second <= 0)
                throw FleetError("NonPositiveCapacity: server " + std::to_string(s.id));
            if (s.is_cloud()) {
                if (++clouds > 1)
                    throw FleetError("MultipleClouds: server " + std::to_string(s.id));
                cloud_id = s.id;
            }
        }
        if (clouds == 0) throw FleetError("NoCloud: no server has kind=cloud");
        if (cloud_id != static_cast<int>(specs.size()))
            throw FleetError("CloudNotLast: cloud must carry the largest id");
        for (const ServerSpec& s : specs) {
            if (s.is_cloud()) continue;
            if (s.compute_capacity >= specs.back().compute_capacity ||
                s.tokens_per_second >= specs.back().tokens_per_second)
                throw FleetError("CloudNotDominant: server " + std::to_string(s.id));
        }
        return Fleet(std::move(specs));
    }

    const std::vector<ServerSpec>& servers() const { return servers_; }
    const ServerSpec& server(int id) const { return servers_.at(static_cast<std::size_t>(id - 1)); }
    const ServerSpec& cloud() const { return servers_.back(); }
    int cloud_id() const { return servers_.back().id; }
    int size() const { return static_cast<int>(servers_.size()); }

private:
    explicit Fleet(std::vector<ServerSpec> specs) : servers_(std::move(specs)) {}
    std::vector<ServerSpec> servers_;
};

inline constexpr int kSizeBuckets = 4;
inline constexpr int kDeadlineBuckets = 4;
inline constexpr int kServiceClasses = kSizeBuckets * kDeadlineBuckets;

// Quartile boundaries for the (size, deadline) bucketing of a request.
struct ClassBounds {
    std::array<double, 3> size{};      // ascending
    std::array<double, 3> deadline{};  // ascending
};

namespace detail {
// Values exactly on a boundary fall into the lower bucket.
inline int bucket_of(double value, const std::array<double, 3>& bounds) {
    int b = 0;
    for (double edge : bounds)
        if (value > edge) ++b;
    return b;
}
}  // namespace detail

// Deterministic class in 0..15: size_bucket * 4 + deadline_bucket, where
// size is measured as input_bits + total tokens.
inline int classify_service(const ServiceRequest& req, const ClassBounds& bounds) {
    const double size_metric = req.input_bits + static_cast<double>(req.total_tokens());
    const int sb = detail::bucket_of(size_metric, bounds.size);
    const int db = detail::bucket_of(req.deadline, bounds.deadline);
    return sb * kDeadlineBuckets + db;
}

struct PlanEntry {
    int service_id = 0;
    int server_id = 0;
    double reserved_bandwidth = 0.0;  // Mbps
    double reserved_compute = 0.0;    // units/s
};

class PlanViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One slot's joint assignment (super arm). The factory enforces the hard
// constraints: every batch service appears exactly once across
// entries/deferred (C4) and per-server reservation sums stay within the
// given residuals (C2, C3).
class AssignmentPlan {
public:
    static AssignmentPlan build(std::int64_t slot, std::vector<PlanEntry> entries,
                                std::vector<int> deferred,
                                std::span<const ServerState> states,
                                std::span<const ServiceRequest> batch) {
        std::unordered_set<int> seen;
        for (const PlanEntry& e : entries) {
            if (!seen.insert(e.service_id).second)
                throw PlanViolation("C4: service " + std::to_string(e.service_id) +
                                    " assigned more than once");
        }
        for (int id : deferred) {
            if (!seen.insert(id).second)
                throw PlanViolation("C4: service " + std::to_string(id) +
                                    " both assigned and deferred");
        }
        for (const ServiceRequest& req : batch) {
            if (!seen.count(req.id))
                throw PlanViolation("C4: service " + std::to_string(req.id) +
                                    " missing from plan");
        }
        if (seen.size() != batch.size())
            throw PlanViolation("C4: plan mentions services outside the batch");

        std::unordered_map<int, double> bw_sum, cu_sum;
        for (const PlanEntry& e : entries) {
            if (e.server_id < 1 || e.server_id > static_cast<int>(states.size()))
                throw PlanViolation("unknown server id " + std::to_string(e.server_id));
            bw_sum[e.server_id] += e.reserved_bandwidth;
            cu_sum[e.server_id] += e.reserved_compute;
        }
        constexpr double kSlack = 1e-9;
        for (const auto& [sid, bw] : bw_sum) {
            const ServerState& st = states[static_cast<std::size_t>(sid - 1)];
            if (bw > st.residual_bandwidth + kSlack)
                throw PlanViolation("C3: bandwidth oversubscribed on server " +
                                    std::to_string(sid));
            if (cu_sum[sid] > st.residual_compute + kSlack)
                throw PlanViolation("C2: compute oversubscribed on server " +
                                    std::to_string(sid));
        }
        return AssignmentPlan(slot, std::move(entries), std::move(deferred));
    }

    std::int64_t slot() const { return slot_; }
    const std::vector<PlanEntry>& entries() const { return entries_; }
    const std::vector<int>& deferred() const { return deferred_; }

private:
    AssignmentPlan(std::int64_t slot, std::vector<PlanEntry> entries, std::vector<int> deferred)
        : slot_(slot), entries_(std::move(entries)), deferred_(std::move(deferred)) {}

    std::int64_t slot_ = 0;
    std::vector<PlanEntry> entries_;
    std::vector<int> deferred_;
};

// Realized result of executing one service.
struct ServiceOutcome {
    int service_id = 0;
    int server_id = 0;
    double transmission_time = 0.0;
    double inference_time = 0.0;
    double queue_wait = 0.0;  // slots spent deferred, in seconds
    bool met_deadline = false;

    double processing_time() const { return transmission_time + inference_time; }
    double elapsed() const { return queue_wait + processing_time(); }
};

struct ServerEnergy {
    double e_tran = 0.0;
    double e_infer = 0.0;
    double e_idle = 0.0;
};

struct SlotOutcome {
    std::vector<ServiceOutcome> services;
    std::vector<ServerEnergy> per_server;  // indexed by server id - 1
    double slot_reward = 0.0;
    double slot_feasibility = 0.0;  // realized f(y)
};

}  // namespace perllm
