#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "perllm/constraint_engine.hpp"
#include "perllm/domain.hpp"

namespace perllm {

struct BanditConfig {
    double lambda = 2.0;  // constraint-reward coefficient
    double delta = 1.0;   // exploration coefficient
    double theta = 1.0;   // penalty weight
    double alpha = 1.0;   // approximation coefficients for regret accounting
    double beta = 1.0;
};

struct ArmStats {
    std::int64_t play_count = 0;
    double mean_reward = 0.0;
    std::int64_t last_update_slot = -1;
};

// Base arms are (service class, server) pairs: 16 * N of them.
class ArmTable {
public:
    explicit ArmTable(int server_count) : n_(server_count) {
        stats_.resize(static_cast<std::size_t>(kServiceClasses) *
                      static_cast<std::size_t>(server_count));
    }

    ArmStats& at(int service_class, int server_id) {
        return stats_[index(service_class, server_id)];
    }
    const ArmStats& at(int service_class, int server_id) const {
        return stats_[index(service_class, server_id)];
    }
    int server_count() const { return n_; }

    // Debug snapshot: one record per arm, stable field order.
    void dump(std::ostream& os) const {
        for (int c = 0; c < kServiceClasses; ++c)
            for (int j = 1; j <= n_; ++j) {
                const ArmStats& a = at(c, j);
                os << "class=" << c << " server=" << j << " count=" << a.play_count
                   << " mean=" << a.mean_reward << "\n";
            }
    }

private:
    std::size_t index(int service_class, int server_id) const {
        return static_cast<std::size_t>(service_class) * static_cast<std::size_t>(n_) +
               static_cast<std::size_t>(server_id - 1);
    }
    int n_;
    std::vector<ArmStats> stats_;
};

// Violation penalty: proportional to the degree of violation, zero when
// the scheme is feasible.
inline double penalty(const FeasibilityReport& report) {
    return std::max(0.0, -report.f_value);
}

// Unplayed arms score +infinity so every reachable arm is explored once.
inline double ucb_score(const ArmStats& stats, double t, const BanditConfig& cfg,
                        double penalty_value = 0.0) {
    if (stats.play_count == 0) return std::numeric_limits<double>::infinity();
    return stats.mean_reward +
           cfg.delta * std::sqrt(std::log(t) / static_cast<double>(stats.play_count)) +
           cfg.theta * penalty_value;
}

// Super-arm reward: normalized weighted energy plus the constraint
// satisfaction term.
inline double slot_reward(double weighted_total_energy, double f_value,
                          const BanditConfig& cfg, double energy_ref) {
    return -(weighted_total_energy / energy_ref) + cfg.lambda * f_value;
}

struct RequestInSlot {
    ServiceRequest request;
    double queue_wait = 0.0;  // seconds already spent deferred
};

// Greedy sequential super-arm construction: requests in ascending
// slack order, each placed on the feasible server with the highest UCB
// score (ties to the lowest server id). Requests with no feasible server
// fall back to the cloud when it is resource-feasible ignoring the
// deadline, and are deferred otherwise.
inline AssignmentPlan select_super_arm(std::span<const RequestInSlot> batch,
                                       std::span<const ServerState> states,
                                       const Fleet& fleet, const ArmTable& arms,
                                       const BanditConfig& cfg, std::int64_t slot,
                                       double slot_length) {
    std::vector<ServerState> work(states.begin(), states.end());

    std::vector<std::size_t> order(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) order[k] = k;
    auto optimistic_slack = [&](const RequestInSlot& r) {
        double best = std::numeric_limits<double>::infinity();
        for (const ServerSpec& s : fleet.servers()) {
            const double t = inference_time(r.request, s) +
                             r.request.input_bits / s.bandwidth_capacity;
            best = std::min(best, t);
        }
        return r.request.deadline - r.queue_wait - best;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = optimistic_slack(batch[a]);
        const double sb = optimistic_slack(batch[b]);
        if (sa != sb) return sa < sb;
        return batch[a].request.id < batch[b].request.id;
    });

    const double t_for_ucb = std::max<double>(2.0, static_cast<double>(slot));
    std::vector<PlanEntry> entries;
    std::vector<int> deferred;
    for (std::size_t k : order) {
        const RequestInSlot& r = batch[k];
        int chosen = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int sid : feasible_servers(r.request, r.queue_wait, fleet, work, slot_length)) {
            const double score =
                ucb_score(arms.at(r.request.service_class, sid), t_for_ucb, cfg);
            if (score > best_score) {
                best_score = score;
                chosen = sid;
            }
        }
        std::optional<PlanEntry> entry;
        if (chosen >= 0) {
            entry = try_reserve(r.request, r.queue_wait, fleet.server(chosen),
                                work[static_cast<std::size_t>(chosen - 1)], slot_length,
                                /*require_deadline=*/true);
        } else {
            // "Assigned to a more resource-rich server": cloud, ignoring C1.
            entry = try_reserve(r.request, r.queue_wait, fleet.cloud(),
                                work[static_cast<std::size_t>(fleet.cloud_id() - 1)],
                                slot_length, /*require_deadline=*/false);
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

// Per-arm credit: each played arm receives its own service's normalized
// energy plus the shared constraint term.
struct ArmCredit {
    int service_class = 0;
    int server_id = 0;
    double weighted_energy = 0.0;
};

inline void update_arms(ArmTable& arms, std::span<const ArmCredit> credits,
                        double f_value, const BanditConfig& cfg, double energy_ref,
                        std::int64_t slot) {
    for (const ArmCredit& c : credits) {
        const double r = -(c.weighted_energy / energy_ref) + cfg.lambda * f_value;
        ArmStats& a = arms.at(c.service_class, c.server_id);
        a.play_count += 1;
        a.mean_reward += (r - a.mean_reward) / static_cast<double>(a.play_count);
        a.last_update_slot = slot;
    }
}

enum class OracleSource { exact, best_observed };

class OracleUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cumulative approximate regret: sum over slots of
// alpha*beta*R_oracle - R(S_t).
class RegretLedger {
public:
    explicit RegretLedger(OracleSource source) : source_(source) {}

    void record(double realized_reward, double oracle_reward, const BanditConfig& cfg) {
        if (source_ == OracleSource::best_observed) {
            best_observed_ = std::max(best_observed_, realized_reward);
            oracle_reward = best_observed_;
        }
        const double prev = series_.empty() ? 0.0 : series_.back();
        series_.push_back(prev + cfg.alpha * cfg.beta * oracle_reward - realized_reward);
    }

    OracleSource source() const { return source_; }
    const std::vector<double>& series() const { return series_; }
    double final_regret() const { return series_.empty() ? 0.0 : series_.back(); }

private:
    OracleSource source_;
    double best_observed_ = -std::numeric_limits<double>::infinity();
    std::vector<double> series_;
};

}  // namespace perllm
