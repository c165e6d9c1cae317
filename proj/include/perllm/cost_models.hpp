#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "perllm/domain.hpp"

namespace perllm {

struct EnergyWeights {
    double w_tran = 1.0;
    double w_infer = 1.0;
    double w_idle = 1.0;
};

struct CostBreakdown {
    double t_tran = 0.0;
    double t_infer = 0.0;
    double e_tran = 0.0;
    double e_infer = 0.0;
    double e_idle = 0.0;
    double weighted_total = 0.0;
};

class ZeroBandwidth : public std::runtime_error {
public:
    ZeroBandwidth() : std::runtime_error("allocated bandwidth must be positive") {}
};

// Seconds to upload `input_bits` megabits at `allocated_bandwidth` Mbps.
inline double transmission_time(double input_bits, double allocated_bandwidth) {
    if (allocated_bandwidth <= 0.0) throw ZeroBandwidth();
    return input_bits / allocated_bandwidth;
}

// load_factor in (0, 1] models compute contention: reserved/demand capped at 1.
inline double inference_time(const ServiceRequest& req, const ServerSpec& server,
                             double load_factor = 1.0) {
    load_factor = std::clamp(load_factor, 1e-12, 1.0);
    return static_cast<double>(req.total_tokens()) /
           (server.tokens_per_second * load_factor);
}

// Transmission + inference energy of one assignment. Idle energy is a
// per-server per-slot quantity and accrues via idle_energy() instead.
inline CostBreakdown energy_of_assignment(const ServerSpec& server, double t_tran,
                                          double t_infer, const EnergyWeights& w) {
    CostBreakdown c;
    c.t_tran = t_tran;
    c.t_infer = t_infer;
    c.e_tran = server.power_transmit * t_tran;
    c.e_infer = server.power_active * t_infer;
    c.e_idle = 0.0;
    c.weighted_total = w.w_tran * c.e_tran + w.w_infer * c.e_infer;
    return c;
}

inline double idle_energy(const ServerSpec& server, double busy_time, double slot_length) {
    return server.power_idle * std::max(0.0, slot_length - busy_time);
}

// Proportional fair share: demands are granted in full while the link is
// under capacity, otherwise every flow gets capacity * demand / sum(demand).
inline std::vector<double> congestion_share(std::span<const double> demands,
                                            double capacity) {
    const double total = std::accumulate(demands.begin(), demands.end(), 0.0);
    std::vector<double> out(demands.begin(), demands.end());
    if (total <= capacity || total <= 0.0) return out;
    const double scale = capacity / total;
    for (double& d : out) d *= scale;
    return out;
}

}  // namespace perllm
