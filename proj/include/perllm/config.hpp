#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "perllm/simulator.hpp"

namespace perllm {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what) {}
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
    ScenarioConfig scenario;
    std::vector<SchedulerKind> schedulers{SchedulerKind::cs_ucb};
    int replications = 1;
    bool emit_trace = false;
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view v, int line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(std::string(v), &used);
        if (used != v.size()) throw std::invalid_argument("trailing garbage");
        return d;
    } catch (const std::exception&) {
        throw ParseError(line, "expected a number, got '" + std::string(v) + "'");
    }
}

inline std::int64_t parse_int(std::string_view v, int line) {
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ParseError(line, "expected an integer, got '" + std::string(v) + "'");
    return out;
}

// "[lo, hi]" pairs.
inline std::pair<double, double> parse_range(std::string_view v, int line) {
    std::string s(trim(v));
    if (s.size() < 5 || s.front() != '[' || s.back() != ']')
        throw ParseError(line, "expected [lo, hi], got '" + s + "'");
    const auto comma = s.find(',');
    if (comma == std::string::npos)
        throw ParseError(line, "expected [lo, hi], got '" + s + "'");
    return {parse_double(trim(std::string_view(s).substr(1, comma - 1)), line),
            parse_double(trim(std::string_view(s).substr(comma + 1,
                                                         s.size() - comma - 2)),
                         line)};
}

}  // namespace config_detail

// Key/value text config; '#' starts a comment, unknown keys are errors,
// missing keys keep the documented defaults.
inline ExperimentSpec load_config(std::istream& in) {
    using namespace config_detail;
    ExperimentSpec spec;
    ScenarioConfig& sc = spec.scenario;

    // Fleet shape is configured via these knobs and rebuilt at the end.
    int edge_count = 5;
    ServerSpec edge{0, ServerKind::edge, 1000.0, 100.0, 100.0, 20.0, 30.0, 100.0};
    ServerSpec cloud{0, ServerKind::cloud, 5000.0, 300.0, 480.0, 50.0, 80.0, 300.0};

    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(line_no, "expected key = value");
        const std::string key{trim(line.substr(0, eq))};
        const std::string_view value = trim(line.substr(eq + 1));

        if (key == "requests") sc.total_requests = parse_int(value, line_no);
        else if (key == "arrival_rate") sc.arrival_rate = parse_double(value, line_no);
        else if (key == "slot_length") sc.slot_length = parse_double(value, line_no);
        else if (key == "deadline_range") {
            const auto [lo, hi] = parse_range(value, line_no);
            sc.deadline_lo = lo;
            sc.deadline_hi = hi;
        } else if (key == "input_bits_range") {
            const auto [lo, hi] = parse_range(value, line_no);
            sc.input_bits_lo = lo;
            sc.input_bits_hi = hi;
        } else if (key == "prompt_tokens_range") {
            const auto [lo, hi] = parse_range(value, line_no);
            sc.prompt_tokens_lo = static_cast<int>(lo);
            sc.prompt_tokens_hi = static_cast<int>(hi);
        } else if (key == "output_tokens_range") {
            const auto [lo, hi] = parse_range(value, line_no);
            sc.output_tokens_lo = static_cast<int>(lo);
            sc.output_tokens_hi = static_cast<int>(hi);
        } else if (key == "kappa") sc.kappa = parse_double(value, line_no);
        else if (key == "bandwidth_mode") {
            if (value == "stable") sc.bandwidth_mode = BandwidthMode::stable;
            else if (value == "fluctuating") sc.bandwidth_mode = BandwidthMode::fluctuating;
            else throw ParseError(line_no, "bandwidth_mode must be stable|fluctuating");
        } else if (key == "fluctuation") sc.fluctuation_fraction = parse_double(value, line_no);
        else if (key == "seed") sc.seed = static_cast<std::uint64_t>(parse_int(value, line_no));
        else if (key == "horizon") sc.horizon = parse_int(value, line_no);
        else if (key == "epsilon") sc.epsilon = parse_double(value, line_no);
        else if (key == "lambda") sc.bandit.lambda = parse_double(value, line_no);
        else if (key == "delta") sc.bandit.delta = parse_double(value, line_no);
        else if (key == "theta") sc.bandit.theta = parse_double(value, line_no);
        else if (key == "alpha") sc.bandit.alpha = parse_double(value, line_no);
        else if (key == "beta") sc.bandit.beta = parse_double(value, line_no);
        else if (key == "w_tran") sc.weights.w_tran = parse_double(value, line_no);
        else if (key == "w_infer") sc.weights.w_infer = parse_double(value, line_no);
        else if (key == "w_idle") sc.weights.w_idle = parse_double(value, line_no);
        else if (key == "edge_count") edge_count = static_cast<int>(parse_int(value, line_no));
        else if (key == "edge_compute") edge.compute_capacity = parse_double(value, line_no);
        else if (key == "edge_bandwidth") edge.bandwidth_capacity = parse_double(value, line_no);
        else if (key == "edge_power_active") edge.power_active = parse_double(value, line_no);
        else if (key == "edge_power_transmit") edge.power_transmit = parse_double(value, line_no);
        else if (key == "edge_power_idle") edge.power_idle = parse_double(value, line_no);
        else if (key == "edge_tokens_per_second") edge.tokens_per_second = parse_double(value, line_no);
        else if (key == "cloud_compute") cloud.compute_capacity = parse_double(value, line_no);
        else if (key == "cloud_bandwidth") cloud.bandwidth_capacity = parse_double(value, line_no);
        else if (key == "cloud_power_active") cloud.power_active = parse_double(value, line_no);
        else if (key == "cloud_power_transmit") cloud.power_transmit = parse_double(value, line_no);
        else if (key == "cloud_power_idle") cloud.power_idle = parse_double(value, line_no);
        else if (key == "cloud_tokens_per_second") cloud.tokens_per_second = parse_double(value, line_no);
        else if (key == "replications") spec.replications = static_cast<int>(parse_int(value, line_no));
        else if (key == "emit_trace") spec.emit_trace = (value == "true" || value == "1");
        else if (key == "schedulers") {
            spec.schedulers.clear();
            std::stringstream ss{std::string(value)};
            std::string item;
            while (std::getline(ss, item, ',')) {
                SchedulerKind k;
                if (!scheduler_kind_from_string(std::string(trim(item)), k))
                    throw ParseError(line_no, "unknown scheduler '" + item + "'");
                spec.schedulers.push_back(k);
            }
        } else {
            throw ParseError(line_no, "unknown key '" + key + "'");
        }
    }

    sc.fleet.clear();
    for (int j = 1; j <= edge_count; ++j) {
        ServerSpec e = edge;
        e.id = j;
        sc.fleet.push_back(e);
    }
    cloud.id = edge_count + 1;
    sc.fleet.push_back(cloud);

    if (sc.deadline_lo > sc.deadline_hi)
        throw ValidationError("deadline_range lo>hi");
    if (sc.input_bits_lo > sc.input_bits_hi || sc.input_bits_lo <= 0)
        throw ValidationError("input_bits_range must be positive and ordered");
    if (sc.prompt_tokens_lo > sc.prompt_tokens_hi || sc.prompt_tokens_lo <= 0)
        throw ValidationError("prompt_tokens_range must be positive and ordered");
    if (sc.output_tokens_lo > sc.output_tokens_hi || sc.output_tokens_lo <= 0)
        throw ValidationError("output_tokens_range must be positive and ordered");
    if (sc.fluctuation_fraction < 0.0 || sc.fluctuation_fraction >= 1.0)
        throw ValidationError("fluctuation must lie in [0, 1)");
    if (sc.total_requests < 0) throw ValidationError("requests must be >= 0");
    if (sc.epsilon < 0.0 || sc.epsilon > 1.0)
        throw ValidationError("epsilon must lie in [0, 1]");
    if (sc.bandit.delta <= 0.0) throw ValidationError("delta must be > 0");
    if (sc.bandit.lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (sc.bandit.theta < 0.0) throw ValidationError("theta must be >= 0");
    if (sc.bandit.alpha <= 0.0 || sc.bandit.alpha > 1.0)
        throw ValidationError("alpha must lie in (0, 1]");
    if (sc.bandit.beta <= 0.0 || sc.bandit.beta > 1.0)
        throw ValidationError("beta must lie in (0, 1]");
    if (spec.replications < 1) throw ValidationError("replications must be >= 1");
    if (spec.schedulers.empty()) throw ValidationError("schedulers must be nonempty");
    Fleet::validate(sc.fleet);  // surfaces fleet errors with server names
    return spec;
}

}  // namespace perllm
