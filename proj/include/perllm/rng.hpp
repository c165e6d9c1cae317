#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace perllm {

// Deterministic splitmix64 stream. Used everywhere instead of <random>
// engines/distributions so that draw sequences are identical across
// platforms and standard-library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    // Knuth multiplication method; fine for the arrival rates used here.
    int poisson(double mean) {
        if (mean < 0.0) throw std::invalid_argument("poisson mean < 0");
        if (mean == 0.0) return 0;
        const double limit = std::exp(-mean);
        double prod = 1.0;
        int k = 0;
        do {
            prod *= uniform01();
            ++k;
        } while (prod > limit);
        return k - 1;
    }

    // Derives an independent substream, e.g. one per (purpose, slot, server).
    RngStream substream(std::uint64_t tag_a, std::uint64_t tag_b = 0) const {
        std::uint64_t mixed = state_;
        mixed ^= tag_a * 0xff51afd7ed558ccdull + 0x2545f4914f6cdd1dull;
        mixed ^= tag_b * 0xc4ceb9fe1a85ec53ull + 0x9e3779b97f4a7c15ull;
        return RngStream(mixed);
    }

private:
    std::uint64_t state_;
};

}  // namespace perllm
