#pragma once

#include <cstdint>
#include <random>

namespace dbp {

/// Platform-independent random source: std::mt19937_64 plus bit-level
/// conversions. The standard distributions are implementation-defined, so they
/// are not used anywhere that must be reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, bound) by rejection; bound must be positive.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Standard normal by Box-Muller on uniform().
    double normal();

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer over (base, stream): independent seeds for sub-streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace dbp
