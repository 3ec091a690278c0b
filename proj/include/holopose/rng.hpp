#pragma once

#include <cstdint>

namespace holopose {

/// SplitMix64 step; used to expand seeds into generator state.
std::uint64_t splitmix64(std::uint64_t &state);

/// xoshiro256** 1.0 (Blackman & Vigna) with portable uniform and Gaussian
/// draws, so generated datasets are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    /// Independent stream for (seed, stream) pairs, e.g. one per scene index.
    static Rng stream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal via the Box-Muller transform (no cached spare).
    double normal();
    double normal(double mean, double sigma);

private:
    std::uint64_t s_[4];
};

}  // namespace holopose
