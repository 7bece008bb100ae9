#pragma once

#include <cstdint>
#include <random>

namespace nrc {

/// Seeded random source with platform-independent variates.
///
/// The standard library fixes the mt19937_64 bit stream but leaves the
/// distribution algorithms implementation-defined, so uniform and normal draws
/// are computed here directly from raw engine output.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    /// Standard normal via the Box-Muller transform.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Mixes a master seed with a task index into an independent child seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace nrc
