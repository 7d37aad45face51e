#pragma once

#include <cstdint>
#include <random>

namespace assembloid {

// Stateless 64-bit mixer (splitmix64 finalizer). Used to derive independent
// seeds for (scene, trial) substreams so results do not depend on worker
// scheduling.
std::uint64_t mix_bits(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Deterministic random source. mt19937_64 is fully specified by the standard,
// and the uniform/normal transforms below are spelled out by hand so streams
// are byte-identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    // Standard normal via Box-Muller; pairs are cached.
    double normal();

private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace assembloid
