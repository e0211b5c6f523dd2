#pragma once

#include <cstdint>
#include <random>

namespace walker3 {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Per-trial seed derivation so that sweeps are reproducible regardless of the
// worker-pool schedule.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Deterministic RNG. mt19937_64 has a standard-mandated output sequence and
// the uniform conversion below avoids distribution objects, whose streams are
// implementation defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // +1 or -1 with equal probability.
    int sign() { return (next_u64() & 1u) ? 1 : -1; }

private:
    std::mt19937_64 gen_;
};

}  // namespace walker3
