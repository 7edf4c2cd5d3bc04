#ifndef NMQ_RNG_HPP
#define NMQ_RNG_HPP

#include <cstdint>
#include <random>

#include "nmq/complex_matrix.hpp"

namespace nmq {

// SplitMix64 step; used for seed derivation so that per-trajectory streams
// are decorrelated and reproducible.
std::uint64_t splitmix64(std::uint64_t x);

// Seed-splitting rule: stream i of a run with base seed s is seeded with
// splitmix64(s + GOLDEN * (i + 1)). Documented in the README; every piece of
// ensemble parallelism uses this one rule.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Deterministic random stream. Gaussian variates use hand-rolled polar
// transforms instead of std::normal_distribution so that sequences do not
// depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform on [0, 1).
    double uniform();
    // Uniform on (0, 1].
    double uniform_positive();
    // Exp(1).
    double exponential();
    // Circularly symmetric complex Gaussian with E|z|^2 = 1 (so the real and
    // imaginary parts are N(0, 1/2)).
    cplx standard_complex_normal();
    // Real N(0, 1).
    double standard_normal();

private:
    std::mt19937_64 eng_;
};

// FNV-1a over raw bytes; used for config/file/kernel fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace nmq

#endif
