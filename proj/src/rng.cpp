#include "nmq/rng.hpp"

#include <cmath>
#include <numbers>

namespace nmq {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base + 0x9E3779B97F4A7C15ULL * (index + 1));
}

double Rng::uniform() {
    // 53-bit mantissa from the top bits.
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_positive() {
    return 1.0 - uniform();
}

double Rng::exponential() {
    return -std::log(uniform_positive());
}

cplx Rng::standard_complex_normal() {
    // sqrt(Exp(1)) radius with uniform phase: E|z|^2 = 1, E z^2 = 0.
    const double r = std::sqrt(exponential());
    const double phi = 2.0 * std::numbers::pi * uniform();
    return cplx(r * std::cos(phi), r * std::sin(phi));
}

double Rng::standard_normal() {
    const double r = std::sqrt(2.0 * exponential());
    const double phi = 2.0 * std::numbers::pi * uniform();
    return r * std::cos(phi);
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace nmq
