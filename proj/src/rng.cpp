#include "crowdrank/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crowdrank {

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    if (n == 1) return 0;
    const auto bound = static_cast<std::uint64_t>(n);
    const int shift = std::countl_zero(bound - 1);
    for (;;) {
        const std::uint64_t candidate = engine_() >> shift;
        if (candidate < bound) return static_cast<std::size_t>(candidate);
    }
}

std::size_t Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("Rng::categorical: negative or NaN weight");
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: weights sum to zero");
    const double target = uniform() * total;
    double running = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        running += weights[i];
        last_positive = i;
        if (target < running) return i;
    }
    return last_positive;
}

}  // namespace crowdrank
