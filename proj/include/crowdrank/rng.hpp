#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace crowdrank {

/// Seeded random source whose output is identical on every platform.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The standard library distributions are not (their algorithms are
/// implementation-defined), so every transform below is written out:
///   - uniform(): top 53 bits of one engine draw, scaled to [0, 1)
///   - normal(): Box-Muller, one pair per two uniforms, second value cached
///   - below(n): rejection sampling on the top bits, no modulo bias
///   - categorical(): inverse CDF on a running sum
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Seed for an independent stream derived from (seed, stream) via splitmix64.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }
    std::size_t below(std::size_t n);

    /// Index drawn with probability weights[i] / sum(weights).
    std::size_t categorical(std::span<const double> weights);

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace crowdrank
