#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mixtac {

// Deterministic RNG used everywhere a seed appears in a manifest.
// std::*_distribution output is implementation-defined, so the few
// distributions we need are derived from raw mt19937_64 draws by hand;
// the same seed then yields the same stream on any toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1) with 53 bits of mantissa
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection-free modulo bias is irrelevant at our n << 2^64, but
        // keep the widening-multiply trick anyway since it is one line
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller, one value per call (the spare is discarded so the
        // draw count per event stays fixed)
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Knuth multiplication method; fine for the small means we use
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 64.0) {
            // normal approximation keeps the draw count bounded
            double v = normal(mean, std::sqrt(mean));
            return v < 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(v));
        }
        double limit = std::exp(-mean);
        double prod = uniform01();
        std::uint64_t n = 0;
        while (prod > limit) {
            prod *= uniform01();
            ++n;
        }
        return n;
    }

    // Independent child seed (trial i of a seeded run); splitmix64 step.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
};

} // namespace mixtac
