#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace l2rdas {

/// Seeded generator with fully spelled-out transforms so that every draw is a
/// deterministic function of the seed and call sequence (std:: distributions
/// are implementation-defined, so they are avoided here).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(gen_() % span);
    }

    /// Standard normal via Box-Muller (two uniform draws per sample).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// Exponential with unit mean.
    double exponential() {
        double u = uniform();
        if (u >= 1.0) u = 1.0 - 0x1.0p-53;
        return -std::log(1.0 - u);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace l2rdas
