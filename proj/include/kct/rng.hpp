#ifndef KCT_RNG_HPP
#define KCT_RNG_HPP

#include <cmath>
#include <cstdint>

namespace kct {

// Deterministic random layer. Replication i of a run seeded with `master`
// always uses derive_replication_seed(master, i), so estimates are
// reproducible bit-for-bit regardless of how replications are scheduled
// across threads.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_replication_seed(std::uint64_t master, std::uint64_t replication) {
    std::uint64_t s = master + (replication + 1) * 0x9E3779B97F4A7C15ULL;
    return splitmix64(s);
}

// xoshiro256++ with splitmix64 state expansion. Stream layout is part of the
// output contract: changing it changes every emitted CSV/JSON byte.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1]; used where a strictly positive draw is required.
    double uniform01_pos() { return 1.0 - uniform01(); }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Marsaglia polar method with one cached deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    // Knuth product method below the threshold, Hormann's PTRS transformed
    // rejection above it. Both consume only uniform draws.
    long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) return poisson_knuth(mean);
        return poisson_ptrs(mean);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    long poisson_knuth(double mean) {
        const double limit = std::exp(-mean);
        long k = 0;
        double prod = uniform01_pos();
        while (prod > limit) {
            ++k;
            prod *= uniform01_pos();
        }
        return k;
    }

    long poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01_pos();
            const double us = 0.5 - std::abs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * loglam - mean - std::lgamma(kf + 1.0)) {
                return static_cast<long>(kf);
            }
        }
    }

    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace kct

#endif  // KCT_RNG_HPP
