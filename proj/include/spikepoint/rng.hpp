#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace spikepoint {

inline constexpr uint64_t kGolden64 = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; full-avalanche mix of a 64-bit word.
inline uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Counter-based hash: any (a, b) cell of a seeded stream is addressable
// without sequencing, so encoding order never matters.
inline uint64_t counter_hash(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t h = mix64(seed + kGolden64);
    h = mix64(h ^ (a + kGolden64));
    h = mix64(h ^ (b + 0xbf58476d1ce4e5b9ULL));
    return h;
}

// Top 53 bits -> [0, 1).
inline double unit_double(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Deterministic sequential generator (splitmix64). Self-contained so results
// are stable across compilers and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(mix64(seed + kGolden64)) {}

    uint64_t next() {
        state_ += kGolden64;
        return mix64(state_);
    }

    double uniform01() { return unit_double(next()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n). Lemire multiply-shift.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
    }

    int64_t range(int64_t lo, int64_t hi) {  // inclusive lo, exclusive hi
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo)));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Exact Poisson sample by summing exponentials until the budget is spent.
    uint64_t poisson(double lambda) {
        uint64_t k = 0;
        double acc = 0.0;
        while (true) {
            acc += -std::log(1.0 - uniform01());
            if (acc > lambda) break;
            ++k;
        }
        return k;
    }

    // Derive an independent child seed.
    uint64_t fork(uint64_t salt) { return mix64(state_ ^ mix64(salt + kGolden64)); }

private:
    uint64_t state_;
};

}  // namespace spikepoint
