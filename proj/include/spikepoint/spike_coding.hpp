#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace spikepoint {

// T x D binary spike tensor.
struct SpikeTrain {
    int64_t T = 0;
    int64_t D = 0;
    std::vector<uint8_t> bits;  // row-major, bits[t * D + d]

    uint8_t at(int64_t t, int64_t d) const { return bits[static_cast<size_t>(t * D + d)]; }
};

struct MreResult {
    double delta_raw = 0.0;       // encode |d| directly
    double delta_rescaled = 0.0;  // encode |d| / sd, decode, multiply back
};

struct CvResult {
    double cv = 0.0;
    double alpha = 0.0;  // scale factor mean(decoded) / d
};

struct AlphaStats {
    double mean = 0.0;
    double stddev = 0.0;
};

// Aggregate coding-quality report: reconstruction error of the coder plus
// the dispersion statistics per probed value.
struct CodingReport {
    MreResult mre;
    std::vector<double> d_values;
    std::vector<double> cv_closed;
    std::vector<double> cv_empirical;
    AlphaStats alpha;
};

struct CodingReportParams {
    double sd = 0.052;          // folded-normal calibration scale
    int64_t n_values = 10'000;  // distances for the MRE estimate
    int64_t T = 16;
    int trials = 20;            // encodings per distance
    int64_t cv_n = 10'000;      // trials per cv estimate
    int cv_reps = 30;           // repetitions for the alpha distribution
    std::vector<double> d_values{0.2, 0.5, 0.8};
};

CodingReport coding_report(const CodingReportParams& params, uint64_t seed);

// Stateless rate coder: bit[t, d] ~ Bernoulli(min(values[d], 1)), addressed by
// a counter-based generator so every (t, d) cell is order-independent.
// Negative inputs are rejected unless clamp_negative is set (ablation rows
// that feed raw signed offsets lose the negative part by clamping to 0).
SpikeTrain poisson_encode(std::span<const double> values, int64_t T, uint64_t seed,
                          bool clamp_negative = false);

// Single Bernoulli draw for cell (t, d); poisson_encode is this cell by cell.
bool poisson_bit(double value, int64_t t, int64_t d, uint64_t seed);

// Per-column mean over T.
std::vector<double> decode_rate(const SpikeTrain& train);

// Mean relative error of rate-coded reconstruction before and after the
// 1/sd rescale, averaged over `trials` independent encodings.
MreResult mre(std::span<const double> raw_distances, double sd, int64_t T, int trials,
              uint64_t seed);

// Convenience calibration: draw n folded-normal distances |N(0, sigma^2)|,
// use their pooled sample standard deviation as the rescale divisor, and
// report both MREs.
MreResult mre_folded_normal(double sigma, int64_t n, int64_t T, int trials, uint64_t seed);

// cv = sqrt(1/d - 1) for d in (0, 1].
double cv_closed_form(double d);

// Empirical coefficient of variation of the bit population from n trials of
// T steps each, plus the decoded-scale factor alpha.
CvResult cv_empirical(double d, int64_t n, int64_t T, uint64_t seed);

// Distribution of alpha over independent repetitions of cv_empirical.
AlphaStats alpha_distribution(double d, int64_t n, int64_t T, int reps, uint64_t seed);

}  // namespace spikepoint
