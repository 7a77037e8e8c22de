#include "spikepoint/spike_coding.hpp"

#include <cmath>

#include "spikepoint/errors.hpp"
#include "spikepoint/rng.hpp"

namespace spikepoint {

bool poisson_bit(double value, int64_t t, int64_t d, uint64_t seed) {
    double p = value < 1.0 ? value : 1.0;
    return unit_double(counter_hash(seed, static_cast<uint64_t>(t), static_cast<uint64_t>(d))) < p;
}

SpikeTrain poisson_encode(std::span<const double> values, int64_t T, uint64_t seed,
                          bool clamp_negative) {
    if (T < 1) throw ConfigError("poisson_encode: T must be >= 1");
    SpikeTrain train;
    train.T = T;
    train.D = static_cast<int64_t>(values.size());
    train.bits.resize(static_cast<size_t>(train.T * train.D));
    for (int64_t d = 0; d < train.D; ++d) {
        double v = values[static_cast<size_t>(d)];
        if (v < 0.0) {
            if (!clamp_negative) {
                throw EncodingError("poisson_encode: negative value at index " +
                                    std::to_string(d) +
                                    " (apply the absolute-value transform first)");
            }
            v = 0.0;
        }
        for (int64_t t = 0; t < T; ++t) {
            train.bits[static_cast<size_t>(t * train.D + d)] =
                poisson_bit(v, t, d, seed) ? 1 : 0;
        }
    }
    return train;
}

std::vector<double> decode_rate(const SpikeTrain& train) {
    std::vector<double> out(static_cast<size_t>(train.D), 0.0);
    for (int64_t t = 0; t < train.T; ++t) {
        for (int64_t d = 0; d < train.D; ++d) {
            out[static_cast<size_t>(d)] += train.at(t, d);
        }
    }
    for (double& v : out) v /= static_cast<double>(train.T);
    return out;
}

MreResult mre(std::span<const double> raw_distances, double sd, int64_t T, int trials,
              uint64_t seed) {
    if (sd <= 0.0) throw DomainError("mre: sd must be positive");
    if (T < 1) throw ConfigError("mre: T must be >= 1");
    if (trials < 1) throw ConfigError("mre: trials must be >= 1");

    double sum_raw = 0.0, sum_rescaled = 0.0;
    int64_t counted = 0;
    for (size_t i = 0; i < raw_distances.size(); ++i) {
        double d = raw_distances[i];
        if (d < 0.0) throw DomainError("mre: distances must be non-negative");
        if (d == 0.0) continue;  // relative error undefined at zero
        ++counted;
        double p_raw = std::min(d, 1.0);
        double p_scaled = std::min(d / sd, 1.0);
        for (int trial = 0; trial < trials; ++trial) {
            uint64_t trial_seed = counter_hash(seed, i, static_cast<uint64_t>(trial));
            int64_t ones_raw = 0, ones_scaled = 0;
            for (int64_t t = 0; t < T; ++t) {
                if (poisson_bit(p_raw, t, 0, trial_seed)) ++ones_raw;
                if (poisson_bit(p_scaled, t, 1, trial_seed)) ++ones_scaled;
            }
            double dec_raw = static_cast<double>(ones_raw) / static_cast<double>(T);
            double dec_scaled =
                sd * static_cast<double>(ones_scaled) / static_cast<double>(T);
            sum_raw += std::abs(dec_raw - d) / d;
            sum_rescaled += std::abs(dec_scaled - d) / d;
        }
    }
    if (counted == 0) throw DegenerateInputError("mre: no nonzero distances");
    double denom = static_cast<double>(counted) * trials;
    return {sum_raw / denom, sum_rescaled / denom};
}

MreResult mre_folded_normal(double sigma, int64_t n, int64_t T, int trials, uint64_t seed) {
    if (sigma <= 0.0) throw DomainError("mre_folded_normal: sigma must be positive");
    Rng rng(seed);
    std::vector<double> offsets(static_cast<size_t>(n));
    for (auto& v : offsets) v = rng.normal(0.0, sigma);
    double mean = 0.0;
    for (double v : offsets) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : offsets) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> distances(offsets.size());
    for (size_t i = 0; i < offsets.size(); ++i) distances[i] = std::abs(offsets[i]);
    return mre(distances, sd, T, trials, rng.fork(0x3a7));
}

double cv_closed_form(double d) {
    if (d <= 0.0) throw DomainError("cv_closed_form: d must be in (0, 1]");
    if (d > 1.0) throw DomainError("cv_closed_form: d must be in (0, 1]");
    return std::sqrt(1.0 / d - 1.0);
}

CvResult cv_empirical(double d, int64_t n, int64_t T, uint64_t seed) {
    if (d <= 0.0 || d > 1.0) throw DomainError("cv_empirical: d must be in (0, 1]");
    if (n < 1) throw ConfigError("cv_empirical: n must be >= 1");
    if (T < 1) throw ConfigError("cv_empirical: T must be >= 1");

    // Pool the bits of all n trials; cv is the dispersion of that population.
    int64_t ones = 0;
    for (int64_t j = 0; j < n; ++j) {
        uint64_t trial_seed = counter_hash(seed, static_cast<uint64_t>(j), 0);
        for (int64_t t = 0; t < T; ++t) {
            if (poisson_bit(d, t, 0, trial_seed)) ++ones;
        }
    }
    double total = static_cast<double>(n * T);
    double p_hat = static_cast<double>(ones) / total;
    double var = p_hat * (1.0 - p_hat);
    CvResult r;
    r.alpha = p_hat / d;
    r.cv = p_hat > 0.0 ? std::sqrt(var) / p_hat : 0.0;
    return r;
}

CodingReport coding_report(const CodingReportParams& params, uint64_t seed) {
    CodingReport report;
    report.mre = mre_folded_normal(params.sd, params.n_values, params.T, params.trials,
                                   mix64(seed + 2));
    report.d_values = params.d_values;
    for (double d : params.d_values) {
        report.cv_closed.push_back(cv_closed_form(d));
        report.cv_empirical.push_back(cv_empirical(d, params.cv_n, params.T, mix64(seed + 3)).cv);
    }
    // alpha distribution probed at the middle value
    double d_mid = params.d_values[params.d_values.size() / 2];
    report.alpha = alpha_distribution(d_mid, params.cv_n, params.T, params.cv_reps,
                                      mix64(seed + 4));
    return report;
}

AlphaStats alpha_distribution(double d, int64_t n, int64_t T, int reps, uint64_t seed) {
    if (reps < 1) throw ConfigError("alpha_distribution: reps must be >= 1");
    std::vector<double> alphas(static_cast<size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        alphas[static_cast<size_t>(r)] =
            cv_empirical(d, n, T, counter_hash(seed, static_cast<uint64_t>(r), 17)).alpha;
    }
    double mean = 0.0;
    for (double a : alphas) mean += a;
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double a : alphas) ss += (a - mean) * (a - mean);
    AlphaStats s;
    s.mean = mean;
    s.stddev = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    return s;
}

}  // namespace spikepoint
