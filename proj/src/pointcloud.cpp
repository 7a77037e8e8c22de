#include "spikepoint/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spikepoint/rng.hpp"

namespace spikepoint {

GroupingVariant GroupingVariant::table_row(int row) {
    GroupingVariant v;
    auto set = [&](NegativeHandling nh, Corner c, Branches b, Fusion f) {
        v.negative_handling = nh;
        v.corner = c;
        v.branches = b;
        v.fusion = f;
    };
    switch (row) {
        case 1: set(NegativeHandling::raw, Corner::centroid, Branches::single_branch, Fusion::add); break;
        case 2: set(NegativeHandling::unit_normalize, Corner::centroid, Branches::single_branch, Fusion::add); break;
        case 3: set(NegativeHandling::unit_normalize, Corner::min_corner, Branches::single_branch, Fusion::add); break;
        case 4: set(NegativeHandling::absolute, Corner::min_corner, Branches::single_branch, Fusion::add); break;
        case 5: set(NegativeHandling::absolute, Corner::centroid, Branches::single_branch, Fusion::add); break;
        case 6: set(NegativeHandling::absolute, Corner::min_corner, Branches::double_branch, Fusion::add); break;
        case 7: set(NegativeHandling::absolute, Corner::min_corner, Branches::double_branch, Fusion::concat); break;
        case 8: set(NegativeHandling::absolute, Corner::centroid, Branches::double_branch, Fusion::add); break;
        case 9: set(NegativeHandling::raw, Corner::centroid, Branches::double_branch, Fusion::add); break;
        case 10: set(NegativeHandling::unit_normalize, Corner::centroid, Branches::double_branch, Fusion::add); break;
        default: throw ConfigError("grouping table row must be 1..10, got " + std::to_string(row));
    }
    return v;
}

std::string GroupingVariant::name() const {
    std::string s;
    switch (negative_handling) {
        case NegativeHandling::absolute: s += "abs"; break;
        case NegativeHandling::unit_normalize: s += "unit"; break;
        case NegativeHandling::raw: s += "raw"; break;
    }
    switch (corner) {
        case Corner::min_corner: s += "+min"; break;
        case Corner::centroid: s += "+centroid"; break;
        case Corner::centroid_shifted: s += "+centroid_shifted"; break;
    }
    s += branches == Branches::double_branch ? "+double" : "+single";
    if (branches == Branches::double_branch) {
        s += fusion == Fusion::add ? "+add" : "+concat";
    }
    return s;
}

PointSet random_sample(const PointMatrix& source, int64_t N, uint64_t seed) {
    if (source.n == 0) throw DegenerateInputError("random_sample: empty source");
    if (N <= 0) throw ConfigError("random_sample: N must be positive");

    Rng rng(seed);
    PointSet out;
    out.n = N;
    out.xyz.resize(static_cast<size_t>(N) * 3);
    auto copy_row = [&](int64_t dst, int64_t src) {
        for (int c = 0; c < 3; ++c) {
            out.xyz[static_cast<size_t>(3 * dst + c)] = source.coord(src, c);
        }
    };
    if (source.n >= N) {
        // partial Fisher-Yates: first N entries of a seeded permutation
        std::vector<int64_t> idx(static_cast<size_t>(source.n));
        std::iota(idx.begin(), idx.end(), 0);
        for (int64_t i = 0; i < N; ++i) {
            int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(source.n - i)));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
            copy_row(i, idx[static_cast<size_t>(i)]);
        }
    } else {
        for (int64_t i = 0; i < N; ++i) {
            copy_row(i, static_cast<int64_t>(rng.below(static_cast<uint64_t>(source.n))));
        }
    }
    return out;
}

namespace {

double dist2(const PointMatrix& pts, int64_t a, int64_t b) {
    double dx = pts.x(a) - pts.x(b);
    double dy = pts.y(a) - pts.y(b);
    double dz = pts.z(a) - pts.z(b);
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<int32_t> fps_from(const PointSet& points, int64_t M, int32_t first_index) {
    int64_t n = points.n;
    if (M > n) throw ConfigError("fps: M exceeds point count");
    if (M <= 0) throw ConfigError("fps: M must be positive");

    std::vector<int32_t> picked;
    picked.reserve(static_cast<size_t>(M));
    picked.push_back(first_index);

    std::vector<double> min_d2(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) min_d2[static_cast<size_t>(i)] = dist2(points, i, first_index);

    while (static_cast<int64_t>(picked.size()) < M) {
        int64_t best = 0;
        double best_d2 = -1.0;
        for (int64_t i = 0; i < n; ++i) {
            double d2 = min_d2[static_cast<size_t>(i)];
            if (d2 > best_d2) {  // strict: ties keep the lowest index
                best_d2 = d2;
                best = i;
            }
        }
        picked.push_back(static_cast<int32_t>(best));
        for (int64_t i = 0; i < n; ++i) {
            double d2 = dist2(points, i, best);
            if (d2 < min_d2[static_cast<size_t>(i)]) min_d2[static_cast<size_t>(i)] = d2;
        }
    }
    return picked;
}

std::vector<int32_t> fps(const PointSet& points, int64_t M, uint64_t seed) {
    if (points.n == 0) throw DegenerateInputError("fps: empty point set");
    Rng rng(seed);
    return fps_from(points, M, static_cast<int32_t>(rng.below(static_cast<uint64_t>(points.n))));
}

std::vector<int32_t> knn(const PointSet& points, const std::vector<int32_t>& centroid_idx,
                         int64_t K) {
    int64_t n = points.n;
    if (K > n) throw ConfigError("knn: K exceeds point count");
    if (K <= 0) throw ConfigError("knn: K must be positive");

    std::vector<int32_t> out(centroid_idx.size() * static_cast<size_t>(K));
    std::vector<std::pair<double, int32_t>> order(static_cast<size_t>(n));
    for (size_t m = 0; m < centroid_idx.size(); ++m) {
        int64_t c = centroid_idx[m];
        for (int64_t i = 0; i < n; ++i) {
            order[static_cast<size_t>(i)] = {dist2(points, i, c), static_cast<int32_t>(i)};
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<ptrdiff_t>(K), order.end());
        for (int64_t k = 0; k < K; ++k) {
            out[m * static_cast<size_t>(K) + static_cast<size_t>(k)] =
                order[static_cast<size_t>(k)].second;
        }
    }
    return out;
}

GroupedInput standardize_groups(const PointSet& points, const std::vector<int32_t>& centroid_idx,
                                const std::vector<int32_t>& member_idx, int64_t K,
                                const GroupingVariant& variant) {
    int64_t M = static_cast<int64_t>(centroid_idx.size());
    if (static_cast<int64_t>(member_idx.size()) != M * K) {
        throw ShapeError("standardize_groups: member index matrix is not M x K");
    }
    for (int32_t idx : member_idx) {
        if (idx < 0 || idx >= points.n) {
            throw ShapeError("standardize_groups: member index out of range");
        }
    }

    GroupedInput g;
    g.M = M;
    g.K = K;
    g.centroids.resize(static_cast<size_t>(M) * 3);
    g.member_idx = member_idx;
    g.channel1.resize(static_cast<size_t>(M * K) * 6);
    g.channel2.resize(static_cast<size_t>(M) * 3);

    // Offsets of every member from its centroid, pooled over the sample.
    std::vector<double> offsets(static_cast<size_t>(M * K) * 3);
    double sum = 0.0, sum_abs = 0.0;
    for (int64_t m = 0; m < M; ++m) {
        int64_t c = centroid_idx[static_cast<size_t>(m)];
        for (int ci = 0; ci < 3; ++ci) {
            double v = points.coord(c, ci);
            g.centroids[static_cast<size_t>(3 * m + ci)] = v;
            g.channel2[static_cast<size_t>(3 * m + ci)] = v;
        }
        for (int64_t k = 0; k < K; ++k) {
            int64_t p = member_idx[static_cast<size_t>(m * K + k)];
            for (int ci = 0; ci < 3; ++ci) {
                double d = points.coord(p, ci) - points.coord(c, ci);
                offsets[static_cast<size_t>((m * K + k) * 3 + ci)] = d;
                sum += d;
                sum_abs += std::abs(d);
            }
        }
    }
    int64_t n_vals = M * K * 3;
    double mean = sum / static_cast<double>(n_vals);
    double ss = 0.0;
    for (double d : offsets) ss += (d - mean) * (d - mean);
    double sd = n_vals > 1 ? std::sqrt(ss / static_cast<double>(n_vals - 1)) : 0.0;
    if (!(sd > 0.0)) {
        throw DegenerateInputError(
            "standardize_groups: offset spread is zero, sd undefined (first degenerate group: "
            "group 0)");
    }
    g.sd = sd;
    g.mean_abs_offset = sum_abs / static_cast<double>(n_vals);

    // First three channel1 columns: transformed relative offsets.
    double rel_min = std::numeric_limits<double>::infinity();
    double rel_max = -std::numeric_limits<double>::infinity();
    if (variant.negative_handling == NegativeHandling::unit_normalize) {
        for (double d : offsets) {
            double r = d / sd;
            rel_min = std::min(rel_min, r);
            rel_max = std::max(rel_max, r);
        }
    }
    for (int64_t mk = 0; mk < M * K; ++mk) {
        for (int ci = 0; ci < 3; ++ci) {
            double rel = offsets[static_cast<size_t>(mk * 3 + ci)] / sd;
            double v = rel;
            switch (variant.negative_handling) {
                case NegativeHandling::absolute: v = std::abs(rel); break;
                case NegativeHandling::unit_normalize:
                    v = (rel - rel_min) / (rel_max - rel_min);
                    break;
                case NegativeHandling::raw: break;
            }
            g.channel1[static_cast<size_t>(mk * 6 + ci)] = v;
        }
    }

    // Last three columns: the group's corner anchor.
    const double shift = folded_normal_mean();
    for (int64_t m = 0; m < M; ++m) {
        double corner[3];
        switch (variant.corner) {
            case Corner::min_corner:
                for (int ci = 0; ci < 3; ++ci) {
                    double lo = std::numeric_limits<double>::infinity();
                    for (int64_t k = 0; k < K; ++k) {
                        int64_t p = member_idx[static_cast<size_t>(m * K + k)];
                        lo = std::min(lo, points.coord(p, ci));
                    }
                    corner[ci] = lo;
                }
                break;
            case Corner::centroid:
                for (int ci = 0; ci < 3; ++ci) {
                    corner[ci] = g.centroids[static_cast<size_t>(3 * m + ci)];
                }
                break;
            case Corner::centroid_shifted:
                for (int ci = 0; ci < 3; ++ci) {
                    corner[ci] = std::max(
                        0.0, g.centroids[static_cast<size_t>(3 * m + ci)] - shift * sd);
                }
                break;
        }
        for (int64_t k = 0; k < K; ++k) {
            for (int ci = 0; ci < 3; ++ci) {
                g.channel1[static_cast<size_t>((m * K + k) * 6 + 3 + ci)] = corner[ci];
            }
        }
    }
    return g;
}

GroupStats group_stats(const GroupedInput& grouped) {
    GroupStats s;
    s.sd = grouped.sd;
    s.mean_raw_offset = grouped.mean_abs_offset;
    double sum = 0.0;
    int64_t n = grouped.M * grouped.K;
    for (int64_t mk = 0; mk < n; ++mk) {
        for (int ci = 0; ci < 3; ++ci) {
            sum += grouped.channel1[static_cast<size_t>(mk * 6 + ci)];
        }
    }
    s.mean_abs_rel = n > 0 ? sum / static_cast<double>(3 * n) : 0.0;
    return s;
}

double folded_normal_mean() { return std::sqrt(2.0 / M_PI); }

double folded_normal_mean_mc(int64_t n, uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) sum += std::abs(rng.normal());
    return sum / static_cast<double>(n);
}

}  // namespace spikepoint
