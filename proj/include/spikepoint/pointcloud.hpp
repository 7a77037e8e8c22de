#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikepoint/event_io.hpp"

namespace spikepoint {

enum class NegativeHandling { absolute, unit_normalize, raw };
enum class Corner { min_corner, centroid, centroid_shifted };
enum class Branches { single_branch, double_branch };
enum class Fusion { add, concat };

// How relative offsets are turned into encodable group features.
struct GroupingVariant {
    NegativeHandling negative_handling = NegativeHandling::absolute;
    Corner corner = Corner::min_corner;
    Branches branches = Branches::double_branch;
    Fusion fusion = Fusion::add;

    // Rows 1..10 of the grouping ablation grid.
    static GroupingVariant table_row(int row);
    std::string name() const;
};

// Grouped dual-channel network input for one sample.
//   channel1: M x K x 6 rows [f(dx), f(dy), f(dz), corner_x, corner_y, corner_z]
//   channel2: M x 3 centroid coordinates
struct GroupedInput {
    int64_t M = 0;
    int64_t K = 0;
    std::vector<double> centroids;    // M x 3
    std::vector<int32_t> member_idx;  // M x K
    std::vector<double> channel1;     // M x K x 6
    std::vector<double> channel2;     // M x 3 (= centroids)
    double sd = 0.0;                  // pooled standardization divisor
    double mean_abs_offset = 0.0;     // mean |member - centroid| before division
};

struct GroupStats {
    double sd = 0.0;
    double mean_abs_rel = 0.0;     // mean of channel1[:, :, 0:3]
    double mean_raw_offset = 0.0;  // mean |offset| before division
};

// Exactly N rows; without replacement when the source has at least N points.
PointSet random_sample(const PointMatrix& source, int64_t N, uint64_t seed);

// Farthest point sampling: greedy maximin centroid selection.
std::vector<int32_t> fps(const PointSet& points, int64_t M, uint64_t seed);
std::vector<int32_t> fps_from(const PointSet& points, int64_t M, int32_t first_index);

// K nearest neighbors per centroid, rows sorted by ascending distance,
// ties broken by lowest index. Returns M x K row-major.
std::vector<int32_t> knn(const PointSet& points, const std::vector<int32_t>& centroid_idx,
                         int64_t K);

GroupedInput standardize_groups(const PointSet& points, const std::vector<int32_t>& centroid_idx,
                                const std::vector<int32_t>& member_idx, int64_t K,
                                const GroupingVariant& variant);

GroupStats group_stats(const GroupedInput& grouped);

// E|Z| for standard normal Z: sqrt(2/pi).
double folded_normal_mean();
// Monte-Carlo estimate of E|Z| from n standard normal draws.
double folded_normal_mean_mc(int64_t n, uint64_t seed);

}  // namespace spikepoint
