#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "spikepoint/pointcloud.hpp"
#include "spikepoint/rng.hpp"

using namespace spikepoint;

namespace {

PointSet make_points(const std::vector<std::array<double, 3>>& rows) {
    PointSet p;
    p.n = static_cast<int64_t>(rows.size());
    for (const auto& r : rows) {
        p.xyz.push_back(r[0]);
        p.xyz.push_back(r[1]);
        p.xyz.push_back(r[2]);
    }
    return p;
}

PointSet random_points(int64_t n, uint64_t seed) {
    Rng rng(seed);
    PointSet p;
    p.n = n;
    p.xyz.resize(static_cast<size_t>(n) * 3);
    for (auto& v : p.xyz) v = rng.uniform01();
    return p;
}

double d2(const PointSet& p, int64_t a, int64_t b) {
    double dx = p.x(a) - p.x(b), dy = p.y(a) - p.y(b), dz = p.z(a) - p.z(b);
    return dx * dx + dy * dy + dz * dz;
}

// Exhaustive greedy maximin, recomputing every candidate's distance to the
// chosen set from scratch each round.
std::vector<int32_t> fps_oracle(const PointSet& p, int64_t M, int32_t first) {
    std::vector<int32_t> chosen{first};
    while (static_cast<int64_t>(chosen.size()) < M) {
        int32_t best = -1;
        double best_min = -1.0;
        for (int64_t i = 0; i < p.n; ++i) {
            double min_d = 1e300;
            for (int32_t c : chosen) min_d = std::min(min_d, d2(p, i, c));
            if (min_d > best_min) {
                best_min = min_d;
                best = static_cast<int32_t>(i);
            }
        }
        chosen.push_back(best);
    }
    return chosen;
}

double min_pairwise(const PointSet& p, const std::vector<int32_t>& idx) {
    double best = 1e300;
    for (size_t a = 0; a < idx.size(); ++a) {
        for (size_t b = a + 1; b < idx.size(); ++b) {
            best = std::min(best, d2(p, idx[a], idx[b]));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("random_sample") {
    SUBCASE("source size equals N -> a permutation") {
        PointSet src = random_points(50, 1);
        PointSet out = random_sample(src, 50, 9);
        REQUIRE(out.n == 50);
        std::multiset<double> a(src.xyz.begin(), src.xyz.end());
        std::multiset<double> b(out.xyz.begin(), out.xyz.end());
        CHECK(a == b);
    }
    SUBCASE("small source, large N -> sampling with replacement from the source") {
        PointSet src = random_points(10, 2);
        PointSet out = random_sample(src, 1024, 5);
        REQUIRE(out.n == 1024);
        std::set<std::array<double, 3>> rows;
        for (int64_t i = 0; i < src.n; ++i) rows.insert({src.x(i), src.y(i), src.z(i)});
        for (int64_t i = 0; i < out.n; ++i) {
            CHECK(rows.count({out.x(i), out.y(i), out.z(i)}) == 1);
        }
    }
    SUBCASE("deterministic per seed") {
        PointSet src = random_points(200, 3);
        CHECK(random_sample(src, 64, 7).xyz == random_sample(src, 64, 7).xyz);
        CHECK(random_sample(src, 64, 7).xyz != random_sample(src, 64, 8).xyz);
    }
    SUBCASE("empty source is degenerate") {
        PointSet empty;
        CHECK_THROWS_AS(random_sample(empty, 8, 0), DegenerateInputError);
    }
}

TEST_CASE("fps") {
    SUBCASE("three-point maximin by hand") {
        PointSet p = make_points({{0, 0, 0}, {1, 1, 1}, {0.5, 0.5, 0.5}});
        auto picks = fps_from(p, 2, 0);
        REQUIRE(picks.size() == 2);
        CHECK(picks[0] == 0);
        CHECK(picks[1] == 1);  // farthest from (0,0,0)
    }
    SUBCASE("M = N selects every index") {
        PointSet p = random_points(17, 4);
        auto picks = fps(p, 17, 11);
        std::set<int32_t> unique(picks.begin(), picks.end());
        CHECK(unique.size() == 17);
    }
    SUBCASE("M > N is a configuration error") {
        PointSet p = random_points(4, 5);
        CHECK_THROWS_AS(fps(p, 5, 0), ConfigError);
    }
    SUBCASE("matches exhaustive greedy maximin on 200 random instances") {
        Rng rng(606);
        for (int trial = 0; trial < 200; ++trial) {
            int64_t n = 4 + static_cast<int64_t>(rng.below(61));  // up to 64
            int64_t m = 2 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n - 1)));
            PointSet p = random_points(n, rng.fork(static_cast<uint64_t>(trial)));
            int32_t first = static_cast<int32_t>(rng.below(static_cast<uint64_t>(n)));
            CHECK(fps_from(p, m, first) == fps_oracle(p, m, first));
        }
    }
    SUBCASE("spreads at least as well as random subsets (200 trials)") {
        Rng rng(707);
        PointSet p = random_points(64, 42);
        auto picks = fps(p, 8, 3);
        double fps_disp = min_pairwise(p, picks);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<int32_t> all(64);
            for (int i = 0; i < 64; ++i) all[static_cast<size_t>(i)] = i;
            rng.shuffle(all);
            std::vector<int32_t> subset(all.begin(), all.begin() + 8);
            CHECK(fps_disp >= min_pairwise(p, subset));
        }
    }
}

TEST_CASE("knn") {
    SUBCASE("K = 1 returns the centroid itself") {
        PointSet p = random_points(32, 6);
        std::vector<int32_t> centroids{3, 17, 31};
        auto idx = knn(p, centroids, 1);
        REQUIRE(idx.size() == 3);
        CHECK(idx[0] == 3);
        CHECK(idx[1] == 17);
        CHECK(idx[2] == 31);
    }
    SUBCASE("matches the quadratic neighbor lists on 64 points, K = 8") {
        PointSet p = random_points(64, 8);
        std::vector<int32_t> centroids;
        for (int i = 0; i < 64; i += 7) centroids.push_back(i);
        auto idx = knn(p, centroids, 8);
        for (size_t m = 0; m < centroids.size(); ++m) {
            std::vector<std::pair<double, int32_t>> order;
            for (int64_t i = 0; i < 64; ++i) {
                order.emplace_back(d2(p, i, centroids[m]), static_cast<int32_t>(i));
            }
            std::sort(order.begin(), order.end());
            for (int k = 0; k < 8; ++k) {
                CHECK(idx[m * 8 + static_cast<size_t>(k)] ==
                      order[static_cast<size_t>(k)].second);
            }
        }
    }
    SUBCASE("rows are sorted by distance and dominate excluded points") {
        PointSet p = random_points(48, 12);
        std::vector<int32_t> centroids{0, 20, 40};
        int64_t K = 6;
        auto idx = knn(p, centroids, K);
        for (size_t m = 0; m < centroids.size(); ++m) {
            double prev = -1.0;
            double worst = 0.0;
            std::set<int32_t> members;
            for (int64_t k = 0; k < K; ++k) {
                int32_t i = idx[m * static_cast<size_t>(K) + static_cast<size_t>(k)];
                members.insert(i);
                double d = d2(p, i, centroids[m]);
                CHECK(d >= prev);
                prev = d;
                worst = std::max(worst, d);
            }
            for (int64_t i = 0; i < p.n; ++i) {
                if (!members.count(static_cast<int32_t>(i))) {
                    CHECK(d2(p, i, centroids[m]) >= worst);
                }
            }
        }
    }
    SUBCASE("duplicate points break ties by lowest index") {
        PointSet p = make_points(
            {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}});
        auto idx = knn(p, {2}, 3);
        CHECK(idx == std::vector<int32_t>{0, 1, 2});
    }
    SUBCASE("K > N is a configuration error") {
        PointSet p = random_points(4, 1);
        CHECK_THROWS_AS(knn(p, {0}, 5), ConfigError);
    }
}

TEST_CASE("standardize_groups") {
    GroupingVariant abs_min;  // defaults: absolute, min_corner, double, add

    SUBCASE("hand instance with an independent sd computation") {
        PointSet p = make_points({{0.5, 0.5, 0.5}, {0.6, 0.5, 0.5}, {0.4, 0.5, 0.5}});
        std::vector<int32_t> centroids{0};
        std::vector<int32_t> members{1, 2};
        GroupedInput g = standardize_groups(p, centroids, members, 2, abs_min);

        // oracle: pooled offsets {0.1, 0, 0, -0.1, 0, 0}, two-pass sample sd
        std::vector<double> offsets{0.1, 0.0, 0.0, -0.1, 0.0, 0.0};
        double mean = 0.0;
        for (double v : offsets) mean += v;
        mean /= 6.0;
        double ss = 0.0;
        for (double v : offsets) ss += (v - mean) * (v - mean);
        double sd = std::sqrt(ss / 5.0);

        CHECK(g.sd == doctest::Approx(sd).epsilon(1e-12));
        CHECK(g.channel1[0] == doctest::Approx(0.1 / sd).epsilon(1e-12));
        CHECK(g.channel1[1] == doctest::Approx(0.0));
        CHECK(g.channel1[2] == doctest::Approx(0.0));
        // min corner of the two members
        CHECK(g.channel1[3] == doctest::Approx(0.4));
        CHECK(g.channel1[4] == doctest::Approx(0.5));
        CHECK(g.channel1[5] == doctest::Approx(0.5));
        // second member: |(-0.1)/sd|
        CHECK(g.channel1[6] == doctest::Approx(0.1 / sd).epsilon(1e-12));
        // channel2 repeats the centroid
        CHECK(g.channel2[0] == doctest::Approx(0.5));
    }

    SUBCASE("gaussian offsets: mean |rel| approaches sqrt(2/pi)") {
        Rng rng(17);
        int64_t M = 340, K = 98;  // 340*98*3 ~ 1e5 pooled values
        std::vector<std::array<double, 3>> rows;
        rows.push_back({0.5, 0.5, 0.5});
        std::vector<int32_t> centroids, members;
        for (int64_t m = 0; m < M; ++m) centroids.push_back(0);
        for (int64_t i = 0; i < M * K; ++i) {
            rows.push_back({0.5 + rng.normal(0.0, 0.05), 0.5 + rng.normal(0.0, 0.05),
                            0.5 + rng.normal(0.0, 0.05)});
            members.push_back(static_cast<int32_t>(i + 1));
        }
        PointSet p = make_points(rows);
        GroupedInput g = standardize_groups(p, centroids, members, K, abs_min);
        double mean_abs = 0.0;
        int64_t n = 0;
        for (int64_t mk = 0; mk < M * K; ++mk) {
            for (int c = 0; c < 3; ++c) {
                mean_abs += g.channel1[static_cast<size_t>(mk * 6 + c)];
                ++n;
            }
        }
        mean_abs /= static_cast<double>(n);
        CHECK(mean_abs == doctest::Approx(folded_normal_mean()).epsilon(0.0125));
    }

    SUBCASE("identical points are degenerate and name the group") {
        PointSet p = make_points({{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}});
        try {
            standardize_groups(p, {0}, {1, 2}, 2, abs_min);
            FAIL("expected DegenerateInputError");
        } catch (const DegenerateInputError& e) {
            CHECK(std::string(e.what()).find("group") != std::string::npos);
        }
    }

    SUBCASE("variant behaviors") {
        PointSet p = random_points(64, 23);
        auto centroids = fps(p, 8, 1);
        auto members = knn(p, centroids, 6);

        GroupingVariant raw = abs_min;
        raw.negative_handling = NegativeHandling::raw;
        GroupedInput graw = standardize_groups(p, centroids, members, 6, raw);
        // pooled standardized offsets have sample std exactly 1
        double mean = 0.0;
        int64_t n = 0;
        for (int64_t mk = 0; mk < 8 * 6; ++mk) {
            for (int c = 0; c < 3; ++c) {
                mean += graw.channel1[static_cast<size_t>(mk * 6 + c)];
                ++n;
            }
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (int64_t mk = 0; mk < 8 * 6; ++mk) {
            for (int c = 0; c < 3; ++c) {
                double v = graw.channel1[static_cast<size_t>(mk * 6 + c)] - mean;
                ss += v * v;
            }
        }
        CHECK(std::sqrt(ss / static_cast<double>(n - 1)) == doctest::Approx(1.0).epsilon(1e-9));

        GroupedInput gabs = standardize_groups(p, centroids, members, 6, abs_min);
        for (int64_t mk = 0; mk < 8 * 6; ++mk) {
            for (int c = 0; c < 3; ++c) {
                CHECK(gabs.channel1[static_cast<size_t>(mk * 6 + c)] >= 0.0);
                CHECK(gabs.channel1[static_cast<size_t>(mk * 6 + c)] ==
                      doctest::Approx(
                          std::abs(graw.channel1[static_cast<size_t>(mk * 6 + c)])));
            }
        }

        GroupingVariant unit = abs_min;
        unit.negative_handling = NegativeHandling::unit_normalize;
        GroupedInput gunit = standardize_groups(p, centroids, members, 6, unit);
        double lo = 1e300, hi = -1e300;
        for (int64_t mk = 0; mk < 8 * 6; ++mk) {
            for (int c = 0; c < 3; ++c) {
                double v = gunit.channel1[static_cast<size_t>(mk * 6 + c)];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        CHECK(lo == doctest::Approx(0.0));
        CHECK(hi == doctest::Approx(1.0));

        GroupingVariant cen = abs_min;
        cen.corner = Corner::centroid;
        GroupedInput gcen = standardize_groups(p, centroids, members, 6, cen);
        for (int64_t m = 0; m < 8; ++m) {
            for (int c = 0; c < 3; ++c) {
                CHECK(gcen.channel1[static_cast<size_t>((m * 6 + 0) * 6 + 3 + c)] ==
                      doctest::Approx(p.coord(centroids[static_cast<size_t>(m)], c)));
            }
        }

        GroupingVariant shifted = abs_min;
        shifted.corner = Corner::centroid_shifted;
        GroupedInput gsh = standardize_groups(p, centroids, members, 6, shifted);
        for (int64_t m = 0; m < 8; ++m) {
            double expect =
                std::max(0.0, p.coord(centroids[static_cast<size_t>(m)], 0) -
                                  folded_normal_mean() * gsh.sd);
            CHECK(gsh.channel1[static_cast<size_t>((m * 6 + 0) * 6 + 3)] ==
                  doctest::Approx(expect));
        }

        // min corner really is the member-wise minimum
        for (int64_t m = 0; m < 8; ++m) {
            for (int c = 0; c < 3; ++c) {
                double lo2 = 1e300;
                for (int64_t k = 0; k < 6; ++k) {
                    lo2 = std::min(lo2, p.coord(members[static_cast<size_t>(m * 6 + k)], c));
                }
                CHECK(gabs.channel1[static_cast<size_t>((m * 6 + 0) * 6 + 3 + c)] ==
                      doctest::Approx(lo2));
            }
        }
    }
}

TEST_CASE("group_stats on calibrated gaussian offsets") {
    const double sigma = 0.052;
    Rng rng(29);
    int64_t M = 120, K = 32;
    std::vector<std::array<double, 3>> rows;
    rows.push_back({0.5, 0.5, 0.5});
    std::vector<int32_t> centroids, members;
    for (int64_t m = 0; m < M; ++m) centroids.push_back(0);
    for (int64_t i = 0; i < M * K; ++i) {
        rows.push_back({0.5 + rng.normal(0.0, sigma), 0.5 + rng.normal(0.0, sigma),
                        0.5 + rng.normal(0.0, sigma)});
        members.push_back(static_cast<int32_t>(i + 1));
    }
    PointSet p = make_points(rows);
    GroupingVariant v;
    GroupedInput g = standardize_groups(p, centroids, members, K, v);
    GroupStats stats = group_stats(g);

    CHECK(stats.sd == doctest::Approx(sigma).epsilon(0.05));
    CHECK(stats.mean_raw_offset ==
          doctest::Approx(sigma * folded_normal_mean()).epsilon(0.05));
    CHECK(stats.mean_abs_rel > 0.75);
    CHECK(stats.mean_abs_rel < 0.82);
}

TEST_CASE("folded normal mean") {
    CHECK(folded_normal_mean() == doctest::Approx(0.7978845608).epsilon(1e-9));
    double mc = folded_normal_mean_mc(1'000'000, 2024);
    CHECK(mc > 0.7929);
    CHECK(mc < 0.8029);
}

TEST_CASE("grouping table rows") {
    GroupingVariant r6 = GroupingVariant::table_row(6);
    CHECK(r6.negative_handling == NegativeHandling::absolute);
    CHECK(r6.corner == Corner::min_corner);
    CHECK(r6.branches == Branches::double_branch);
    CHECK(r6.fusion == Fusion::add);
    GroupingVariant r1 = GroupingVariant::table_row(1);
    CHECK(r1.negative_handling == NegativeHandling::raw);
    CHECK(r1.corner == Corner::centroid);
    CHECK(r1.branches == Branches::single_branch);
    GroupingVariant r7 = GroupingVariant::table_row(7);
    CHECK(r7.fusion == Fusion::concat);
    CHECK_THROWS_AS(GroupingVariant::table_row(0), ConfigError);
    CHECK_THROWS_AS(GroupingVariant::table_row(11), ConfigError);
}
