// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run through ctest or directly from the build tree.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "spikepoint/cli.hpp"
#include "spikepoint/energy.hpp"
#include "spikepoint/gradcheck.hpp"
#include "spikepoint/pointcloud.hpp"
#include "spikepoint/rng.hpp"
#include "spikepoint/spike_coding.hpp"
#include "spikepoint/training.hpp"

using namespace spikepoint;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---- criterion 1: folded-normal shift ------------------------------------

Outcome folded_normal_shift() {
    auto t0 = std::chrono::steady_clock::now();
    double mean = folded_normal_mean_mc(1'000'000, 20'260'101);
    double secs = seconds_since(t0);
    bool in_band = mean >= 0.7929 && mean <= 0.8029;
    bool fast = secs < 5.0;
    return {in_band && fast,
            fmt("mean|z| = %.5f for 1e6 draws (band 0.7929..0.8029), %.2f s", mean, secs)};
}

// ---- criterion 2: MRE reduction -------------------------------------------

Outcome mre_reduction() {
    auto t0 = std::chrono::steady_clock::now();
    MreResult r = mre_folded_normal(0.052, 10'000, 16, 20, 777);
    double secs = seconds_since(t0);
    bool ok = r.delta_rescaled <= 0.5 * r.delta_raw && secs < 30.0;
    return {ok, fmt("delta_raw = %.4f, delta_rescaled = %.4f (ratio %.3f <= 0.5), %.2f s",
                    r.delta_raw, r.delta_rescaled, r.delta_rescaled / r.delta_raw, secs)};
}

// ---- criterion 3: CV closed form and alpha ---------------------------------

Outcome cv_closed_form_check() {
    bool ok = true;
    std::string detail;
    for (double d : {0.2, 0.5, 0.8}) {
        CvResult r = cv_empirical(d, 10'000, 16, 31'337 + static_cast<uint64_t>(d * 100));
        double expect = cv_closed_form(d);
        double rel = std::fabs(r.cv - expect) / expect;
        ok = ok && rel <= 0.05;
        detail += fmt("d=%.1f: cv %.4f vs %.4f (rel %.3f); ", d, r.cv, expect, rel);
    }
    AlphaStats a = alpha_distribution(0.5, 10'000, 16, 40, 555);
    ok = ok && std::fabs(a.mean - 1.0) <= 0.01;
    detail += fmt("alpha mean %.5f", a.mean);
    return {ok, detail};
}

// ---- criterion 4: grouping oracles -----------------------------------------

double pdist2(const PointSet& p, int64_t a, int64_t b) {
    double dx = p.x(a) - p.x(b), dy = p.y(a) - p.y(b), dz = p.z(a) - p.z(b);
    return dx * dx + dy * dy + dz * dz;
}

Outcome grouping_oracles() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(4242);
    int fps_fail = 0, knn_fail = 0;
    for (int trial = 0; trial < 200; ++trial) {
        int64_t n = 4 + static_cast<int64_t>(rng.below(61));
        PointSet p;
        p.n = n;
        p.xyz.resize(static_cast<size_t>(n) * 3);
        for (auto& v : p.xyz) v = rng.uniform01();

        int64_t m = 2 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n - 1)));
        int32_t first = static_cast<int32_t>(rng.below(static_cast<uint64_t>(n)));
        auto fast = fps_from(p, m, first);
        // exhaustive greedy maximin
        std::vector<int32_t> chosen{first};
        while (static_cast<int64_t>(chosen.size()) < m) {
            int32_t best = -1;
            double best_min = -1.0;
            for (int64_t i = 0; i < n; ++i) {
                double min_d = 1e300;
                for (int32_t c : chosen) min_d = std::min(min_d, pdist2(p, i, c));
                if (min_d > best_min) {
                    best_min = min_d;
                    best = static_cast<int32_t>(i);
                }
            }
            chosen.push_back(best);
        }
        if (fast != chosen) ++fps_fail;

        int64_t k = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
        std::vector<int32_t> centroids{first};
        auto nn = knn(p, centroids, k);
        std::vector<std::pair<double, int32_t>> order;
        for (int64_t i = 0; i < n; ++i) {
            order.emplace_back(pdist2(p, i, first), static_cast<int32_t>(i));
        }
        std::sort(order.begin(), order.end());
        for (int64_t j = 0; j < k; ++j) {
            if (nn[static_cast<size_t>(j)] != order[static_cast<size_t>(j)].second) {
                ++knn_fail;
                break;
            }
        }
    }
    double secs = seconds_since(t0);
    bool ok = fps_fail == 0 && knn_fail == 0 && secs < 10.0;
    return {ok, fmt("200 instances, fps mismatches %d, knn mismatches %d, %.2f s", fps_fail,
                    knn_fail, secs)};
}

// ---- criterion 5: identity mapping ------------------------------------------

Outcome identity_mapping() {
    Rng rng(99);
    bool resfb_ok = true, resf_ok = true, grad_ok = true;
    {
        // ResFB with a silenced bottleneck branch
        ad::Tape t;
        Tensor x({6, 2, 8});
        for (auto& v : x.data) v = rng.uniform01() < 0.5 ? 1.0f : 0.0f;
        ad::VarId xi = t.leaf(x, true);
        Tensor w1({4, 8}), b1({4}), g1({4}, 1.0f), be1({4}, -10.0f), rm1({4}), rv1({4}, 1.0f);
        Tensor w2({8, 4}), b2({8}), g2({8}, 1.0f), be2({8}, -10.0f), rm2({8}), rv2({8}, 1.0f);
        ad::LifScanConfig sc;
        ad::VarId h = t.pointwise_conv(xi, t.leaf(w1, true), t.leaf(b1, true));
        h = t.batchnorm(h, t.leaf(g1, true), t.leaf(be1, true), &rm1, &rv1, true);
        h = t.lif_scan(h, sc);
        h = t.pointwise_conv(h, t.leaf(w2, true), t.leaf(b2, true));
        h = t.batchnorm(h, t.leaf(g2, true), t.leaf(be2, true), &rm2, &rv2, true);
        h = t.lif_scan(h, sc);
        ad::VarId out = t.add(h, xi);
        resfb_ok = t.value(out).data == x.data;

        ad::VarId loss = t.mse_loss(out, {0, 1});
        t.backward(loss);
        grad_ok = t.grad(xi).data == t.grad(out).data;
    }
    {
        // ResF: single silenced conv
        ad::Tape t;
        Tensor x({6, 2, 8});
        for (auto& v : x.data) v = rng.uniform01() < 0.5 ? 1.0f : 0.0f;
        ad::VarId xi = t.leaf(x, false);
        Tensor w({8, 8}), b({8}), g({8}, 1.0f), be({8}, -10.0f), rm({8}), rv({8}, 1.0f);
        ad::LifScanConfig sc;
        ad::VarId h = t.pointwise_conv(xi, t.leaf(w, false), t.leaf(b, false));
        h = t.batchnorm(h, t.leaf(g, false), t.leaf(be, false), &rm, &rv, true);
        h = t.lif_scan(h, sc);
        ad::VarId out = t.add(h, xi);
        resf_ok = t.value(out).data == x.data;
    }
    return {resfb_ok && resf_ok && grad_ok,
            fmt("ResFB identity %s, ResF identity %s, skip gradient bitwise %s",
                resfb_ok ? "ok" : "BROKEN", resf_ok ? "ok" : "BROKEN",
                grad_ok ? "ok" : "BROKEN")};
}

// ---- criterion 6: gradient checks --------------------------------------------

Outcome gradient_checks() {
    auto results = run_gradchecks(20'26'08);
    double surrogate_err = -1.0, linear_err = -1.0;
    bool ok = true;
    for (const auto& r : results) {
        if (r.name == "surrogate_fd") {
            surrogate_err = r.max_err;
            ok = ok && r.max_err < 1e-6;
        }
        if (r.name == "linear_path_fd") {
            linear_err = r.max_err;
            ok = ok && r.max_err < 1e-4;
        }
        ok = ok && r.pass;
    }
    return {ok, fmt("surrogate fd err %.2e (< 1e-6), linear path fd err %.2e (< 1e-4)",
                    surrogate_err, linear_err)};
}

// ---- criterion 7: energy arithmetic -------------------------------------------

Outcome energy_arithmetic() {
    EnergyConstants k;
    double snn = dynamic_energy_total(0.9e9, Regime::snn, k);
    double ann = dynamic_energy_total(38.82e9, Regime::ann, k);
    bool snn_ok = std::fabs(snn - 0.81e-3) < 1e-9 && std::fabs(snn - 0.82e-3) / 0.82e-3 < 0.02;
    bool ann_ok = std::fabs(ann - 178.6e-3) / 178.6e-3 < 0.001;

    // static formula against an independent hand computation
    double st = static_energy(1e6, 32.0, 12.991e-12, 1.0);
    long double hand = 1e6L;
    hand *= 32.0L;
    hand *= 12.991e-12L;
    bool static_ok = std::fabs(st - static_cast<double>(hand)) < 1e-18 &&
                     std::fabs(st - 4.157e-4) / 4.157e-4 < 1e-3;

    StaticCalibration cal{0.58e6, 0.756e-3};
    bool cal_ok = cal.static_for(0.58e6) == 0.756e-3;  // exact reproduction

    bool ok = snn_ok && ann_ok && static_ok && cal_ok;
    return {ok, fmt("0.9 GOPs -> %.4g mJ, 38.82 GFLOPs -> %.4g mJ, static 1e6p -> %.4g J, "
                    "calibrated row %.6g mJ",
                    snn * 1e3, ann * 1e3, st, cal.static_for(0.58e6) * 1e3)};
}

// ---- criterion 8: desk-scale end-to-end ----------------------------------------

Config desk_config() {
    Config cfg;
    cfg.set("data.classes", "4");
    cfg.set("data.streams_per_class", "30");
    cfg.set("data.duration_us", "1000000");
    cfg.set("data.rate_hz", "20000");
    cfg.set("data.noise_hz", "1000");
    cfg.set("window.length_us", "500000");
    cfg.set("window.overlap_us", "250000");
    cfg.set("group.N", "256");
    cfg.set("group.M", "32");
    cfg.set("group.K", "16");
    cfg.set("net.variant", "small");
    cfg.set("net.T", "16");
    cfg.set("net.classes", "4");
    cfg.set("train.lr", "0.001");
    cfg.set("train.max_epochs", "30");
    cfg.set("train.batch_size", "6");
    cfg.set("train.target_acc", "0.9");
    cfg.set("seed", "42");
    return cfg;
}

Outcome desk_scale_end_to_end() {
    auto t0 = std::chrono::steady_clock::now();
    TrainRun run = run_training_from_config(desk_config());
    double secs = seconds_since(t0);
    bool ok = run.result.final_voted_test_acc >= 0.90 && run.result.epochs_run <= 30 &&
              secs < 900.0;
    return {ok, fmt("voted test accuracy %.3f after %d epochs, %.1f s (< 900 s)",
                    run.result.final_voted_test_acc, run.result.epochs_run, secs)};
}

// ---- criterion 9: timestep trend -------------------------------------------------

Outcome timestep_trend() {
    auto run_t = [](const char* T) {
        Config cfg;
        cfg.set("data.classes", "4");
        cfg.set("data.streams_per_class", "15");
        cfg.set("data.duration_us", "1000000");
        cfg.set("data.rate_hz", "10000");
        cfg.set("data.noise_hz", "500");
        cfg.set("group.N", "128");
        cfg.set("group.M", "16");
        cfg.set("group.K", "12");
        cfg.set("net.T", T);
        cfg.set("net.classes", "4");
        cfg.set("train.lr", "0.001");
        cfg.set("train.max_epochs", "8");
        cfg.set("train.batch_size", "6");
        cfg.set("seed", "42");
        return run_training_from_config(cfg).result.final_voted_test_acc;
    };
    double acc2 = run_t("2");
    double acc16 = run_t("16");
    return {acc16 >= acc2, fmt("voted accuracy T=16: %.3f >= T=2: %.3f", acc16, acc2)};
}

// ---- criterion 10: determinism -----------------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    fs::path base = fs::temp_directory_path() / "spikepoint_acceptance";
    fs::remove_all(base);
    std::string a = (base / "a").string();
    std::string b = (base / "b").string();
    std::vector<std::string> common{
        "--seed", "42",
        "--set", "data.classes=2", "--set", "data.streams_per_class=4",
        "--set", "data.duration_us=300000", "--set", "data.rate_hz=4000",
        "--set", "data.noise_hz=100", "--set", "window.length_us=150000",
        "--set", "window.overlap_us=50000", "--set", "group.N=64",
        "--set", "group.M=8", "--set", "group.K=8", "--set", "net.T=8",
        "--set", "net.classes=2", "--set", "train.max_epochs=3",
        "--set", "train.batch_size=4"};
    auto run_train = [&](const std::string& out) {
        std::vector<std::string> args{"train", "--out", out};
        for (const auto& c : common) args.push_back(c);
        return cli::run(args);
    };
    if (run_train(a) != 0 || run_train(b) != 0) {
        return {false, "train subcommand failed"};
    }
    bool ckpt = slurp(a + "/checkpoint.spkc") == slurp(b + "/checkpoint.spkc");
    bool metrics = slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv");
    bool resolved = slurp(a + "/config.resolved") == slurp(b + "/config.resolved");
    return {ckpt && metrics && resolved,
            fmt("checkpoint identical: %s, metrics identical: %s, resolved config identical: %s",
                ckpt ? "yes" : "NO", metrics ? "yes" : "NO", resolved ? "yes" : "NO")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<Criterion> criteria{
        {1, "folded-normal shift", folded_normal_shift},
        {2, "MRE reduction from rescaling", mre_reduction},
        {3, "CV closed form and alpha", cv_closed_form_check},
        {4, "FPS/KNN oracles", grouping_oracles},
        {5, "residual identity mapping", identity_mapping},
        {6, "gradient checks", gradient_checks},
        {7, "energy arithmetic", energy_arithmetic},
        {8, "desk-scale end-to-end training", desk_scale_end_to_end},
        {9, "timestep trend T=16 vs T=2", timestep_trend},
        {10, "bitwise determinism of train runs", determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s  criterion %2d: %s  [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
