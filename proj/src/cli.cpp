#include "spikepoint/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spikepoint/energy.hpp"
#include "spikepoint/gradcheck.hpp"
#include "spikepoint/pipeline.hpp"
#include "spikepoint/rng.hpp"
#include "spikepoint/spike_coding.hpp"
#include "spikepoint/training.hpp"

namespace spikepoint {
namespace cli {

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::string seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config_path, "key=value configuration file");
    sub->add_option("--out", opts.out_dir, "output directory (all artifacts go here)");
    sub->add_option("--seed", opts.seed, "global seed override");
    sub->add_option("--set", opts.sets, "override a config key, e.g. --set net.T=8")
        ->take_all();
}

Config resolve(const CommonOpts& opts) {
    Config cfg;
    if (!opts.config_path.empty()) cfg = Config::parse_file(opts.config_path);
    for (const std::string& kv : opts.sets) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--set expects key=value, got '" + kv + "'");
        }
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.seed.empty()) cfg.set("seed", opts.seed);
    return cfg;
}

void echo_resolved(const Config& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    cfg.write_file(out_dir + "/config.resolved");
}

void check_unread(const Config& cfg) {
    auto leftover = cfg.unread_keys();
    if (!leftover.empty()) {
        std::string keys;
        for (size_t i = 0; i < leftover.size(); ++i) {
            if (i) keys += ", ";
            keys += leftover[i];
        }
        throw ConfigError("unknown config key(s): " + keys);
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

// Touch every key a full pipeline+train run consumes so the resolved echo is
// complete and unknown keys are caught.
void materialize_run_config(Config& cfg) {
    PipelineConfig pipe = PipelineConfig::from_config(cfg);
    pipe.to_config(cfg);
    NetworkConfig nc = NetworkConfig::from_config(cfg);
    nc.to_config(cfg);
    TrainConfig tc = TrainConfig::from_config(cfg);
    tc.to_config(cfg);
    std::string source = cfg.get_enum("data.source", "synth", {"synth", "manifest"});
    cfg.set("data.source", source);
    // read the whole data section so a shared config file works for every
    // subcommand regardless of the active source
    SynthSpec spec = synth_spec_from_config(cfg);
    double test_fraction = cfg.get_double("data.test_fraction", 0.2);
    std::string manifest = cfg.get_str("data.manifest", "");
    if (source == "synth") {
        cfg.set("data.classes", std::to_string(spec.classes.size()));
        cfg.set("data.streams_per_class", std::to_string(spec.streams_per_class));
        cfg.set("data.duration_us", std::to_string(spec.duration_us));
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", spec.rate_hz);
        cfg.set("data.rate_hz", buf);
        std::snprintf(buf, sizeof buf, "%.17g", spec.noise_rate_hz);
        cfg.set("data.noise_hz", buf);
        cfg.set("data.width", std::to_string(spec.width));
        cfg.set("data.height", std::to_string(spec.height));
        std::snprintf(buf, sizeof buf, "%.17g", test_fraction);
        cfg.set("data.test_fraction", buf);
    } else {
        cfg.set("data.manifest", manifest);
    }
    cfg.set("data.cache", cfg.get_str("data.cache", ""));
}

int cmd_gen_data(const CommonOpts& opts) {
    Config cfg = resolve(opts);
    SynthSpec spec = synth_spec_from_config(cfg);
    double test_fraction = cfg.get_double("data.test_fraction", 0.2);
    cfg.set("data.source", "synth");
    materialize_run_config(cfg);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    auto streams = synth_generate(spec, derive_seed(cfg, kSeedData));
    auto splits = assign_splits(streams.size(), test_fraction, derive_seed(cfg, kSeedSplit));
    fs::create_directories(opts.out_dir + "/streams");
    Manifest manifest;
    manifest.width = spec.width;
    manifest.height = spec.height;
    char name[64];
    for (size_t i = 0; i < streams.size(); ++i) {
        std::snprintf(name, sizeof name, "streams/stream_%04zu.evs", i);
        write_stream_file(streams[i], opts.out_dir + "/" + name);
        manifest.entries.push_back({name, streams[i].label, splits[i]});
    }
    manifest.save(opts.out_dir + "/manifest.json");
    std::cout << "gen-data: wrote " << streams.size() << " streams and manifest.json to "
              << opts.out_dir << "\n";
    return 0;
}

int cmd_preprocess(const CommonOpts& opts) {
    Config cfg = resolve(opts);
    materialize_run_config(cfg);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    Dataset ds = dataset_from_config(cfg);
    save_grouped_cache(ds, cfg, opts.out_dir + "/grouped.spkc");
    std::cout << "preprocess: " << ds.samples.size() << " samples ("
              << ds.train_idx.size() << " train, " << ds.test_idx.size() << " test, "
              << ds.skipped_windows << " windows skipped) -> " << opts.out_dir
              << "/grouped.spkc\n";
    return 0;
}

int cmd_encode_stats(const CommonOpts& opts) {
    Config cfg = resolve(opts);
    CodingReportParams params;
    params.T = cfg.get_int("stats.T", params.T);
    params.trials = static_cast<int>(cfg.get_int("stats.trials", params.trials));
    params.n_values = cfg.get_int("stats.n_values", params.n_values);
    params.sd = cfg.get_double("stats.sd", params.sd);
    params.cv_n = cfg.get_int("stats.cv_n", params.cv_n);
    params.cv_reps = static_cast<int>(cfg.get_int("stats.cv_reps", params.cv_reps));
    std::string d_list = cfg.get_str("stats.d_list", "0.2,0.5,0.8");
    {
        params.d_values.clear();
        std::string item;
        std::istringstream in(d_list);
        while (std::getline(in, item, ',')) params.d_values.push_back(std::stod(item));
        if (params.d_values.empty()) throw ConfigError("stats.d_list: no values");
    }
    uint64_t seed = cfg.get_seed("seed", 42);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    CodingReport report = coding_report(params, seed);

    char buf[160];
    std::string csv = "metric,value\n";
    auto row = [&](const std::string& metric, double value) {
        std::snprintf(buf, sizeof buf, "%s,%.9g\n", metric.c_str(), value);
        csv += buf;
    };
    auto dtag = [&](size_t i) {
        std::snprintf(buf, sizeof buf, "%g", params.d_values[i]);
        return std::string(buf);
    };

    row("folded_normal.expected", folded_normal_mean());
    row("folded_normal.mc_1e6", folded_normal_mean_mc(1'000'000, mix64(seed + 1)));
    row("mre.delta_raw", report.mre.delta_raw);
    row("mre.delta_rescaled", report.mre.delta_rescaled);
    row("mre.reduction", 1.0 - report.mre.delta_rescaled / report.mre.delta_raw);
    for (size_t i = 0; i < params.d_values.size(); ++i) {
        row("cv.closed_form.d=" + dtag(i), report.cv_closed[i]);
        row("cv.empirical.d=" + dtag(i), report.cv_empirical[i]);
    }
    row("alpha.mean", report.alpha.mean);
    row("alpha.std", report.alpha.stddev);
    write_text(opts.out_dir + "/encode_stats.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_train(const CommonOpts& opts) {
    Config cfg = resolve(opts);
    materialize_run_config(cfg);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    TrainRun run = run_training_from_config(cfg, &std::cout);
    write_text(opts.out_dir + "/metrics.csv", metrics_to_csv(run.result.rows));
    std::map<std::string, double> metrics;
    if (!run.result.rows.empty()) {
        const EpochRow& last_train = run.result.rows[run.result.rows.size() - 2];
        const EpochRow& last_test = run.result.rows.back();
        metrics["train_loss"] = last_train.loss;
        metrics["train_accuracy"] = last_train.accuracy;
        metrics["test_loss"] = last_test.loss;
        metrics["test_accuracy"] = last_test.accuracy;
    }
    metrics["voted_test_accuracy"] = run.result.final_voted_test_acc;
    metrics["epochs_run"] = run.result.epochs_run;
    save_checkpoint(*run.net, cfg, run.result.epochs_run, metrics,
                    opts.out_dir + "/checkpoint.spkc");
    std::cout << "train: " << run.result.epochs_run << " epochs, voted test accuracy "
              << run.result.final_voted_test_acc << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint_flag) {
    Config cfg = resolve(opts);
    std::string ckpt_path =
        !checkpoint_flag.empty() ? checkpoint_flag : cfg.get_str("eval.checkpoint", "");
    if (ckpt_path.empty()) {
        throw UsageError("eval: provide --checkpoint or eval.checkpoint");
    }
    cfg.set("eval.checkpoint", ckpt_path);
    cfg.get_str("eval.checkpoint", "");
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    // Data keys come from the invocation config; network keys from the snapshot.
    for (const auto& [k, v] : ckpt.config.entries()) {
        if (k.rfind("net.", 0) == 0 || k.rfind("group.", 0) == 0) cfg.set(k, v);
    }
    materialize_run_config(cfg);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    Dataset ds = dataset_from_config(cfg);
    auto evals = evaluate_split(*ckpt.net, ds, /*test_split=*/true,
                                mix64(cfg.get_seed("seed", 42) + kSeedEval));
    std::string csv = "stream,label,predicted\n";
    char buf[64];
    for (const auto& e : evals) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d\n", e.stream_idx, e.label, e.predicted);
        csv += buf;
    }
    write_text(opts.out_dir + "/eval.csv", csv);
    double acc = voted_accuracy(evals);
    std::cout << "eval: " << evals.size() << " streams, voted accuracy " << acc << "\n";
    return 0;
}

int cmd_energy(const CommonOpts& opts, const std::string& checkpoint_flag) {
    Config cfg = resolve(opts);
    EnergyConstants k;
    k.e_mac_j = cfg.get_double("energy.e_mac", k.e_mac_j);
    k.e_ac_j = cfg.get_double("energy.e_ac", k.e_ac_j);
    k.spp_bit_w = cfg.get_double("energy.spp_bit", k.spp_bit_w);
    k.bits_per_param = cfg.get_double("energy.bits_per_param", k.bits_per_param);
    k.l_sample_s = cfg.get_double("energy.l_sample_s", k.l_sample_s);
    int max_samples = static_cast<int>(cfg.get_int("energy.samples", 16));

    std::string ckpt_path =
        !checkpoint_flag.empty() ? checkpoint_flag : cfg.get_str("energy.checkpoint", "");
    std::unique_ptr<Network> net;
    if (!ckpt_path.empty()) {
        LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
        net = std::move(ckpt.net);
        for (const auto& [key, v] : ckpt.config.entries()) {
            if (key.rfind("net.", 0) == 0 || key.rfind("group.", 0) == 0) cfg.set(key, v);
        }
        cfg.set("energy.checkpoint", ckpt_path);
        cfg.get_str("energy.checkpoint", "");
    }
    materialize_run_config(cfg);
    if (!net) {
        net = std::make_unique<Network>(NetworkConfig::from_config(cfg),
                                        derive_seed(cfg, kSeedInit));
    }
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    Dataset ds = dataset_from_config(cfg);
    PipelineConfig pipe = PipelineConfig::from_config(cfg);
    EnergyReport report = make_report(*net, ds.samples, pipe.clamp_negative(), k,
                                      derive_seed(cfg, kSeedEval), max_samples);
    write_text(opts.out_dir + "/energy.json", report_to_json(report));
    write_text(opts.out_dir + "/energy.csv", report_to_csv(report));
    std::printf("energy: %.3g GFLOPs, %.3g GSOPs, dynamic snn %.4g mJ, ann %.4g mJ, "
                "static %.4g mJ (%lld params)\n",
                report.total_flops * 1e-9, report.total_sops * 1e-9,
                report.dynamic_snn_j * 1e3, report.dynamic_ann_j * 1e3, report.static_j * 1e3,
                static_cast<long long>(report.params));
    return 0;
}

int cmd_gradcheck(const CommonOpts& opts) {
    Config cfg = resolve(opts);
    uint64_t seed = cfg.get_seed("seed", 42);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    auto results = run_gradchecks(seed);
    std::string csv = "check,max_err,tolerance,pass\n";
    char buf[160];
    bool all_pass = true;
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%s,%.3g,%.3g,%s\n", r.name.c_str(), r.max_err,
                      r.tolerance, r.pass ? "true" : "false");
        csv += buf;
        std::cout << buf;
        all_pass = all_pass && r.pass;
    }
    write_text(opts.out_dir + "/gradcheck.csv", csv);
    return all_pass ? 0 : 1;
}

int cmd_ablate(const CommonOpts& opts, const std::string& suite_flag) {
    Config cfg = resolve(opts);
    std::string suite = !suite_flag.empty() ? suite_flag : cfg.get_str("ablate.suite", "");
    if (suite.empty()) throw UsageError("ablate: provide --suite or ablate.suite");
    cfg.set("ablate.suite", suite);
    cfg.get_str("ablate.suite", "");
    materialize_run_config(cfg);
    check_unread(cfg);
    echo_resolved(cfg, opts.out_dir);

    Config base = cfg;
    base.mark_all_read();
    auto rows = ablate(suite, base, &std::cout);
    write_text(opts.out_dir + "/ablate.csv", ablate_to_csv(rows));
    std::cout << "ablate: " << rows.size() << " variants -> " << opts.out_dir
              << "/ablate.csv\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"SpikePoint: event-cloud spiking point network pipeline", "spikepoint"};
    app.require_subcommand(1);

    CommonOpts gen_o, pre_o, stats_o, train_o, eval_o, energy_o, grad_o, ablate_o;
    std::string eval_ckpt, energy_ckpt, ablate_suite, grouping_row;
    std::string pre_manifest, train_manifest, eval_manifest;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a labeled synthetic event set");
    add_common(gen, gen_o);
    CLI::App* pre = app.add_subcommand("preprocess", "window, sample, group and cache a dataset");
    add_common(pre, pre_o);
    pre->add_option("--manifest", pre_manifest, "dataset manifest JSON");
    CLI::App* stats = app.add_subcommand("encode-stats", "rate-coding error and dispersion report");
    add_common(stats, stats_o);
    CLI::App* tr = app.add_subcommand("train", "train a network");
    add_common(tr, train_o);
    tr->add_option("--manifest", train_manifest, "dataset manifest JSON");
    tr->add_option("--grouping-variant", grouping_row,
                   "grouping ablation row (1-10) selecting the channel layout");
    CLI::App* ev = app.add_subcommand("eval", "voted stream-level evaluation of a checkpoint");
    add_common(ev, eval_o);
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate");
    ev->add_option("--manifest", eval_manifest, "dataset manifest JSON");
    CLI::App* en = app.add_subcommand("energy", "operation counts and the energy model report");
    add_common(en, energy_o);
    en->add_option("--checkpoint", energy_ckpt, "checkpoint to measure (optional)");
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference checks of the gradients");
    add_common(gc, grad_o);
    CLI::App* ab = app.add_subcommand("ablate", "run an ablation suite");
    add_common(ab, ablate_o);
    ab->add_option("--suite", ablate_suite, "timestep | grouping | structure | resf");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto use_manifest = [](CommonOpts& o, const std::string& path) {
        if (path.empty()) return;
        o.sets.push_back("data.source=manifest");
        o.sets.push_back("data.manifest=" + path);
    };

    try {
        if (gen->parsed()) return cmd_gen_data(gen_o);
        if (pre->parsed()) {
            use_manifest(pre_o, pre_manifest);
            return cmd_preprocess(pre_o);
        }
        if (stats->parsed()) return cmd_encode_stats(stats_o);
        if (tr->parsed()) {
            use_manifest(train_o, train_manifest);
            if (!grouping_row.empty()) {
                std::string digits = grouping_row.rfind("row", 0) == 0 ? grouping_row.substr(3)
                                                                       : grouping_row;
                GroupingVariant v = GroupingVariant::table_row(std::stoi(digits));
                train_o.sets.push_back(
                    std::string("group.variant=") +
                    (v.negative_handling == NegativeHandling::absolute ? "absolute"
                     : v.negative_handling == NegativeHandling::unit_normalize
                         ? "unit_normalize"
                         : "raw"));
                train_o.sets.push_back(std::string("group.corner=") +
                                       (v.corner == Corner::min_corner ? "min_corner"
                                                                       : "centroid"));
                train_o.sets.push_back(
                    std::string("group.branches=") +
                    (v.branches == Branches::double_branch ? "double" : "single"));
                train_o.sets.push_back(std::string("group.fusion=") +
                                       (v.fusion == Fusion::add ? "add" : "concat"));
            }
            return cmd_train(train_o);
        }
        if (ev->parsed()) {
            use_manifest(eval_o, eval_manifest);
            return cmd_eval(eval_o, eval_ckpt);
        }
        if (en->parsed()) return cmd_energy(energy_o, energy_ckpt);
        if (gc->parsed()) return cmd_gradcheck(grad_o);
        if (ab->parsed()) return cmd_ablate(ablate_o, ablate_suite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace cli
}  // namespace spikepoint
