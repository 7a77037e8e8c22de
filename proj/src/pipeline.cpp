#include "spikepoint/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "spikepoint/rng.hpp"
#include "spikepoint/training.hpp"

namespace spikepoint {

using nlohmann::json;

PipelineConfig PipelineConfig::from_config(const Config& cfg) {
    PipelineConfig p;
    p.window_us = static_cast<uint64_t>(cfg.get_int("window.length_us", 500'000));
    p.overlap_us = static_cast<uint64_t>(cfg.get_int("window.overlap_us", 250'000));
    p.denoise_enable = cfg.get_bool("denoise.enable", false);
    p.denoise_radius_px = static_cast<int>(cfg.get_int("denoise.radius_px", 2));
    p.denoise_dt_us = static_cast<uint64_t>(cfg.get_int("denoise.dt_us", 10'000));
    p.denoise_k_min = static_cast<int>(cfg.get_int("denoise.k_min", 2));
    p.N = cfg.get_int("group.N", 1024);
    p.M = cfg.get_int("group.M", 64);
    p.K = cfg.get_int("group.K", 24);
    p.min_window_events = static_cast<int>(cfg.get_int("window.min_events", 8));

    std::string nh = cfg.get_enum("group.variant", "absolute", {"absolute", "unit_normalize", "raw"});
    p.variant.negative_handling = nh == "absolute"         ? NegativeHandling::absolute
                                  : nh == "unit_normalize" ? NegativeHandling::unit_normalize
                                                           : NegativeHandling::raw;
    std::string corner =
        cfg.get_enum("group.corner", "min_corner", {"min_corner", "centroid", "centroid_shifted"});
    p.variant.corner = corner == "min_corner" ? Corner::min_corner
                       : corner == "centroid" ? Corner::centroid
                                              : Corner::centroid_shifted;
    p.variant.branches =
        cfg.get_enum("group.branches", "double", {"double", "single"}) == "double"
            ? Branches::double_branch
            : Branches::single_branch;
    p.variant.fusion =
        cfg.get_enum("group.fusion", "add", {"add", "concat"}) == "add" ? Fusion::add
                                                                        : Fusion::concat;
    return p;
}

void PipelineConfig::to_config(Config& cfg) const {
    cfg.set("window.length_us", std::to_string(window_us));
    cfg.set("window.overlap_us", std::to_string(overlap_us));
    cfg.set("window.min_events", std::to_string(min_window_events));
    cfg.set("denoise.enable", denoise_enable ? "true" : "false");
    cfg.set("denoise.radius_px", std::to_string(denoise_radius_px));
    cfg.set("denoise.dt_us", std::to_string(denoise_dt_us));
    cfg.set("denoise.k_min", std::to_string(denoise_k_min));
    cfg.set("group.N", std::to_string(N));
    cfg.set("group.M", std::to_string(M));
    cfg.set("group.K", std::to_string(K));
    cfg.set("group.variant", variant.negative_handling == NegativeHandling::absolute ? "absolute"
                             : variant.negative_handling == NegativeHandling::unit_normalize
                                 ? "unit_normalize"
                                 : "raw");
    cfg.set("group.corner", variant.corner == Corner::min_corner ? "min_corner"
                            : variant.corner == Corner::centroid ? "centroid"
                                                                 : "centroid_shifted");
    cfg.set("group.branches",
            variant.branches == Branches::double_branch ? "double" : "single");
    cfg.set("group.fusion", variant.fusion == Fusion::add ? "add" : "concat");
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what(), 0);
    }
    Manifest m;
    m.width = j.at("width").get<uint16_t>();
    m.height = j.at("height").get<uint16_t>();
    for (const auto& s : j.at("streams")) {
        Entry e;
        e.path = s.at("path").get<std::string>();
        e.label = s.at("label").get<int>();
        e.split = s.at("split").get<std::string>();
        if (e.split != "train" && e.split != "test") {
            throw ConfigError("manifest: split must be train or test, got '" + e.split + "'");
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    json j;
    j["width"] = width;
    j["height"] = height;
    j["streams"] = json::array();
    for (const auto& e : entries) {
        j["streams"].push_back({{"path", e.path}, {"label", e.label}, {"split", e.split}});
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

GroupedSample window_to_sample(const WindowClip& clip, uint16_t width, uint16_t height,
                               const PipelineConfig& cfg, int stream_idx, int window_idx,
                               uint64_t seed) {
    PointSample pts = normalize_window(clip, width, height);
    GroupedSample s;
    s.points = random_sample(pts, cfg.N, counter_hash(seed, 1, 0));
    auto centroids = fps(s.points, cfg.M, counter_hash(seed, 2, 0));
    auto members = knn(s.points, centroids, cfg.K);
    s.grouped = standardize_groups(s.points, centroids, members, cfg.K, cfg.variant);
    s.stream_idx = stream_idx;
    s.window_idx = window_idx;
    s.seed = seed;
    return s;
}

Dataset build_dataset(const std::vector<EventStream>& streams,
                      const std::vector<std::string>& splits, const PipelineConfig& cfg,
                      uint64_t seed) {
    if (streams.size() != splits.size()) {
        throw ConfigError("build_dataset: streams/splits size mismatch");
    }
    Dataset ds;
    for (size_t i = 0; i < streams.size(); ++i) {
        const EventStream* stream = &streams[i];
        EventStream filtered;
        if (cfg.denoise_enable) {
            filtered = denoise(*stream, cfg.denoise_radius_px, cfg.denoise_dt_us,
                               cfg.denoise_k_min);
            stream = &filtered;
        }
        ds.stream_labels.push_back(stream->label);
        ds.stream_splits.push_back(splits[i]);
        auto clips = slice_windows(*stream, cfg.window_us, cfg.overlap_us, static_cast<int>(i));
        for (size_t w = 0; w < clips.size(); ++w) {
            const WindowClip& clip = clips[w];
            if (static_cast<int>(clip.events.size()) < cfg.min_window_events) {
                ++ds.skipped_windows;
                continue;
            }
            uint64_t wseed = counter_hash(seed, i, w);
            GroupedSample sample;
            try {
                sample = window_to_sample(clip, stream->width, stream->height, cfg,
                                          static_cast<int>(i), static_cast<int>(w), wseed);
            } catch (const DegenerateInputError&) {
                ++ds.skipped_windows;
                continue;
            }
            sample.label = stream->label;
            size_t idx = ds.samples.size();
            if (splits[i] == "test") {
                ds.test_idx.push_back(idx);
            } else {
                ds.train_idx.push_back(idx);
            }
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

std::vector<std::string> assign_splits(size_t n_streams, double test_fraction, uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0) {
        throw ConfigError("test fraction must be in [0, 1)");
    }
    std::vector<size_t> order(n_streams);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix64(seed + 0x5157));
    rng.shuffle(order);
    size_t n_test = static_cast<size_t>(std::llround(test_fraction * static_cast<double>(n_streams)));
    std::vector<std::string> splits(n_streams, "train");
    for (size_t i = 0; i < n_test && i < n_streams; ++i) splits[order[i]] = "test";
    return splits;
}

SynthSpec synth_spec_from_config(const Config& cfg) {
    SynthSpec spec;
    int64_t classes = cfg.get_int("data.classes", 4);
    static const MotionClass kAll[] = {MotionClass::translating_blob, MotionClass::rotating_dipole,
                                       MotionClass::expanding_ring, MotionClass::zigzag};
    if (classes < 2 || classes > 4) {
        throw ConfigError("data.classes must be between 2 and 4 for the synthetic generator");
    }
    spec.classes.assign(kAll, kAll + classes);
    spec.streams_per_class = static_cast<int>(cfg.get_int("data.streams_per_class", 30));
    spec.duration_us = static_cast<uint64_t>(cfg.get_int("data.duration_us", 1'000'000));
    spec.rate_hz = cfg.get_double("data.rate_hz", 20'000.0);
    spec.noise_rate_hz = cfg.get_double("data.noise_hz", 1'000.0);
    spec.width = static_cast<uint16_t>(cfg.get_int("data.width", 128));
    spec.height = static_cast<uint16_t>(cfg.get_int("data.height", 128));
    return spec;
}

std::vector<EventStream> load_manifest_streams(const Manifest& manifest,
                                               const std::string& base_dir,
                                               std::vector<std::string>* splits) {
    std::vector<EventStream> streams;
    if (splits) splits->clear();
    for (const auto& e : manifest.entries) {
        std::string path = e.path;
        if (!path.empty() && path[0] != '/') path = base_dir + "/" + path;
        EventStream s = read_stream_file(path);
        s.label = e.label;
        if (s.width != manifest.width || s.height != manifest.height) {
            throw ConfigError("manifest: stream " + e.path + " geometry differs from manifest");
        }
        streams.push_back(std::move(s));
        if (splits) splits->push_back(e.split);
    }
    return streams;
}

namespace {

std::string sample_prefix(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06zu", i);
    return buf;
}

ContainerTensor to_f32(const std::string& name, std::vector<int64_t> shape,
                       const std::vector<double>& src) {
    ContainerTensor t;
    t.name = name;
    t.shape = std::move(shape);
    t.data.reserve(src.size());
    for (double v : src) t.data.push_back(static_cast<float>(v));
    return t;
}

std::vector<double> to_f64(const ContainerTensor& t) {
    return {t.data.begin(), t.data.end()};
}

}  // namespace

void save_grouped_cache(const Dataset& dataset, const Config& resolved, const std::string& path) {
    const std::vector<GroupedSample>& samples = dataset.samples;
    std::map<std::string, std::string> meta;
    meta["sample_count"] = std::to_string(samples.size());
    meta["config"] = resolved.serialize();
    meta["skipped_windows"] = std::to_string(dataset.skipped_windows);
    {
        std::string labels, splits;
        for (size_t i = 0; i < dataset.stream_labels.size(); ++i) {
            if (i) {
                labels += ',';
                splits += ',';
            }
            labels += std::to_string(dataset.stream_labels[i]);
            splits += dataset.stream_splits[i];
        }
        meta["stream_labels"] = labels;
        meta["stream_splits"] = splits;
    }
    std::vector<ContainerTensor> tensors;
    char buf[64];
    for (size_t i = 0; i < samples.size(); ++i) {
        const GroupedSample& s = samples[i];
        std::string p = sample_prefix(i);
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%llu", s.label, s.stream_idx, s.window_idx,
                      static_cast<unsigned long long>(s.seed));
        meta[p + ".info"] = buf;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", s.grouped.sd, s.grouped.mean_abs_offset);
        meta[p + ".stats"] = buf;
        int64_t M = s.grouped.M, K = s.grouped.K;
        tensors.push_back(to_f32(p + ".channel1", {M, K, 6}, s.grouped.channel1));
        tensors.push_back(to_f32(p + ".channel2", {M, 3}, s.grouped.channel2));
        tensors.push_back(to_f32(p + ".centroids", {M, 3}, s.grouped.centroids));
        ContainerTensor idx;
        idx.name = p + ".member_idx";
        idx.shape = {M, K};
        idx.data.reserve(s.grouped.member_idx.size());
        for (int32_t v : s.grouped.member_idx) idx.data.push_back(static_cast<float>(v));
        tensors.push_back(std::move(idx));
        tensors.push_back(to_f32(p + ".points", {s.points.n, 3}, s.points.xyz));
    }
    write_container(path, "grouped_cache", meta, tensors);
}

Dataset load_grouped_cache(const std::string& path) {
    Container c = read_container(path);
    if (c.kind != "grouped_cache") {
        throw CheckpointError("container at " + path + " is not a grouped cache (kind '" +
                              c.kind + "')");
    }
    Dataset ds;
    {
        auto split_csv = [](const std::string& s) {
            std::vector<std::string> out;
            size_t pos = 0;
            if (s.empty()) return out;
            while (true) {
                size_t comma = s.find(',', pos);
                out.push_back(s.substr(pos, comma - pos));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            return out;
        };
        for (const auto& l : split_csv(c.meta.at("stream_labels"))) {
            ds.stream_labels.push_back(std::stoi(l));
        }
        ds.stream_splits = split_csv(c.meta.at("stream_splits"));
        ds.skipped_windows = std::stoi(c.meta.at("skipped_windows"));
    }
    size_t count = std::stoull(c.meta.at("sample_count"));
    std::vector<GroupedSample>& samples = ds.samples;
    samples.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        std::string p = sample_prefix(i);
        GroupedSample s;
        {
            const std::string& info = c.meta.at(p + ".info");
            unsigned long long seed = 0;
            if (std::sscanf(info.c_str(), "%d,%d,%d,%llu", &s.label, &s.stream_idx,
                            &s.window_idx, &seed) != 4) {
                throw CheckpointError("grouped cache: bad info entry for " + p);
            }
            s.seed = seed;
            const std::string& stats = c.meta.at(p + ".stats");
            if (std::sscanf(stats.c_str(), "%lg,%lg", &s.grouped.sd,
                            &s.grouped.mean_abs_offset) != 2) {
                throw CheckpointError("grouped cache: bad stats entry for " + p);
            }
        }
        const ContainerTensor& c1 = c.find(p + ".channel1");
        s.grouped.M = c1.shape[0];
        s.grouped.K = c1.shape[1];
        s.grouped.channel1 = to_f64(c1);
        s.grouped.channel2 = to_f64(c.find(p + ".channel2"));
        s.grouped.centroids = to_f64(c.find(p + ".centroids"));
        const ContainerTensor& idx = c.find(p + ".member_idx");
        s.grouped.member_idx.reserve(idx.data.size());
        for (float v : idx.data) s.grouped.member_idx.push_back(static_cast<int32_t>(v));
        const ContainerTensor& pts = c.find(p + ".points");
        s.points.n = pts.shape[0];
        s.points.xyz = to_f64(pts);
        size_t sample_at = samples.size();
        if (s.stream_idx >= 0 &&
            static_cast<size_t>(s.stream_idx) < ds.stream_splits.size() &&
            ds.stream_splits[static_cast<size_t>(s.stream_idx)] == "test") {
            ds.test_idx.push_back(sample_at);
        } else {
            ds.train_idx.push_back(sample_at);
        }
        samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace spikepoint
