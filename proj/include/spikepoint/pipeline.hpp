#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikepoint/config.hpp"
#include "spikepoint/event_io.hpp"
#include "spikepoint/pointcloud.hpp"

namespace spikepoint {

// Everything between a raw event stream and a network-ready grouped sample.
struct PipelineConfig {
    uint64_t window_us = 500'000;
    uint64_t overlap_us = 250'000;
    bool denoise_enable = false;
    int denoise_radius_px = 2;
    uint64_t denoise_dt_us = 10'000;
    int denoise_k_min = 2;
    int64_t N = 1024;
    int64_t M = 64;
    int64_t K = 24;
    GroupingVariant variant;
    int min_window_events = 8;  // skip sparser windows

    bool clamp_negative() const {
        return variant.negative_handling == NegativeHandling::raw;
    }
    static PipelineConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

struct GroupedSample {
    GroupedInput grouped;
    PointSet points;  // sampled N x 3 set (raw-point structures read this)
    int label = -1;
    int stream_idx = -1;
    int window_idx = -1;
    uint64_t seed = 0;  // preprocessing seed used for sample/fps
};

struct Dataset {
    std::vector<GroupedSample> samples;
    std::vector<size_t> train_idx;
    std::vector<size_t> test_idx;
    std::vector<int> stream_labels;          // per stream
    std::vector<std::string> stream_splits;  // "train" / "test" per stream
    int skipped_windows = 0;

    int num_streams() const { return static_cast<int>(stream_labels.size()); }
};

// JSON dataset manifest: {"width", "height", "streams": [{path, label, split}]}.
struct Manifest {
    uint16_t width = 0;
    uint16_t height = 0;
    struct Entry {
        std::string path;
        int label = -1;
        std::string split;  // "train" or "test"
    };
    std::vector<Entry> entries;

    static Manifest load(const std::string& path);
    void save(const std::string& path) const;
};

GroupedSample window_to_sample(const WindowClip& clip, uint16_t width, uint16_t height,
                               const PipelineConfig& cfg, int stream_idx, int window_idx,
                               uint64_t seed);

Dataset build_dataset(const std::vector<EventStream>& streams,
                      const std::vector<std::string>& splits, const PipelineConfig& cfg,
                      uint64_t seed);

// Seeded stream-level split: round(test_fraction * n) streams become "test".
std::vector<std::string> assign_splits(size_t n_streams, double test_fraction, uint64_t seed);

SynthSpec synth_spec_from_config(const Config& cfg);
std::vector<EventStream> load_manifest_streams(const Manifest& manifest,
                                               const std::string& base_dir,
                                               std::vector<std::string>* splits);

// Preprocessed-sample cache in the binary tensor container format.
void save_grouped_cache(const Dataset& dataset, const Config& resolved, const std::string& path);
Dataset load_grouped_cache(const std::string& path);

}  // namespace spikepoint
