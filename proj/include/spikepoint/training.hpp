#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "spikepoint/config.hpp"
#include "spikepoint/pipeline.hpp"
#include "spikepoint/snn.hpp"

namespace spikepoint {

// ---------------------------------------------------------------------------
// Binary tensor container: shared by checkpoints and the preprocessed cache.
//   bytes 0..3   magic "SPKC"
//   bytes 4..7   u32 format version (LE)
//   bytes 8..15  u64 header JSON length (LE)
//   then the header JSON, then the little-endian float32 payload.
// The header carries a tensor manifest [{name, shape, offset}] with byte
// offsets into the payload.
// ---------------------------------------------------------------------------

inline constexpr uint32_t kContainerVersion = 1;

struct ContainerTensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> data;
};

void write_container(const std::string& path, const std::string& kind,
                     const std::map<std::string, std::string>& meta,
                     const std::vector<ContainerTensor>& tensors);

struct Container {
    std::string kind;
    std::map<std::string, std::string> meta;
    std::vector<ContainerTensor> tensors;

    const ContainerTensor& find(const std::string& name) const;
    bool has(const std::string& name) const;
};

Container read_container(const std::string& path);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double lr = 1e-3;
    int max_epochs = 300;
    int batch_size = 6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
    double grad_clip = 0.0;         // 0 disables clipping
    double target_voted_acc = 0.0;  // > 0: stop once voted test accuracy reaches it

    static TrainConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

// lr * (1 + cos(pi * epoch / max_epochs)) / 2
double cosine_lr(double lr0, int64_t epoch, int64_t max_epochs);

class Adam {
public:
    Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(std::vector<std::pair<std::string, Param*>>& params, double lr);

private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

struct EpochRow {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    double lr = 0.0;
    double mean_fire_rate = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> rows;
    int epochs_run = 0;
    double final_voted_test_acc = -1.0;
};

std::string metrics_to_csv(const std::vector<EpochRow>& rows);

TrainResult train(Network& net, const Dataset& dataset, const TrainConfig& cfg,
                  const PipelineConfig& pipe, std::ostream* log = nullptr);

// Majority vote over window predictions; ties go to the label with the
// greater summed mean score.
int vote(const std::vector<int>& window_preds, const std::vector<double>& window_scores,
         int classes);

int evaluate_stream(Network& net, const EventStream& stream, const PipelineConfig& pipe,
                    int stream_idx, uint64_t seed);

struct StreamEval {
    int stream_idx = -1;
    int label = -1;
    int predicted = -1;
};

// Voted prediction per stream over the dataset's windows of one split.
std::vector<StreamEval> evaluate_split(Network& net, const Dataset& dataset, bool test_split,
                                       uint64_t seed);
double voted_accuracy(const std::vector<StreamEval>& evals);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const Network& net, const Config& resolved, int epoch,
                     const std::map<std::string, double>& metrics, const std::string& path);

struct LoadedCheckpoint {
    std::unique_ptr<Network> net;
    Config config;
    int epoch = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Config-driven runs (shared by the CLI and the ablation harness)
// ---------------------------------------------------------------------------

// Builds the dataset named by the config: data.source=synth generates event
// streams on the fly; data.source=manifest loads them; data.cache=<file>
// short-circuits preprocessing with a saved grouped cache.
Dataset dataset_from_config(const Config& cfg);

struct TrainRun {
    std::unique_ptr<Network> net;
    TrainResult result;
    PipelineConfig pipe;
    TrainConfig tcfg;
};

TrainRun run_training_from_config(const Config& cfg, std::ostream* log = nullptr);

// Derived sub-seeds of the global `seed` key, one per concern.
uint64_t derive_seed(const Config& cfg, uint64_t salt);
inline constexpr uint64_t kSeedData = 0xDA7A;
inline constexpr uint64_t kSeedSplit = 0x5F17;
inline constexpr uint64_t kSeedPipeline = 0xF1FE;
inline constexpr uint64_t kSeedInit = 0x1417;
inline constexpr uint64_t kSeedTrain = 0x7124;
inline constexpr uint64_t kSeedEval = 0xE7A1;

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

struct AblateRow {
    std::string variant;
    double accuracy = 0.0;
    int epochs = 0;
    double wall_seconds = 0.0;
};

std::vector<std::string> ablate_variants(const std::string& suite);
std::vector<AblateRow> ablate(const std::string& suite, const Config& base,
                              std::ostream* log = nullptr);
std::string ablate_to_csv(const std::vector<AblateRow>& rows);

}  // namespace spikepoint
