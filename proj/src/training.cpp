#include "spikepoint/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "spikepoint/rng.hpp"

namespace spikepoint {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Container
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

uint64_t get_u64c(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

constexpr char kContainerMagic[4] = {'S', 'P', 'K', 'C'};

}  // namespace

void write_container(const std::string& path, const std::string& kind,
                     const std::map<std::string, std::string>& meta,
                     const std::vector<ContainerTensor>& tensors) {
    json header;
    header["kind"] = kind;
    header["format_version"] = kContainerVersion;
    header["meta"] = meta;
    header["tensors"] = json::array();
    uint64_t offset = 0;
    for (const auto& t : tensors) {
        int64_t numel = 1;
        for (int64_t d : t.shape) numel *= d;
        if (numel != static_cast<int64_t>(t.data.size())) {
            throw CheckpointError("write_container: tensor '" + t.name +
                                  "' data does not match its shape");
        }
        header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        offset += static_cast<uint64_t>(t.data.size()) * 4;
    }
    std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write container: " + path);
    out.write(kContainerMagic, 4);
    put_u32(out, kContainerVersion);
    put_u64(out, header_str.size());
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& t : tensors) {
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!out) throw Error("short write to container: " + path);
}

const ContainerTensor& Container::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw CheckpointError("container: missing tensor '" + name + "'");
}

bool Container::has(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

Container read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open container: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 16) throw CheckpointError("container: truncated header");
    if (std::memcmp(bytes.data(), kContainerMagic, 4) != 0) {
        throw CheckpointError("container: bad magic (not a SPKC container)");
    }
    uint32_t version = get_u32(bytes.data() + 4);
    if (version != kContainerVersion) {
        throw CheckpointError("container: unsupported format version " +
                              std::to_string(version) + " (expected " +
                              std::to_string(kContainerVersion) + ")");
    }
    uint64_t header_len = get_u64c(bytes.data() + 8);
    if (16 + header_len > bytes.size()) throw CheckpointError("container: truncated header JSON");
    json header;
    try {
        header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + header_len);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("container: bad header JSON: ") + e.what());
    }

    Container c;
    c.kind = header.at("kind").get<std::string>();
    for (auto& [k, v] : header.at("meta").items()) c.meta[k] = v.get<std::string>();

    const uint8_t* payload = bytes.data() + 16 + header_len;
    uint64_t payload_len = bytes.size() - 16 - header_len;
    uint64_t prev_end = 0;
    for (const auto& tj : header.at("tensors")) {
        ContainerTensor t;
        t.name = tj.at("name").get<std::string>();
        t.shape = tj.at("shape").get<std::vector<int64_t>>();
        uint64_t offset = tj.at("offset").get<uint64_t>();
        int64_t numel = 1;
        for (int64_t d : t.shape) numel *= d;
        uint64_t len = static_cast<uint64_t>(numel) * 4;
        if (offset < prev_end) {
            throw CheckpointError("container: overlapping tensor '" + t.name + "' in manifest");
        }
        if (offset + len > payload_len) {
            throw CheckpointError("container: tensor '" + t.name +
                                  "' extends past the payload (truncated file?)");
        }
        prev_end = offset + len;
        t.data.resize(static_cast<size_t>(numel));
        std::memcpy(t.data.data(), payload + offset, static_cast<size_t>(len));
        c.tensors.push_back(std::move(t));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Training config and optimizer
// ---------------------------------------------------------------------------

TrainConfig TrainConfig::from_config(const Config& cfg) {
    TrainConfig t;
    t.lr = cfg.get_double("train.lr", 1e-3);
    t.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", 300));
    t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 6));
    t.beta1 = cfg.get_double("train.beta1", 0.9);
    t.beta2 = cfg.get_double("train.beta2", 0.999);
    t.eps = cfg.get_double("train.eps", 1e-8);
    t.grad_clip = cfg.get_double("train.grad_clip", 0.0);
    t.target_voted_acc = cfg.get_double("train.target_acc", 0.0);
    t.seed = cfg.get_seed("seed", 42);
    if (t.lr <= 0.0) throw ConfigError("train.lr must be positive");
    if (t.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (t.max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    return t;
}

void TrainConfig::to_config(Config& cfg) const {
    char buf[32];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    cfg.set("train.lr", fmt(lr));
    cfg.set("train.max_epochs", std::to_string(max_epochs));
    cfg.set("train.batch_size", std::to_string(batch_size));
    cfg.set("train.beta1", fmt(beta1));
    cfg.set("train.beta2", fmt(beta2));
    cfg.set("train.eps", fmt(eps));
    cfg.set("train.grad_clip", fmt(grad_clip));
    cfg.set("train.target_acc", fmt(target_voted_acc));
    cfg.set("seed", std::to_string(seed));
}

double cosine_lr(double lr0, int64_t epoch, int64_t max_epochs) {
    return lr0 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                 static_cast<double>(max_epochs))) /
           2.0;
}

void Adam::step(std::vector<std::pair<std::string, Param*>>& params, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            double g = p->grad[i];
            double m = beta1_ * p->adam_m[i] + (1.0 - beta1_) * g;
            double v = beta2_ * p->adam_v[i] + (1.0 - beta2_) * g * g;
            p->adam_m[i] = static_cast<float>(m);
            p->adam_v[i] = static_cast<float>(v);
            p->value[i] -= static_cast<float>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps_));
        }
    }
}

// ---------------------------------------------------------------------------
// Train loop
// ---------------------------------------------------------------------------

namespace {

bool uses_raw_points(const NetworkConfig& nc) {
    return nc.structure == Structure::global_only || nc.structure == Structure::pointnet;
}

EncodedBatch encode_indices(const Network& net, const Dataset& ds,
                            const std::vector<size_t>& idx, size_t begin, size_t end,
                            const PipelineConfig& pipe, uint64_t seed_base, uint64_t epoch_salt) {
    const NetworkConfig& nc = net.config();
    std::vector<int> labels;
    std::vector<uint64_t> seeds;
    for (size_t i = begin; i < end; ++i) {
        const GroupedSample& s = ds.samples[idx[i]];
        labels.push_back(s.label);
        seeds.push_back(counter_hash(seed_base, epoch_salt, idx[i]));
    }
    if (uses_raw_points(nc)) {
        std::vector<const PointSet*> pts;
        for (size_t i = begin; i < end; ++i) pts.push_back(&ds.samples[idx[i]].points);
        return encode_batch_raw(nc, pts, labels, seeds);
    }
    std::vector<const GroupedInput*> grouped;
    for (size_t i = begin; i < end; ++i) grouped.push_back(&ds.samples[idx[i]].grouped);
    return encode_batch(nc, grouped, labels, seeds, pipe.clamp_negative());
}

struct PassStats {
    double loss_sum = 0.0;
    int64_t count = 0;
    int64_t correct = 0;
    double fire_sum = 0.0;
    int64_t fire_n = 0;
    // per-window results, in the order the indices were visited
    std::vector<int> preds;
    std::vector<double> pred_scores;  // mean over T of the predicted class score

    double loss() const { return count ? loss_sum / static_cast<double>(count) : 0.0; }
    double accuracy() const {
        return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0;
    }
    double fire_rate() const { return fire_n ? fire_sum / static_cast<double>(fire_n) : 0.0; }
};

void batch_stats(ad::Tape& tape, const ForwardResult& fr, const EncodedBatch& eb, float loss_v,
                 PassStats& stats) {
    const Tensor& scores = tape.value(fr.scores);
    int64_t T = scores.dim(0), B = scores.dim(1), C = scores.dim(2);
    std::vector<int> preds = predictions_from_scores(scores);
    for (int64_t b = 0; b < B; ++b) {
        int pred = preds[static_cast<size_t>(b)];
        double mean = 0.0;
        for (int64_t t = 0; t < T; ++t) mean += scores[(t * B + b) * C + pred];
        mean /= static_cast<double>(T);
        stats.preds.push_back(pred);
        stats.pred_scores.push_back(mean);
        if (pred == eb.labels[static_cast<size_t>(b)]) ++stats.correct;
    }
    stats.loss_sum += static_cast<double>(loss_v) * static_cast<double>(B);
    stats.count += B;
    for (const LayerTap& tap : fr.taps) {
        stats.fire_sum += nonzero_fraction(tape.value(tap.input));
        ++stats.fire_n;
    }
}

double grad_norm(std::vector<std::pair<std::string, Param*>>& params) {
    double acc = 0.0;
    for (auto& [name, p] : params) {
        for (float g : p->grad.data) acc += static_cast<double>(g) * g;
    }
    return std::sqrt(acc);
}

}  // namespace

int vote(const std::vector<int>& window_preds, const std::vector<double>& window_scores,
         int classes) {
    if (window_preds.empty()) throw DegenerateInputError("vote: no window predictions");
    if (window_preds.size() != window_scores.size()) {
        throw ShapeError("vote: preds/scores size mismatch");
    }
    std::vector<int> counts(static_cast<size_t>(classes), 0);
    std::vector<double> score_sums(static_cast<size_t>(classes), 0.0);
    for (size_t i = 0; i < window_preds.size(); ++i) {
        int p = window_preds[i];
        if (p < 0 || p >= classes) throw ConfigError("vote: prediction out of range");
        counts[static_cast<size_t>(p)]++;
        score_sums[static_cast<size_t>(p)] += window_scores[i];
    }
    int best = 0;
    for (int c = 1; c < classes; ++c) {
        size_t cc = static_cast<size_t>(c), bb = static_cast<size_t>(best);
        if (counts[cc] > counts[bb] ||
            (counts[cc] == counts[bb] && score_sums[cc] > score_sums[bb])) {
            best = c;
        }
    }
    return best;
}

std::vector<StreamEval> evaluate_split(Network& net, const Dataset& dataset, bool test_split,
                                       uint64_t seed) {
    const std::vector<size_t>& idx = test_split ? dataset.test_idx : dataset.train_idx;
    PipelineConfig pipe;  // only clamp flag matters here; infer from data
    // Detect negative channel values to decide clamping (raw variant data).
    bool clamp = false;
    for (size_t i : idx) {
        for (double v : dataset.samples[i].grouped.channel1) {
            if (v < 0.0) {
                clamp = true;
                break;
            }
        }
        if (clamp) break;
    }
    pipe.variant.negative_handling =
        clamp ? NegativeHandling::raw : NegativeHandling::absolute;

    constexpr size_t kEvalBatch = 16;
    PassStats stats;
    for (size_t begin = 0; begin < idx.size(); begin += kEvalBatch) {
        size_t end = std::min(idx.size(), begin + kEvalBatch);
        EncodedBatch eb = encode_indices(net, dataset, idx, begin, end, pipe, seed, 0);
        ad::Tape tape;
        ForwardResult fr = net.forward(tape, eb, /*training=*/false);
        batch_stats(tape, fr, eb, 0.0f, stats);
    }

    // group windows by stream and vote
    std::map<int, std::pair<std::vector<int>, std::vector<double>>> by_stream;
    for (size_t i = 0; i < idx.size(); ++i) {
        const GroupedSample& s = dataset.samples[idx[i]];
        by_stream[s.stream_idx].first.push_back(stats.preds[i]);
        by_stream[s.stream_idx].second.push_back(stats.pred_scores[i]);
    }
    int classes = static_cast<int>(net.config().classes);
    std::vector<StreamEval> out;
    for (auto& [stream_idx, pv] : by_stream) {
        StreamEval e;
        e.stream_idx = stream_idx;
        e.label = dataset.stream_labels[static_cast<size_t>(stream_idx)];
        e.predicted = vote(pv.first, pv.second, classes);
        out.push_back(e);
    }
    return out;
}

double voted_accuracy(const std::vector<StreamEval>& evals) {
    if (evals.empty()) return 0.0;
    int64_t ok = 0;
    for (const auto& e : evals) {
        if (e.predicted == e.label) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(evals.size());
}

int evaluate_stream(Network& net, const EventStream& stream, const PipelineConfig& pipe,
                    int stream_idx, uint64_t seed) {
    auto clips = slice_windows(stream, pipe.window_us, pipe.overlap_us, stream_idx);
    std::vector<int> preds;
    std::vector<double> scores;
    for (size_t w = 0; w < clips.size(); ++w) {
        const WindowClip& clip = clips[w];
        if (static_cast<int>(clip.events.size()) < pipe.min_window_events) continue;
        GroupedSample sample;
        try {
            sample = window_to_sample(clip, stream.width, stream.height, pipe, stream_idx,
                                      static_cast<int>(w), counter_hash(seed, 1, w));
        } catch (const DegenerateInputError&) {
            continue;
        }
        SamplePrediction p = net.predict(sample.grouped, counter_hash(seed, 2, w),
                                         pipe.clamp_negative());
        preds.push_back(p.prediction);
        scores.push_back(p.mean_score);
    }
    if (preds.empty()) {
        throw DegenerateInputError("evaluate_stream: stream yields no usable windows");
    }
    return vote(preds, scores, static_cast<int>(net.config().classes));
}

std::string metrics_to_csv(const std::vector<EpochRow>& rows) {
    std::string out = "epoch,split,loss,accuracy,lr,mean_fire_rate\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.split.c_str(),
                      r.loss, r.accuracy, r.lr, r.mean_fire_rate);
        out += buf;
    }
    return out;
}

TrainResult train(Network& net, const Dataset& dataset, const TrainConfig& cfg,
                  const PipelineConfig& pipe, std::ostream* log) {
    if (dataset.train_idx.empty()) throw ConfigError("train: empty training split");
    Adam adam(cfg.beta1, cfg.beta2, cfg.eps);
    auto params = net.named_params();
    TrainResult result;
    uint64_t train_enc_seed = mix64(cfg.seed + kSeedTrain);
    uint64_t eval_enc_seed = mix64(cfg.seed + kSeedEval);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double lr = cosine_lr(cfg.lr, epoch, cfg.max_epochs);

        std::vector<size_t> order = dataset.train_idx;
        Rng shuffle_rng(counter_hash(cfg.seed, 0xE0, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        PassStats train_stats;
        size_t bsz = static_cast<size_t>(cfg.batch_size);
        for (size_t begin = 0; begin < order.size(); begin += bsz) {
            size_t end = std::min(order.size(), begin + bsz);
            EncodedBatch eb = encode_indices(net, dataset, order, begin, end, pipe,
                                             train_enc_seed, static_cast<uint64_t>(epoch) + 1);
            ad::Tape tape;
            ForwardResult fr = net.forward(tape, eb, /*training=*/true);
            ad::VarId loss = tape.mse_loss(fr.scores, eb.labels);
            float loss_v = tape.value(loss)[0];
            if (!std::isfinite(loss_v)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            tape.backward(loss);
            net.zero_grads();
            for (auto& [p, id] : fr.param_vars) {
                if (!tape.has_grad(id)) continue;
                const Tensor& g = tape.grad(id);
                for (int64_t i = 0; i < g.numel(); ++i) p->grad[i] += g[i];
            }
            if (cfg.grad_clip > 0.0) {
                double norm = grad_norm(params);
                if (norm > cfg.grad_clip) {
                    float scale = static_cast<float>(cfg.grad_clip / norm);
                    for (auto& [name, p] : params) {
                        for (float& g : p->grad.data) g *= scale;
                    }
                }
            }
            adam.step(params, lr);
            batch_stats(tape, fr, eb, loss_v, train_stats);
        }

        PassStats test_stats;
        if (!dataset.test_idx.empty()) {
            for (size_t begin = 0; begin < dataset.test_idx.size(); begin += 16) {
                size_t end = std::min(dataset.test_idx.size(), begin + 16);
                EncodedBatch eb = encode_indices(net, dataset, dataset.test_idx, begin, end,
                                                 pipe, eval_enc_seed, 0);
                ad::Tape tape;
                ForwardResult fr = net.forward(tape, eb, /*training=*/false);
                ad::VarId loss = tape.mse_loss(fr.scores, eb.labels);
                batch_stats(tape, fr, eb, tape.value(loss)[0], test_stats);
            }
        }

        result.rows.push_back({epoch, "train", train_stats.loss(), train_stats.accuracy(), lr,
                               train_stats.fire_rate()});
        result.rows.push_back({epoch, "test", test_stats.loss(), test_stats.accuracy(), lr,
                               test_stats.fire_rate()});
        result.epochs_run = epoch + 1;

        // stream-level voted accuracy from the test pass windows
        double voted = -1.0;
        if (!dataset.test_idx.empty()) {
            std::map<int, std::pair<std::vector<int>, std::vector<double>>> by_stream;
            for (size_t i = 0; i < dataset.test_idx.size(); ++i) {
                const GroupedSample& s = dataset.samples[dataset.test_idx[i]];
                by_stream[s.stream_idx].first.push_back(test_stats.preds[i]);
                by_stream[s.stream_idx].second.push_back(test_stats.pred_scores[i]);
            }
            int64_t ok = 0;
            for (auto& [stream_idx, pv] : by_stream) {
                int pred = vote(pv.first, pv.second, static_cast<int>(net.config().classes));
                if (pred == dataset.stream_labels[static_cast<size_t>(stream_idx)]) ++ok;
            }
            voted = by_stream.empty()
                        ? 0.0
                        : static_cast<double>(ok) / static_cast<double>(by_stream.size());
            result.final_voted_test_acc = voted;
        }

        if (log) {
            (*log) << "epoch " << epoch << " lr " << lr << " train_loss " << train_stats.loss()
                   << " train_acc " << train_stats.accuracy() << " test_acc "
                   << test_stats.accuracy() << " voted " << voted << "\n";
        }
        if (cfg.target_voted_acc > 0.0 && voted >= cfg.target_voted_acc) break;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const Network& net, const Config& resolved, int epoch,
                     const std::map<std::string, double>& metrics, const std::string& path) {
    std::map<std::string, std::string> meta;
    meta["config"] = resolved.serialize();
    meta["epoch"] = std::to_string(epoch);
    char buf[64];
    for (const auto& [k, v] : metrics) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        meta["metric." + k] = buf;
    }
    std::vector<ContainerTensor> tensors;
    for (const auto& [name, p] : net.named_params()) {
        tensors.push_back({name, p->value.shape, p->value.data});
    }
    for (const auto& [name, t] : net.named_state()) {
        tensors.push_back({name, t->shape, t->data});
    }
    write_container(path, "checkpoint", meta, tensors);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Container c = read_container(path);
    if (c.kind != "checkpoint") {
        throw CheckpointError("container at " + path + " is not a checkpoint (kind '" + c.kind +
                              "')");
    }
    LoadedCheckpoint out;
    out.config = Config::parse(c.meta.at("config"));
    out.epoch = std::stoi(c.meta.at("epoch"));
    NetworkConfig nc = NetworkConfig::from_config(out.config);
    out.net = std::make_unique<Network>(nc, 0);
    auto restore = [&](const std::string& name, Tensor& dst) {
        const ContainerTensor& t = c.find(name);
        if (t.shape != dst.shape) {
            throw CheckpointError("checkpoint: tensor '" + name + "' has shape " +
                                  Tensor::shape_to_string(t.shape) +
                                  " but the configured network expects " + dst.shape_str());
        }
        dst.data = t.data;
    };
    for (auto& [name, p] : out.net->named_params()) restore(name, p->value);
    for (auto& [name, t] : out.net->named_state()) restore(name, *t);
    return out;
}

// ---------------------------------------------------------------------------
// Config-driven runs
// ---------------------------------------------------------------------------

uint64_t derive_seed(const Config& cfg, uint64_t salt) {
    return mix64(cfg.get_seed("seed", 42) + salt);
}

Dataset dataset_from_config(const Config& cfg) {
    std::string cache = cfg.get_str("data.cache", "");
    if (!cache.empty()) return load_grouped_cache(cache);

    PipelineConfig pipe = PipelineConfig::from_config(cfg);
    std::string source = cfg.get_enum("data.source", "synth", {"synth", "manifest"});
    std::vector<EventStream> streams;
    std::vector<std::string> splits;
    if (source == "synth") {
        SynthSpec spec = synth_spec_from_config(cfg);
        streams = synth_generate(spec, derive_seed(cfg, kSeedData));
        splits = assign_splits(streams.size(), cfg.get_double("data.test_fraction", 0.2),
                               derive_seed(cfg, kSeedSplit));
    } else {
        std::string manifest_path = cfg.get_str("data.manifest", "");
        if (manifest_path.empty()) {
            throw ConfigError("data.manifest is required when data.source=manifest");
        }
        Manifest m = Manifest::load(manifest_path);
        std::string base = std::filesystem::path(manifest_path).parent_path().string();
        if (base.empty()) base = ".";
        streams = load_manifest_streams(m, base, &splits);
    }
    return build_dataset(streams, splits, pipe, derive_seed(cfg, kSeedPipeline));
}

TrainRun run_training_from_config(const Config& cfg, std::ostream* log) {
    TrainRun run;
    run.pipe = PipelineConfig::from_config(cfg);
    NetworkConfig nc = NetworkConfig::from_config(cfg);
    if (cfg.get_str("data.source", "synth") == "synth" &&
        nc.classes != cfg.get_int("data.classes", 4)) {
        throw ConfigError("net.classes must match data.classes for the synthetic source");
    }
    Dataset dataset = dataset_from_config(cfg);
    run.tcfg = TrainConfig::from_config(cfg);
    run.net = std::make_unique<Network>(nc, derive_seed(cfg, kSeedInit));
    run.result = train(*run.net, dataset, run.tcfg, run.pipe, log);
    return run;
}

// ---------------------------------------------------------------------------
// Ablation harness
// ---------------------------------------------------------------------------

std::vector<std::string> ablate_variants(const std::string& suite) {
    if (suite == "timestep") return {"T=2", "T=4", "T=8", "T=12", "T=16", "T=24", "T=32"};
    if (suite == "grouping") {
        std::vector<std::string> rows;
        for (int i = 1; i <= 10; ++i) rows.push_back("row" + std::to_string(i));
        return rows;
    }
    if (suite == "structure") return {"full", "local_only", "global_only", "pointnet"};
    if (suite == "resf") return {"identity", "ann", "none"};
    throw ConfigError("unknown ablation suite: " + suite +
                      " (expected timestep, grouping, structure, or resf)");
}

namespace {

void apply_variant(Config& cfg, const std::string& suite, const std::string& variant) {
    if (suite == "timestep") {
        cfg.set("net.T", variant.substr(2));
    } else if (suite == "grouping") {
        int row = std::stoi(variant.substr(3));
        GroupingVariant v = GroupingVariant::table_row(row);
        cfg.set("group.variant", v.negative_handling == NegativeHandling::absolute ? "absolute"
                                 : v.negative_handling == NegativeHandling::unit_normalize
                                     ? "unit_normalize"
                                     : "raw");
        cfg.set("group.corner", v.corner == Corner::min_corner ? "min_corner" : "centroid");
        cfg.set("group.branches",
                v.branches == Branches::double_branch ? "double" : "single");
        cfg.set("group.fusion", v.fusion == Fusion::add ? "add" : "concat");
    } else if (suite == "structure") {
        cfg.set("net.structure", variant);
    } else if (suite == "resf") {
        cfg.set("net.residual", variant);
    }
}

}  // namespace

std::vector<AblateRow> ablate(const std::string& suite, const Config& base, std::ostream* log) {
    std::vector<AblateRow> rows;
    for (const std::string& variant : ablate_variants(suite)) {
        Config cfg = base;
        apply_variant(cfg, suite, variant);
        if (log) (*log) << "[ablate] " << suite << " " << variant << "\n";
        auto t0 = std::chrono::steady_clock::now();
        TrainRun run = run_training_from_config(cfg, log);
        auto t1 = std::chrono::steady_clock::now();
        AblateRow row;
        row.variant = variant;
        row.accuracy = run.result.final_voted_test_acc;
        row.epochs = run.result.epochs_run;
        row.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        rows.push_back(row);
    }
    return rows;
}

std::string ablate_to_csv(const std::vector<AblateRow>& rows) {
    std::string out = "variant,accuracy,epochs,wall_seconds\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6g,%d,%.3f\n", r.variant.c_str(), r.accuracy,
                      r.epochs, r.wall_seconds);
        out += buf;
    }
    return out;
}

}  // namespace spikepoint
