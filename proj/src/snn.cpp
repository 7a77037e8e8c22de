#include "spikepoint/snn.hpp"

#include <cmath>

#include "spikepoint/rng.hpp"
#include "spikepoint/spike_coding.hpp"

namespace spikepoint {

float NeuronConfig::fixed_mem_decay() const {
    if (kind == NeuronKind::ifn) return 1.0f;
    return std::exp(-delta_t / tau_mem);
}

float NeuronConfig::syn_decay() const {
    return tau_syn > 0.0f ? std::exp(-delta_t / tau_syn) : 0.0f;
}

float NeuronConfig::plif_init_w() const {
    // sigmoid(w0) = 1 - 1/tau, the decay factor of the cited PLIF update.
    float decay = 1.0f - 1.0f / tau_mem;
    return std::log(decay / (1.0f - decay));
}

void NeuronConfig::validate() const {
    if (v_th <= 0.0f) throw ConfigError("neuron: v_th must be positive");
    if (kind != NeuronKind::ifn && tau_mem <= 1.0f) {
        throw ConfigError("neuron: tau_mem must be > 1");
    }
    if (tau_syn < 0.0f) throw ConfigError("neuron: tau_syn must be >= 0");
}

std::vector<float> neuron_step(NeuronState& state, std::span<const float> input,
                               float mem_decay, float syn_decay, float v_th) {
    size_t n = input.size();
    if (state.u.size() != n) state.u.assign(n, 0.0f);
    if (syn_decay != 0.0f && state.i_syn.size() != n) state.i_syn.assign(n, 0.0f);

    std::vector<float> spikes(n);
    double acc = 0.0;
    for (size_t d = 0; d < n; ++d) {
        float cur = input[d];
        if (syn_decay != 0.0f) {
            cur = syn_decay * state.i_syn[d] + input[d];
            state.i_syn[d] = cur;
        }
        float h = mem_decay * state.u[d] + cur;
        float s = ad::heaviside_spike(h - v_th);
        state.u[d] = h - v_th * s;
        spikes[d] = s;
        acc += h;
    }
    if (!std::isfinite(acc)) throw NumericError("neuron_step: non-finite membrane state");
    return spikes;
}

int64_t NetworkConfig::feature_width() const {
    switch (structure) {
        case Structure::full:
            return global_dims().back();
        case Structure::local_only: {
            bool wide = branches == Branches::double_branch && fusion == Fusion::concat;
            return wide ? 2 * local_dim() : local_dim();
        }
        case Structure::global_only:
        case Structure::pointnet:
            return raw_dims().back();
    }
    return 0;
}

void NetworkConfig::validate() const {
    neuron.validate();
    if (T < 1) throw ConfigError("net: T must be >= 1");
    if (classes < 2) throw ConfigError("net: need at least 2 classes");
    if (N < 1 || M < 1 || K < 1) throw ConfigError("net: N, M, K must be positive");
    if (M > N) throw ConfigError("net: M must not exceed N");
    if (K > N) throw ConfigError("net: K must not exceed N");
    if (local_dim() % 2 != 0) {
        throw ConfigError("net: local dim must be even (bottleneck is half the input)");
    }
    auto dims = global_dims();
    for (size_t i = 1; i < dims.size(); ++i) {
        if (dims[i] <= dims[i - 1]) {
            throw ConfigError("net: global extractor dims must be strictly increasing");
        }
    }
    if (fusion == Fusion::concat && branches != Branches::double_branch) {
        throw ConfigError("net: fusion=concat requires double branches");
    }
}

NetworkConfig NetworkConfig::from_config(const Config& cfg) {
    NetworkConfig nc;
    std::string variant = cfg.get_enum("net.variant", "small", {"small", "large"});
    nc.variant = variant == "small" ? Variant::small : Variant::large;
    std::string structure = cfg.get_enum("net.structure", "full",
                                         {"full", "local_only", "global_only", "pointnet"});
    if (structure == "full") nc.structure = Structure::full;
    else if (structure == "local_only") nc.structure = Structure::local_only;
    else if (structure == "global_only") nc.structure = Structure::global_only;
    else nc.structure = Structure::pointnet;
    std::string residual = cfg.get_enum("net.residual", "identity", {"identity", "ann", "none"});
    nc.residual = residual == "identity" ? ResidualStyle::identity
                  : residual == "ann"    ? ResidualStyle::ann
                                         : ResidualStyle::none;
    std::string neuron = cfg.get_enum("net.neuron", "plif", {"plif", "lif", "if"});
    nc.neuron.kind = neuron == "plif" ? NeuronKind::plif
                     : neuron == "lif" ? NeuronKind::lif
                                       : NeuronKind::ifn;
    nc.neuron.v_th = static_cast<float>(cfg.get_double("net.v_th", 1.0));
    nc.neuron.tau_mem = static_cast<float>(cfg.get_double("net.tau_mem", 2.0));
    nc.neuron.tau_syn = static_cast<float>(cfg.get_double("net.tau_syn", 0.0));
    nc.T = cfg.get_int("net.T", 16);
    nc.classes = cfg.get_int("net.classes", 4);
    nc.N = cfg.get_int("group.N", 1024);
    nc.M = cfg.get_int("group.M", 64);
    nc.K = cfg.get_int("group.K", 24);
    nc.branches = cfg.get_enum("group.branches", "double", {"double", "single"}) == "double"
                      ? Branches::double_branch
                      : Branches::single_branch;
    nc.fusion = cfg.get_enum("group.fusion", "add", {"add", "concat"}) == "add" ? Fusion::add
                                                                                : Fusion::concat;
    nc.validate();
    return nc;
}

void NetworkConfig::to_config(Config& cfg) const {
    cfg.set("net.variant", variant == Variant::small ? "small" : "large");
    cfg.set("net.structure", structure == Structure::full          ? "full"
                             : structure == Structure::local_only  ? "local_only"
                             : structure == Structure::global_only ? "global_only"
                                                                   : "pointnet");
    cfg.set("net.residual", residual == ResidualStyle::identity ? "identity"
                            : residual == ResidualStyle::ann    ? "ann"
                                                                : "none");
    cfg.set("net.neuron", neuron.kind == NeuronKind::plif  ? "plif"
                          : neuron.kind == NeuronKind::lif ? "lif"
                                                           : "if");
    cfg.set("net.v_th", std::to_string(neuron.v_th));
    cfg.set("net.tau_mem", std::to_string(neuron.tau_mem));
    cfg.set("net.tau_syn", std::to_string(neuron.tau_syn));
    cfg.set("net.T", std::to_string(T));
    cfg.set("net.classes", std::to_string(classes));
    cfg.set("group.N", std::to_string(N));
    cfg.set("group.M", std::to_string(M));
    cfg.set("group.K", std::to_string(K));
    cfg.set("group.branches", branches == Branches::double_branch ? "double" : "single");
    cfg.set("group.fusion", fusion == Fusion::add ? "add" : "concat");
}

void Param::init_shape(std::vector<int64_t> shape, float fill) {
    value = Tensor(shape, fill);
    grad = Tensor(shape);
    adam_m = Tensor(shape);
    adam_v = Tensor(shape);
}

void Param::zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0f); }

namespace {

void init_layer(ConvBnLif& layer, const std::string& name, int64_t cin, int64_t cout,
                int64_t positions, const NeuronConfig& neuron, Rng& rng) {
    layer.name = name;
    layer.cin = cin;
    layer.cout = cout;
    layer.positions = positions;
    layer.w.init_shape({cout, cin});
    layer.b.init_shape({cout});
    float bound = 1.0f / std::sqrt(static_cast<float>(cin));
    for (auto& v : layer.w.value.data) v = static_cast<float>(rng.uniform(-bound, bound));
    for (auto& v : layer.b.value.data) v = static_cast<float>(rng.uniform(-bound, bound));
    layer.bn_gamma.init_shape({cout}, 1.0f);
    layer.bn_beta.init_shape({cout});
    layer.run_mean = Tensor({cout});
    layer.run_var = Tensor({cout}, 1.0f);
    if (neuron.kind == NeuronKind::plif) {
        layer.plif_w.init_shape({1}, neuron.plif_init_w());
    }
}

}  // namespace

Network::Network(const NetworkConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    const NeuronConfig& nr = cfg_.neuron;
    int64_t ld = cfg_.local_dim();

    if (cfg_.structure == Structure::full || cfg_.structure == Structure::local_only) {
        int64_t pk = cfg_.M * cfg_.K;
        init_layer(ch1_in_, "local.ch1.in", 6, ld, pk, nr, rng);
        init_layer(ch1_sq_, "local.ch1.res.squeeze", ld, ld / 2, pk, nr, rng);
        init_layer(ch1_ex_, "local.ch1.res.expand", ld / 2, ld, pk, nr, rng);
        if (cfg_.branches == Branches::double_branch) {
            init_layer(ch2_in_, "local.ch2.in", 3, ld, cfg_.M, nr, rng);
            init_layer(ch2_sq_, "local.ch2.res.squeeze", ld, ld / 2, cfg_.M, nr, rng);
            init_layer(ch2_ex_, "local.ch2.res.expand", ld / 2, ld, cfg_.M, nr, rng);
        }
    }
    if (cfg_.structure == Structure::full) {
        int64_t fused = cfg_.branches == Branches::double_branch && cfg_.fusion == Fusion::concat
                            ? 2 * ld
                            : ld;
        auto dims = cfg_.global_dims();
        global_.resize(5);
        init_layer(global_[0], "global.l1.in", fused, dims[0], cfg_.M, nr, rng);
        init_layer(global_[1], "global.l1.res", dims[0], dims[0], cfg_.M, nr, rng);
        init_layer(global_[2], "global.l2.in", dims[0], dims[1], cfg_.M, nr, rng);
        init_layer(global_[3], "global.l2.res", dims[1], dims[1], cfg_.M, nr, rng);
        init_layer(global_[4], "global.out", dims[1], dims[2], cfg_.M, nr, rng);
    }
    if (cfg_.structure == Structure::global_only || cfg_.structure == Structure::pointnet) {
        auto dims = cfg_.raw_dims();
        size_t n_mid = dims.size() - 2;
        raw_.resize(1 + 2 * n_mid + 1);
        size_t at = 0;
        init_layer(raw_[at++], "raw.in", 3, dims[0], cfg_.N, nr, rng);
        for (size_t i = 0; i < n_mid; ++i) {
            std::string base = "raw.l" + std::to_string(i + 1);
            init_layer(raw_[at], base + ".in", dims[i], dims[i + 1], cfg_.N, nr, rng);
            ++at;
            init_layer(raw_[at], base + ".res", dims[i + 1], dims[i + 1], cfg_.N, nr, rng);
            ++at;
        }
        init_layer(raw_[at], "raw.out", dims[dims.size() - 2], dims.back(), cfg_.N, nr, rng);
    }
    int64_t feat = cfg_.feature_width();
    init_layer(clf1_, "clf.fc1", feat, cfg_.classifier_hidden(), 1, nr, rng);
    init_layer(clf2_, "clf.fc2", cfg_.classifier_hidden(), cfg_.vote_width(), 1, nr, rng);
}

std::vector<ConvBnLif*> Network::layers() {
    std::vector<ConvBnLif*> out;
    bool grouped = cfg_.structure == Structure::full || cfg_.structure == Structure::local_only;
    if (grouped) {
        out.push_back(&ch1_in_);
        out.push_back(&ch1_sq_);
        out.push_back(&ch1_ex_);
        if (cfg_.branches == Branches::double_branch) {
            out.push_back(&ch2_in_);
            out.push_back(&ch2_sq_);
            out.push_back(&ch2_ex_);
        }
    }
    for (auto& l : global_) out.push_back(&l);
    for (auto& l : raw_) out.push_back(&l);
    out.push_back(&clf1_);
    out.push_back(&clf2_);
    return out;
}

std::vector<const ConvBnLif*> Network::layers() const {
    auto mutable_layers = const_cast<Network*>(this)->layers();
    return {mutable_layers.begin(), mutable_layers.end()};
}

ad::VarId Network::param_leaf(Ctx& ctx, Param& p) {
    ad::VarId id = ctx.tape.leaf(p.value, true);
    ctx.result.param_vars.emplace_back(&p, id);
    return id;
}

ad::VarId Network::conv_bn(Ctx& ctx, ad::VarId x, ConvBnLif& layer) {
    ctx.result.taps.push_back({layer.name, x});
    ad::VarId w = param_leaf(ctx, layer.w);
    ad::VarId b = param_leaf(ctx, layer.b);
    ad::VarId y = ctx.tape.pointwise_conv(x, w, b);
    ad::VarId gamma = param_leaf(ctx, layer.bn_gamma);
    ad::VarId beta = param_leaf(ctx, layer.bn_beta);
    return ctx.tape.batchnorm(y, gamma, beta, &layer.run_mean, &layer.run_var, ctx.training);
}

ad::VarId Network::neuron(Ctx& ctx, ad::VarId x, ConvBnLif& layer) {
    ad::LifScanConfig sc;
    sc.mode = ctx.mode;
    sc.v_th = cfg_.neuron.v_th;
    sc.syn_decay = cfg_.neuron.syn_decay();
    if (cfg_.neuron.kind == NeuronKind::plif) {
        return ctx.tape.lif_scan(x, sc, param_leaf(ctx, layer.plif_w));
    }
    sc.mem_decay = cfg_.neuron.fixed_mem_decay();
    return ctx.tape.lif_scan(x, sc);
}

ad::VarId Network::block(Ctx& ctx, ad::VarId x, ConvBnLif& layer) {
    return neuron(ctx, conv_bn(ctx, x, layer), layer);
}

// Residual unit: one inner conv for ResF (b == nullptr), squeeze/expand for
// ResFB. Wiring depends on the residual style under ablation.
ad::VarId Network::res_block(Ctx& ctx, ad::VarId x, ConvBnLif& a, ConvBnLif* b) {
    switch (cfg_.residual) {
        case ResidualStyle::identity: {
            ad::VarId inner = block(ctx, x, a);
            if (b) inner = block(ctx, inner, *b);
            return ctx.tape.add(inner, x);
        }
        case ResidualStyle::ann: {
            // pre-activation skip: spike function applied to (conv + skip)
            if (!b) {
                return neuron(ctx, ctx.tape.add(conv_bn(ctx, x, a), x), a);
            }
            ad::VarId inner = block(ctx, x, a);
            return neuron(ctx, ctx.tape.add(conv_bn(ctx, inner, *b), x), *b);
        }
        case ResidualStyle::none: {
            ad::VarId inner = block(ctx, x, a);
            if (b) inner = block(ctx, inner, *b);
            return inner;
        }
    }
    throw ConfigError("res_block: unknown residual style");
}

ForwardResult Network::forward(ad::Tape& tape, const EncodedBatch& batch, bool training,
                               ad::SpikeMode mode) {
    ForwardResult result;
    Ctx ctx{tape, training, mode, result};

    ad::VarId feat = -1;
    if (cfg_.structure == Structure::global_only || cfg_.structure == Structure::pointnet) {
        batch.xr.require_shape({cfg_.T, batch.B, cfg_.N, 3}, "forward raw input");
        ad::VarId x = tape.leaf(batch.xr, false);
        x = block(ctx, x, raw_[0]);
        for (size_t i = 1; i + 1 < raw_.size(); i += 2) {
            x = block(ctx, x, raw_[i]);
            x = res_block(ctx, x, raw_[i + 1], nullptr);
        }
        x = block(ctx, x, raw_.back());
        feat = tape.max_over_axis(x, 2);  // pool over the N points
    } else {
        batch.x1.require_shape({cfg_.T, batch.B, cfg_.M, cfg_.K, 6}, "forward channel1");
        ad::VarId x1 = tape.leaf(batch.x1, false);
        ad::VarId a = block(ctx, x1, ch1_in_);
        a = res_block(ctx, a, ch1_sq_, &ch1_ex_);
        a = tape.max_over_axis(a, 3);  // pool over the K group members

        ad::VarId fused = a;
        if (cfg_.branches == Branches::double_branch) {
            batch.x2.require_shape({cfg_.T, batch.B, cfg_.M, 3}, "forward channel2");
            ad::VarId x2 = tape.leaf(batch.x2, false);
            ad::VarId c = block(ctx, x2, ch2_in_);
            c = res_block(ctx, c, ch2_sq_, &ch2_ex_);
            fused = cfg_.fusion == Fusion::add ? tape.add(a, c) : tape.concat_last(a, c);
        }

        if (cfg_.structure == Structure::local_only) {
            feat = tape.max_over_axis(fused, 2);
        } else {
            ad::VarId g = block(ctx, fused, global_[0]);
            g = res_block(ctx, g, global_[1], nullptr);
            g = block(ctx, g, global_[2]);
            g = res_block(ctx, g, global_[3], nullptr);
            g = block(ctx, g, global_[4]);
            feat = tape.max_over_axis(g, 2);  // pool over the M groups
        }
    }

    ad::VarId h = block(ctx, feat, clf1_);
    h = block(ctx, h, clf2_);
    result.scores = tape.mean_blocks(h, 10);
    return result;
}

std::vector<int> predictions_from_scores(const Tensor& scores) {
    if (scores.rank() != 3) throw ShapeError("predictions_from_scores: want [T, B, C]");
    int64_t T = scores.dim(0), B = scores.dim(1), C = scores.dim(2);
    std::vector<int> preds(static_cast<size_t>(B));
    for (int64_t b = 0; b < B; ++b) {
        int best = 0;
        double best_score = -1.0;
        for (int64_t c = 0; c < C; ++c) {
            double mean = 0.0;
            for (int64_t t = 0; t < T; ++t) mean += scores[(t * B + b) * C + c];
            if (mean > best_score) {
                best_score = mean;
                best = static_cast<int>(c);
            }
        }
        preds[static_cast<size_t>(b)] = best;
    }
    return preds;
}

double nonzero_fraction(const Tensor& t) {
    if (t.numel() == 0) return 0.0;
    int64_t nz = 0;
    for (float v : t.data) {
        if (v != 0.0f) ++nz;
    }
    return static_cast<double>(nz) / static_cast<double>(t.numel());
}

namespace {

// Fill bits for one sample/channel; same cell addressing as poisson_encode.
void encode_channel(Tensor& dst, int64_t t_dim, int64_t b, int64_t batch_count,
                    std::span<const double> values, uint64_t seed, bool clamp_negative) {
    int64_t d_count = static_cast<int64_t>(values.size());
    for (int64_t d = 0; d < d_count; ++d) {
        double v = values[static_cast<size_t>(d)];
        if (v < 0.0) {
            if (!clamp_negative) {
                throw EncodingError(
                    "encode_batch: negative input value (apply the absolute-value transform "
                    "or enable clamping for raw variants)");
            }
            v = 0.0;
        }
        for (int64_t t = 0; t < t_dim; ++t) {
            dst[(t * batch_count + b) * d_count + d] = poisson_bit(v, t, d, seed) ? 1.0f : 0.0f;
        }
    }
}

}  // namespace

EncodedBatch encode_batch(const NetworkConfig& cfg,
                          const std::vector<const GroupedInput*>& samples,
                          const std::vector<int>& labels,
                          const std::vector<uint64_t>& seeds, bool clamp_negative) {
    int64_t B = static_cast<int64_t>(samples.size());
    if (B == 0) throw DegenerateInputError("encode_batch: empty batch");
    if (labels.size() != samples.size() || seeds.size() != samples.size()) {
        throw ShapeError("encode_batch: samples/labels/seeds size mismatch");
    }
    EncodedBatch batch;
    batch.B = B;
    batch.labels = labels;
    batch.x1 = Tensor({cfg.T, B, cfg.M, cfg.K, 6});
    batch.x2 = Tensor({cfg.T, B, cfg.M, 3});
    for (int64_t b = 0; b < B; ++b) {
        const GroupedInput& g = *samples[static_cast<size_t>(b)];
        if (g.M != cfg.M || g.K != cfg.K) {
            throw ShapeError("encode_batch: grouped sample does not match net config (M, K)");
        }
        encode_channel(batch.x1, cfg.T, b, B, g.channel1, mix64(seeds[static_cast<size_t>(b)] + 1),
                       clamp_negative);
        encode_channel(batch.x2, cfg.T, b, B, g.channel2, mix64(seeds[static_cast<size_t>(b)] + 2),
                       clamp_negative);
    }
    return batch;
}

EncodedBatch encode_batch_raw(const NetworkConfig& cfg,
                              const std::vector<const PointSet*>& samples,
                              const std::vector<int>& labels,
                              const std::vector<uint64_t>& seeds) {
    int64_t B = static_cast<int64_t>(samples.size());
    if (B == 0) throw DegenerateInputError("encode_batch_raw: empty batch");
    if (labels.size() != samples.size() || seeds.size() != samples.size()) {
        throw ShapeError("encode_batch_raw: samples/labels/seeds size mismatch");
    }
    EncodedBatch batch;
    batch.B = B;
    batch.labels = labels;
    batch.xr = Tensor({cfg.T, B, cfg.N, 3});
    for (int64_t b = 0; b < B; ++b) {
        const PointSet& p = *samples[static_cast<size_t>(b)];
        if (p.n != cfg.N) throw ShapeError("encode_batch_raw: point count does not match net N");
        encode_channel(batch.xr, cfg.T, b, B, p.xyz, mix64(seeds[static_cast<size_t>(b)] + 3),
                       false);
    }
    return batch;
}

namespace {

SamplePrediction predict_common(Network& net, const EncodedBatch& batch) {
    ad::Tape tape;
    ForwardResult fr = net.forward(tape, batch, /*training=*/false, ad::SpikeMode::spike);
    const Tensor& scores = tape.value(fr.scores);
    int64_t T = scores.dim(0), C = scores.dim(2);

    SamplePrediction out;
    out.scores = Tensor({T, C});
    for (int64_t t = 0; t < T; ++t) {
        for (int64_t c = 0; c < C; ++c) out.scores[t * C + c] = scores[(t * 1 + 0) * C + c];
    }
    out.prediction = predictions_from_scores(scores)[0];
    double mean = 0.0;
    for (int64_t t = 0; t < T; ++t) mean += out.scores[t * C + out.prediction];
    out.mean_score = mean / static_cast<double>(T);
    for (const LayerTap& tap : fr.taps) {
        out.fire_rates.emplace_back(tap.name, nonzero_fraction(tape.value(tap.input)));
    }
    return out;
}

}  // namespace

SamplePrediction Network::predict(const GroupedInput& grouped, uint64_t seed,
                                  bool clamp_negative) {
    EncodedBatch batch = encode_batch(cfg_, {&grouped}, {0}, {seed}, clamp_negative);
    return predict_common(*this, batch);
}

SamplePrediction Network::predict_raw(const PointSet& points, uint64_t seed) {
    EncodedBatch batch = encode_batch_raw(cfg_, {&points}, {0}, {seed});
    return predict_common(*this, batch);
}

std::vector<std::pair<std::string, Param*>> Network::named_params() {
    std::vector<std::pair<std::string, Param*>> out;
    for (ConvBnLif* l : layers()) {
        out.emplace_back(l->name + ".weight", &l->w);
        out.emplace_back(l->name + ".bias", &l->b);
        out.emplace_back(l->name + ".bn_gamma", &l->bn_gamma);
        out.emplace_back(l->name + ".bn_beta", &l->bn_beta);
        if (cfg_.neuron.kind == NeuronKind::plif) {
            out.emplace_back(l->name + ".plif_w", &l->plif_w);
        }
    }
    return out;
}

std::vector<std::pair<std::string, const Param*>> Network::named_params() const {
    auto mut = const_cast<Network*>(this)->named_params();
    return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, Tensor*>> Network::named_state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (ConvBnLif* l : layers()) {
        out.emplace_back(l->name + ".bn_running_mean", &l->run_mean);
        out.emplace_back(l->name + ".bn_running_var", &l->run_var);
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> Network::named_state() const {
    auto mut = const_cast<Network*>(this)->named_state();
    return {mut.begin(), mut.end()};
}

std::vector<LayerShape> Network::layer_shapes() const {
    std::vector<LayerShape> out;
    for (const ConvBnLif* l : layers()) {
        out.push_back({l->name, l->positions, l->cin, l->cout});
    }
    return out;
}

int64_t Network::param_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : named_params()) n += p->value.numel();
    return n;
}

void Network::zero_grads() {
    for (auto& [name, p] : named_params()) p->zero_grad();
}

}  // namespace spikepoint
