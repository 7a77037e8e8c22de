#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spikepoint/autodiff.hpp"
#include "spikepoint/config.hpp"
#include "spikepoint/pointcloud.hpp"
#include "spikepoint/tensor.hpp"

namespace spikepoint {

enum class NeuronKind { lif, ifn, plif };

struct NeuronConfig {
    NeuronKind kind = NeuronKind::plif;
    float v_th = 1.0f;
    float tau_mem = 2.0f;  // PLIF: learnable, this is the init
    float tau_syn = 0.0f;  // 0 disables the synaptic filter
    float delta_t = 1.0f;

    float fixed_mem_decay() const;  // lif/if decay factor
    float syn_decay() const;
    float plif_init_w() const;  // sigmoid(w) = 1 - 1/tau_mem
    void validate() const;
};

// One membrane update for a vector of neurons: charge, fire, subtract-reset.
// Returns the spikes; state is advanced in place.
struct NeuronState {
    std::vector<float> u;      // membrane potential
    std::vector<float> i_syn;  // filtered input (used when syn_decay > 0)
};
std::vector<float> neuron_step(NeuronState& state, std::span<const float> input,
                               float mem_decay, float syn_decay, float v_th);

enum class Variant { small, large };
enum class Structure { full, local_only, global_only, pointnet };
enum class ResidualStyle { identity, ann, none };

struct NetworkConfig {
    Variant variant = Variant::small;
    Structure structure = Structure::full;
    ResidualStyle residual = ResidualStyle::identity;
    NeuronConfig neuron;
    int64_t T = 16;
    int64_t N = 1024;
    int64_t M = 64;
    int64_t K = 24;
    int64_t classes = 4;
    Branches branches = Branches::double_branch;
    Fusion fusion = Fusion::add;

    int64_t local_dim() const { return variant == Variant::small ? 32 : 64; }
    std::vector<int64_t> global_dims() const {
        return variant == Variant::small ? std::vector<int64_t>{64, 128, 256}
                                         : std::vector<int64_t>{128, 256, 512};
    }
    int64_t classifier_hidden() const { return variant == Variant::small ? 256 : 512; }
    int64_t vote_width() const { return 10 * classes; }
    // Raw-point stack dims for the no-grouping structures.
    std::vector<int64_t> raw_dims() const {
        return structure == Structure::pointnet
                   ? std::vector<int64_t>{64, 128, 256, 512, 1024}
                   : std::vector<int64_t>{32, 64, 128, 256};
    }
    // Width of the feature vector entering the classifier.
    int64_t feature_width() const;

    void validate() const;
    static NetworkConfig from_config(const Config& cfg);
    void to_config(Config& cfg) const;
};

struct Param {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;

    void init_shape(std::vector<int64_t> shape, float fill = 0.0f);
    void zero_grad();
};

// Conv (or FC) + batchnorm + spiking neuron bundle; the unit every layer of
// the network is made of.
struct ConvBnLif {
    std::string name;
    int64_t cin = 0;
    int64_t cout = 0;
    int64_t positions = 1;  // spatial positions the kernel slides over
    Param w;                // [cout, cin]
    Param b;                // [cout]
    Param bn_gamma;         // [cout]
    Param bn_beta;          // [cout]
    Tensor run_mean;        // [cout]
    Tensor run_var;         // [cout]
    Param plif_w;           // scalar decay parameter (PLIF only)
};

// Shape record used for operation counting; one entry per conv/fc layer.
struct LayerShape {
    std::string name;
    int64_t positions = 1;
    int64_t cin = 0;
    int64_t cout = 0;
    int64_t macs() const { return positions * cin * cout; }
};

// Encoded spike input for a batch.
struct EncodedBatch {
    Tensor x1;  // [T, B, M, K, 6]
    Tensor x2;  // [T, B, M, 3]
    Tensor xr;  // [T, B, N, 3] for raw-point structures
    std::vector<int> labels;
    int64_t B = 0;
};

struct LayerTap {
    std::string name;
    ad::VarId input = -1;
};

struct ForwardResult {
    ad::VarId scores = -1;  // [T, B, classes]
    std::vector<LayerTap> taps;
    // Parameter leaves created by this pass; gradients are pulled back from
    // these after tape.backward().
    std::vector<std::pair<Param*, ad::VarId>> param_vars;
};

struct SamplePrediction {
    Tensor scores;  // [T, classes]
    int prediction = -1;
    double mean_score = 0.0;  // mean over T of the winning class score
    std::vector<std::pair<std::string, double>> fire_rates;
};

class Network {
public:
    Network(const NetworkConfig& cfg, uint64_t init_seed);

    const NetworkConfig& config() const { return cfg_; }

    ForwardResult forward(ad::Tape& tape, const EncodedBatch& batch, bool training,
                          ad::SpikeMode mode = ad::SpikeMode::spike);

    // Single-sample inference (batch of one, inference-mode batchnorm).
    SamplePrediction predict(const GroupedInput& grouped, uint64_t seed,
                             bool clamp_negative = false);
    SamplePrediction predict_raw(const PointSet& points, uint64_t seed);

    std::vector<std::pair<std::string, Param*>> named_params();
    std::vector<std::pair<std::string, const Param*>> named_params() const;
    // Batchnorm running statistics, checkpointed alongside the parameters.
    std::vector<std::pair<std::string, Tensor*>> named_state();
    std::vector<std::pair<std::string, const Tensor*>> named_state() const;

    std::vector<LayerShape> layer_shapes() const;
    int64_t param_count() const;
    void zero_grads();

private:
    struct Ctx {
        ad::Tape& tape;
        bool training;
        ad::SpikeMode mode;
        ForwardResult& result;
    };
    ad::VarId param_leaf(Ctx& ctx, Param& p);
    ad::VarId conv_bn(Ctx& ctx, ad::VarId x, ConvBnLif& layer);  // conv + bn, no neuron
    ad::VarId neuron(Ctx& ctx, ad::VarId x, ConvBnLif& layer);
    ad::VarId block(Ctx& ctx, ad::VarId x, ConvBnLif& layer);  // conv + bn + neuron
    ad::VarId res_block(Ctx& ctx, ad::VarId x, ConvBnLif& a, ConvBnLif* b);
    std::vector<ConvBnLif*> layers();
    std::vector<const ConvBnLif*> layers() const;

    NetworkConfig cfg_;
    // full / local_only
    ConvBnLif ch1_in_, ch1_sq_, ch1_ex_;
    ConvBnLif ch2_in_, ch2_sq_, ch2_ex_;
    // global extractor
    std::vector<ConvBnLif> global_;  // in/res pairs then final
    // raw-point stack
    std::vector<ConvBnLif> raw_;
    // classifier
    ConvBnLif clf1_, clf2_;
};

// Encode grouped samples into a [T, B, ...] spike batch. clamp_negative
// lets the raw grouping variant through by clipping below zero.
EncodedBatch encode_batch(const NetworkConfig& cfg,
                          const std::vector<const GroupedInput*>& samples,
                          const std::vector<int>& labels,
                          const std::vector<uint64_t>& seeds, bool clamp_negative);
EncodedBatch encode_batch_raw(const NetworkConfig& cfg,
                              const std::vector<const PointSet*>& samples,
                              const std::vector<int>& labels,
                              const std::vector<uint64_t>& seeds);

// Mean score per class over T and the argmax prediction per sample.
std::vector<int> predictions_from_scores(const Tensor& scores);

// Fraction of nonzero entries; the fire-rate measure used for energy.
double nonzero_fraction(const Tensor& t);

}  // namespace spikepoint
