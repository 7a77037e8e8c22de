#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spikepoint/tensor.hpp"

namespace spikepoint {
namespace ad {

using VarId = int32_t;

// Spike nonlinearity behavior inside lif_scan.
//   spike  - Heaviside forward, arctan surrogate backward (training mode)
//   smooth - sigma(x) forward, exact sigma'(x) backward (finite-difference
//            checkable end to end)
//   pinned - replay recorded spikes; output treated as constant in backward
enum class SpikeMode { spike, smooth, pinned };

// sigma(x) = arctan(pi x) / pi + 1/2 and its derivative 1 / (1 + (pi x)^2).
double surrogate_sigma(double x);
double surrogate_grad(double x);
// 1 if u_minus_vth >= 0 else 0.
float heaviside_spike(float u_minus_vth);

struct LifScanConfig {
    SpikeMode mode = SpikeMode::spike;
    float v_th = 1.0f;
    float mem_decay = 0.5f;   // used when no learnable decay parameter is given
    float syn_decay = 0.0f;   // 0 disables the synaptic filter
    const Tensor* pinned_spikes = nullptr;  // required for SpikeMode::pinned
};

// Append-only reverse-mode tape. Nodes are created in topological order by
// the op builders; backward() walks them in reverse. One tape per forward
// pass; parameters live outside and are injected as leaves.
class Tape {
public:
    VarId leaf(Tensor value, bool requires_grad);

    const Tensor& value(VarId id) const;
    Tensor& grad(VarId id);  // allocates zeros on first access
    bool has_grad(VarId id) const;

    // y[..., co] = sum_ci x[..., ci] * w[co, ci] + b[co]; the shared
    // per-point map used for both 1x1 convolution and fully connected layers.
    VarId pointwise_conv(VarId x, VarId w, VarId b);

    // Normalizes over every axis but the last (channel) axis. In training
    // mode batch statistics are used and running stats updated in place;
    // in inference mode running stats are used.
    VarId batchnorm(VarId x, VarId gamma, VarId beta, Tensor* running_mean,
                    Tensor* running_var, bool training, float momentum = 0.1f,
                    float eps = 1e-5f);

    // Membrane scan over axis 0 (time): charge, fire, subtract-reset.
    // decay_w >= 0 selects a learnable decay sigmoid(decay_w), one scalar.
    VarId lif_scan(VarId x, const LifScanConfig& cfg, VarId decay_w = -1);

    VarId add(VarId a, VarId b);
    VarId concat_last(VarId a, VarId b);
    VarId max_over_axis(VarId x, int axis);
    VarId mean_blocks(VarId x, int64_t block);  // voting: block-average last axis

    // scores: T x B x C; mean over T and C of squared one-hot error, then
    // mean over the batch. Returns a scalar node.
    VarId mse_loss(VarId scores, const std::vector<int>& labels);

    void backward(VarId loss);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_alloc = false;
        std::function<void(Tape&)> back;  // empty for leaves
    };

    VarId push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Node& node(VarId id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(VarId id) const { return nodes_[static_cast<size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace ad
}  // namespace spikepoint
