#include "spikepoint/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "spikepoint/errors.hpp"

namespace spikepoint {
namespace ad {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

double surrogate_sigma(double x) { return std::atan(M_PI * x) / M_PI + 0.5; }

double surrogate_grad(double x) { return 1.0 / (1.0 + (M_PI * x) * (M_PI * x)); }

float heaviside_spike(float u_minus_vth) { return u_minus_vth >= 0.0f ? 1.0f : 0.0f; }

VarId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

const Tensor& Tape::value(VarId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
        throw UsageError("tape: invalid node id");
    }
    return node(id).value;
}

Tensor& Tape::grad(VarId id) {
    Node& n = node(id);
    if (!n.grad_alloc) {
        n.grad = Tensor(n.value.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

bool Tape::has_grad(VarId id) const { return node(id).grad_alloc; }

VarId Tape::pointwise_conv(VarId x, VarId w, VarId b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (wv.rank() != 2) throw ShapeError("pointwise_conv: weight must be [Cout, Cin]");
    int64_t cout = wv.dim(0), cin = wv.dim(1);
    if (xv.rank() < 1 || xv.dim(xv.rank() - 1) != cin) {
        throw ShapeError("pointwise_conv: input channel dim " + xv.shape_str() +
                         " does not match weight " + wv.shape_str());
    }
    if (bv.numel() != cout) throw ShapeError("pointwise_conv: bias size mismatch");

    int64_t rows = xv.numel() / cin;
    std::vector<int64_t> out_shape = xv.shape;
    out_shape.back() = cout;
    Tensor y(out_shape);
    {
        MapC X(xv.data.data(), rows, cin);
        MapC W(wv.data.data(), cout, cin);
        MapM Y(y.data.data(), rows, cout);
        Y.noalias() = X * W.transpose();
        Y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bv.data.data(), cout);
    }

    bool rg = node(x).requires_grad || node(w).requires_grad || node(b).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [x, w, b, out, rows, cin, cout](Tape& t) {
        MapC GY(t.grad(out).data.data(), rows, cout);
        if (t.node(x).requires_grad) {
            MapC W(t.value(w).data.data(), cout, cin);
            MapM GX(t.grad(x).data.data(), rows, cin);
            GX.noalias() += GY * W;
        }
        if (t.node(w).requires_grad) {
            MapC X(t.value(x).data.data(), rows, cin);
            MapM GW(t.grad(w).data.data(), cout, cin);
            GW.noalias() += GY.transpose() * X;
        }
        if (t.node(b).requires_grad) {
            Eigen::Map<Eigen::RowVectorXf> GB(t.grad(b).data.data(), cout);
            GB += GY.colwise().sum();
        }
    };
    return out;
}

VarId Tape::batchnorm(VarId x, VarId gamma, VarId beta, Tensor* running_mean,
                      Tensor* running_var, bool training, float momentum, float eps) {
    const Tensor& xv = value(x);
    int64_t C = xv.dim(xv.rank() - 1);
    int64_t R = xv.numel() / C;
    if (value(gamma).numel() != C || value(beta).numel() != C) {
        throw ShapeError("batchnorm: gamma/beta size mismatch");
    }
    if (running_mean->numel() != C || running_var->numel() != C) {
        throw ShapeError("batchnorm: running stats size mismatch");
    }
    if (training && R < 2) {
        throw DegenerateInputError("batchnorm: training mode needs >= 2 elements per channel");
    }

    std::vector<float> mean(static_cast<size_t>(C)), inv_std(static_cast<size_t>(C));
    if (training) {
        for (int64_t c = 0; c < C; ++c) mean[static_cast<size_t>(c)] = 0.0f;
        for (int64_t r = 0; r < R; ++r) {
            const float* row = xv.data.data() + r * C;
            for (int64_t c = 0; c < C; ++c) mean[static_cast<size_t>(c)] += row[c];
        }
        for (int64_t c = 0; c < C; ++c) mean[static_cast<size_t>(c)] /= static_cast<float>(R);
        std::vector<float> var(static_cast<size_t>(C), 0.0f);
        for (int64_t r = 0; r < R; ++r) {
            const float* row = xv.data.data() + r * C;
            for (int64_t c = 0; c < C; ++c) {
                float d = row[c] - mean[static_cast<size_t>(c)];
                var[static_cast<size_t>(c)] += d * d;
            }
        }
        for (int64_t c = 0; c < C; ++c) {
            float v = var[static_cast<size_t>(c)] / static_cast<float>(R);
            inv_std[static_cast<size_t>(c)] = 1.0f / std::sqrt(v + eps);
            // running stats use the unbiased variance estimate
            float unbiased = R > 1 ? v * static_cast<float>(R) / static_cast<float>(R - 1) : v;
            (*running_mean)[c] =
                (1.0f - momentum) * (*running_mean)[c] + momentum * mean[static_cast<size_t>(c)];
            (*running_var)[c] = (1.0f - momentum) * (*running_var)[c] + momentum * unbiased;
        }
    } else {
        for (int64_t c = 0; c < C; ++c) {
            mean[static_cast<size_t>(c)] = (*running_mean)[c];
            inv_std[static_cast<size_t>(c)] = 1.0f / std::sqrt((*running_var)[c] + eps);
        }
    }

    Tensor y(xv.shape);
    const float* g = value(gamma).data.data();
    const float* be = value(beta).data.data();
    for (int64_t r = 0; r < R; ++r) {
        const float* row = xv.data.data() + r * C;
        float* yrow = y.data.data() + r * C;
        for (int64_t c = 0; c < C; ++c) {
            size_t cc = static_cast<size_t>(c);
            yrow[c] = g[c] * (row[c] - mean[cc]) * inv_std[cc] + be[c];
        }
    }

    bool rg = node(x).requires_grad || node(gamma).requires_grad || node(beta).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [x, gamma, beta, out, R, C, training, mean = std::move(mean),
                      inv_std = std::move(inv_std)](Tape& t) {
        const Tensor& xv = t.value(x);
        const Tensor& gy = t.grad(out);
        const float* g = t.value(gamma).data.data();

        std::vector<double> sum_gy(static_cast<size_t>(C), 0.0);
        std::vector<double> sum_gy_xhat(static_cast<size_t>(C), 0.0);
        bool need_input = t.node(x).requires_grad && training;
        if (need_input || t.node(gamma).requires_grad || t.node(beta).requires_grad) {
            for (int64_t r = 0; r < R; ++r) {
                const float* xrow = xv.data.data() + r * C;
                const float* grow = gy.data.data() + r * C;
                for (int64_t c = 0; c < C; ++c) {
                    size_t cc = static_cast<size_t>(c);
                    double xhat = (xrow[c] - mean[cc]) * inv_std[cc];
                    sum_gy[cc] += grow[c];
                    sum_gy_xhat[cc] += grow[c] * xhat;
                }
            }
        }
        if (t.node(gamma).requires_grad) {
            Tensor& gg = t.grad(gamma);
            for (int64_t c = 0; c < C; ++c) gg[c] += static_cast<float>(sum_gy_xhat[static_cast<size_t>(c)]);
        }
        if (t.node(beta).requires_grad) {
            Tensor& gb = t.grad(beta);
            for (int64_t c = 0; c < C; ++c) gb[c] += static_cast<float>(sum_gy[static_cast<size_t>(c)]);
        }
        if (t.node(x).requires_grad) {
            Tensor& gx = t.grad(x);
            if (training) {
                double inv_r = 1.0 / static_cast<double>(R);
                for (int64_t r = 0; r < R; ++r) {
                    const float* xrow = xv.data.data() + r * C;
                    const float* grow = gy.data.data() + r * C;
                    float* gxrow = gx.data.data() + r * C;
                    for (int64_t c = 0; c < C; ++c) {
                        size_t cc = static_cast<size_t>(c);
                        double xhat = (xrow[c] - mean[cc]) * inv_std[cc];
                        double v = grow[c] - inv_r * sum_gy[cc] - xhat * inv_r * sum_gy_xhat[cc];
                        gxrow[c] += static_cast<float>(g[c] * inv_std[cc] * v);
                    }
                }
            } else {
                for (int64_t r = 0; r < R; ++r) {
                    const float* grow = gy.data.data() + r * C;
                    float* gxrow = gx.data.data() + r * C;
                    for (int64_t c = 0; c < C; ++c) {
                        gxrow[c] += grow[c] * g[c] * inv_std[static_cast<size_t>(c)];
                    }
                }
            }
        }
    };
    return out;
}

VarId Tape::lif_scan(VarId x, const LifScanConfig& cfg, VarId decay_w) {
    const Tensor& xv = value(x);
    if (xv.rank() < 1) throw ShapeError("lif_scan: input needs a time axis");
    int64_t T = xv.dim(0);
    int64_t D = xv.numel() / T;

    float mem_decay = cfg.mem_decay;
    if (decay_w >= 0) {
        const Tensor& wv = value(decay_w);
        if (wv.numel() != 1) throw ShapeError("lif_scan: decay parameter must be a scalar");
        mem_decay = 1.0f / (1.0f + std::exp(-wv[0]));
    }
    const float v_th = cfg.v_th;
    const float syn_decay = cfg.syn_decay;
    const bool has_syn = syn_decay != 0.0f;

    if (cfg.mode == SpikeMode::pinned) {
        if (cfg.pinned_spikes == nullptr) {
            throw UsageError("lif_scan: pinned mode needs recorded spikes");
        }
        cfg.pinned_spikes->require_shape(xv.shape, "lif_scan pinned spikes");
        // Replayed spikes are constants: nothing differentiable flows through.
        return push(*cfg.pinned_spikes, false, nullptr);
    }

    Tensor h(xv.shape);    // membrane after charge, before reset
    Tensor s(xv.shape);    // emitted spikes (or smooth activations)
    Tensor i_state;        // filtered input, saved only when the filter is on
    if (has_syn) i_state = Tensor(xv.shape);

    const bool smooth = cfg.mode == SpikeMode::smooth;
    {
        std::vector<float> v(static_cast<size_t>(D), 0.0f);
        std::vector<float> i_prev(static_cast<size_t>(D), 0.0f);
        double acc = 0.0;
        for (int64_t t = 0; t < T; ++t) {
            const float* xt = xv.data.data() + t * D;
            float* ht = h.data.data() + t * D;
            float* st = s.data.data() + t * D;
            float* it = has_syn ? i_state.data.data() + t * D : nullptr;
            for (int64_t d = 0; d < D; ++d) {
                float cur = xt[d];
                if (has_syn) {
                    cur = syn_decay * i_prev[static_cast<size_t>(d)] + xt[d];
                    i_prev[static_cast<size_t>(d)] = cur;
                    it[d] = cur;
                }
                float hv = mem_decay * v[static_cast<size_t>(d)] + cur;
                float sv = smooth ? static_cast<float>(surrogate_sigma(hv - v_th))
                                  : heaviside_spike(hv - v_th);
                ht[d] = hv;
                st[d] = sv;
                v[static_cast<size_t>(d)] = hv - v_th * sv;
                acc += hv;
            }
        }
        if (!std::isfinite(acc)) throw NumericError("lif_scan: non-finite membrane state");
    }

    bool rg = node(x).requires_grad || (decay_w >= 0 && node(decay_w).requires_grad);
    VarId out = push(std::move(s), rg, nullptr);
    node(out).back = [x, out, decay_w, T, D, v_th, mem_decay, syn_decay, has_syn, smooth,
                      h = std::move(h)](Tape& t) {
        const Tensor& gy = t.grad(out);
        const Tensor& sv = t.value(out);
        bool need_x = t.node(x).requires_grad;
        bool need_decay = decay_w >= 0 && t.node(decay_w).requires_grad;
        if (!need_x && !need_decay) return;

        Tensor* gx = need_x ? &t.grad(x) : nullptr;
        std::vector<float> d_v(static_cast<size_t>(D), 0.0f);
        std::vector<float> d_i(static_cast<size_t>(D), 0.0f);
        double d_decay = 0.0;
        for (int64_t ti = T - 1; ti >= 0; --ti) {
            const float* ht = h.data.data() + ti * D;
            const float* gyt = gy.data.data() + ti * D;
            const float* h_prev = ti > 0 ? h.data.data() + (ti - 1) * D : nullptr;
            const float* s_prev = ti > 0 ? sv.data.data() + (ti - 1) * D : nullptr;
            float* gxt = need_x ? gx->data.data() + ti * D : nullptr;
            for (int64_t d = 0; d < D; ++d) {
                size_t dd = static_cast<size_t>(d);
                float g = static_cast<float>(surrogate_grad(ht[d] - v_th));
                // dL/dH through the spike and through the reset membrane
                float dh = gyt[d] * g + d_v[dd] * (1.0f - v_th * g);
                if (need_decay) {
                    float v_prev = ti > 0 ? h_prev[d] - v_th * s_prev[d] : 0.0f;
                    d_decay += static_cast<double>(dh) * v_prev;
                }
                d_v[dd] = mem_decay * dh;
                float di = has_syn ? dh + syn_decay * d_i[dd] : dh;
                if (has_syn) d_i[dd] = di;
                if (need_x) gxt[d] += di;
            }
        }
        if (need_decay) {
            // chain through decay = sigmoid(w)
            float sig = mem_decay;
            t.grad(decay_w)[0] += static_cast<float>(d_decay) * sig * (1.0f - sig);
        }
    };
    return out;
}

VarId Tape::add(VarId a, VarId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor y(av.shape);
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = av[i] + bv[i];
    bool rg = node(a).requires_grad || node(b).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [a, b, out](Tape& t) {
        const Tensor& gy = t.grad(out);
        if (t.node(a).requires_grad) {
            Tensor& ga = t.grad(a);
            for (int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i];
        }
        if (t.node(b).requires_grad) {
            Tensor& gb = t.grad(b);
            for (int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i];
        }
    };
    return out;
}

VarId Tape::concat_last(VarId a, VarId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != bv.rank()) throw ShapeError("concat_last: rank mismatch");
    for (int i = 0; i + 1 < av.rank(); ++i) {
        if (av.dim(i) != bv.dim(i)) throw ShapeError("concat_last: leading dims differ");
    }
    int64_t ca = av.dim(av.rank() - 1), cb = bv.dim(bv.rank() - 1);
    int64_t rows = av.numel() / ca;
    std::vector<int64_t> shape = av.shape;
    shape.back() = ca + cb;
    Tensor y(shape);
    for (int64_t r = 0; r < rows; ++r) {
        float* dst = y.data.data() + r * (ca + cb);
        std::copy_n(av.data.data() + r * ca, ca, dst);
        std::copy_n(bv.data.data() + r * cb, cb, dst + ca);
    }
    bool rg = node(a).requires_grad || node(b).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [a, b, out, rows, ca, cb](Tape& t) {
        const Tensor& gy = t.grad(out);
        if (t.node(a).requires_grad) {
            Tensor& ga = t.grad(a);
            for (int64_t r = 0; r < rows; ++r) {
                const float* src = gy.data.data() + r * (ca + cb);
                float* dst = ga.data.data() + r * ca;
                for (int64_t c = 0; c < ca; ++c) dst[c] += src[c];
            }
        }
        if (t.node(b).requires_grad) {
            Tensor& gb = t.grad(b);
            for (int64_t r = 0; r < rows; ++r) {
                const float* src = gy.data.data() + r * (ca + cb) + ca;
                float* dst = gb.data.data() + r * cb;
                for (int64_t c = 0; c < cb; ++c) dst[c] += src[c];
            }
        }
    };
    return out;
}

VarId Tape::max_over_axis(VarId x, int axis) {
    const Tensor& xv = value(x);
    if (axis < 0 || axis >= xv.rank()) throw ShapeError("max_over_axis: bad axis");
    int64_t outer = xv.count_dims(0, axis);
    int64_t a = xv.dim(axis);
    int64_t inner = xv.count_dims(axis + 1, xv.rank());
    if (a < 1) throw ShapeError("max_over_axis: empty axis");

    std::vector<int64_t> shape;
    for (int i = 0; i < xv.rank(); ++i) {
        if (i != axis) shape.push_back(xv.dim(i));
    }
    if (shape.empty()) shape.push_back(1);
    Tensor y(shape);
    std::vector<int32_t> argmax(static_cast<size_t>(outer * inner));
    for (int64_t o = 0; o < outer; ++o) {
        const float* base = xv.data.data() + o * a * inner;
        for (int64_t i = 0; i < inner; ++i) {
            float best = base[i];
            int32_t best_k = 0;
            for (int64_t k = 1; k < a; ++k) {
                float v = base[k * inner + i];
                if (v > best) {  // first max wins ties
                    best = v;
                    best_k = static_cast<int32_t>(k);
                }
            }
            y[o * inner + i] = best;
            argmax[static_cast<size_t>(o * inner + i)] = best_k;
        }
    }
    bool rg = node(x).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [x, out, outer, a, inner, argmax = std::move(argmax)](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& gy = t.grad(out);
        Tensor& gx = t.grad(x);
        for (int64_t o = 0; o < outer; ++o) {
            for (int64_t i = 0; i < inner; ++i) {
                int64_t k = argmax[static_cast<size_t>(o * inner + i)];
                gx[(o * a + k) * inner + i] += gy[o * inner + i];
            }
        }
    };
    return out;
}

VarId Tape::mean_blocks(VarId x, int64_t block) {
    const Tensor& xv = value(x);
    int64_t c = xv.dim(xv.rank() - 1);
    if (block < 1 || c % block != 0) {
        throw ShapeError("mean_blocks: last dim " + std::to_string(c) +
                         " not divisible by block " + std::to_string(block));
    }
    int64_t groups = c / block;
    int64_t rows = xv.numel() / c;
    std::vector<int64_t> shape = xv.shape;
    shape.back() = groups;
    Tensor y(shape);
    float inv = 1.0f / static_cast<float>(block);
    for (int64_t r = 0; r < rows; ++r) {
        const float* src = xv.data.data() + r * c;
        float* dst = y.data.data() + r * groups;
        for (int64_t g = 0; g < groups; ++g) {
            float sum = 0.0f;
            for (int64_t j = 0; j < block; ++j) sum += src[g * block + j];
            dst[g] = sum * inv;
        }
    }
    bool rg = node(x).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [x, out, rows, c, groups, block, inv](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& gy = t.grad(out);
        Tensor& gx = t.grad(x);
        for (int64_t r = 0; r < rows; ++r) {
            const float* src = gy.data.data() + r * groups;
            float* dst = gx.data.data() + r * c;
            for (int64_t g = 0; g < groups; ++g) {
                for (int64_t j = 0; j < block; ++j) dst[g * block + j] += src[g] * inv;
            }
        }
    };
    return out;
}

VarId Tape::mse_loss(VarId scores, const std::vector<int>& labels) {
    const Tensor& sv = value(scores);
    if (sv.rank() != 3) throw ShapeError("mse_loss: scores must be [T, B, C]");
    int64_t T = sv.dim(0), B = sv.dim(1), C = sv.dim(2);
    if (static_cast<int64_t>(labels.size()) != B) {
        throw ShapeError("mse_loss: label count does not match batch");
    }
    for (int lab : labels) {
        if (lab < 0 || lab >= C) throw ConfigError("mse_loss: label out of range");
    }
    double acc = 0.0;
    for (int64_t t = 0; t < T; ++t) {
        for (int64_t b = 0; b < B; ++b) {
            const float* row = sv.data.data() + (t * B + b) * C;
            int lab = labels[static_cast<size_t>(b)];
            for (int64_t c = 0; c < C; ++c) {
                double d = row[c] - (c == lab ? 1.0 : 0.0);
                acc += d * d;
            }
        }
    }
    double denom = static_cast<double>(T * B * C);
    Tensor y = Tensor::scalar(static_cast<float>(acc / denom));
    bool rg = node(scores).requires_grad;
    VarId out = push(std::move(y), rg, nullptr);
    node(out).back = [scores, out, T, B, C, labels](Tape& t) {
        if (!t.node(scores).requires_grad) return;
        float gl = t.grad(out)[0];
        const Tensor& sv = t.value(scores);
        Tensor& gs = t.grad(scores);
        float scale = gl * 2.0f / static_cast<float>(T * B * C);
        for (int64_t ti = 0; ti < T; ++ti) {
            for (int64_t b = 0; b < B; ++b) {
                const float* row = sv.data.data() + (ti * B + b) * C;
                float* grow = gs.data.data() + (ti * B + b) * C;
                int lab = labels[static_cast<size_t>(b)];
                for (int64_t c = 0; c < C; ++c) {
                    grow[c] += scale * (row[c] - (c == lab ? 1.0f : 0.0f));
                }
            }
        }
    };
    return out;
}

void Tape::backward(VarId loss) {
    if (nodes_.empty()) throw UsageError("backward: empty tape (run a forward pass first)");
    if (loss < 0 || static_cast<size_t>(loss) >= nodes_.size()) {
        throw UsageError("backward: invalid loss node");
    }
    if (value(loss).numel() != 1) throw UsageError("backward: loss must be a scalar");
    grad(loss)[0] = 1.0f;
    for (VarId id = loss; id >= 0; --id) {
        Node& n = node(id);
        if (n.back && n.grad_alloc) n.back(*this);
    }
}

}  // namespace ad
}  // namespace spikepoint
