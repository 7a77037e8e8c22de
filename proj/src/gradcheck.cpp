#include "spikepoint/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "spikepoint/autodiff.hpp"
#include "spikepoint/rng.hpp"
#include "spikepoint/tensor.hpp"

namespace spikepoint {

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

Tensor random_bits(std::vector<int64_t> shape, Rng& rng, double p) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform01() < p ? 1.0f : 0.0f;
    return t;
}

double rel_err(double a, double b) {
    double scale = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / scale;
}

// Toy stack shared by the FD checks. Parameters are owned here; build()
// re-runs the forward on the current values and returns the scalar loss.
struct ToyNet {
    Tensor x;  // input spikes [T, B, 3]
    Tensor w1{{4, 3}}, b1{{4}}, g1{{4}, 1.0f}, be1{{4}};
    Tensor w2{{3, 4}}, b2{{3}}, g2{{3}, 1.0f}, be2{{3}};
    Tensor rm1{{4}}, rv1{{4}, 1.0f}, rm2{{3}}, rv2{{3}, 1.0f};
    Tensor plif_w{{1}};
    std::vector<int> labels{0, 1};
    ad::SpikeMode mode = ad::SpikeMode::spike;
    Tensor pinned;  // recorded spikes for SpikeMode::pinned

    struct Built {
        ad::Tape tape;
        ad::VarId loss;
        std::vector<std::pair<std::string, ad::VarId>> params;
        ad::VarId plif = -1;
    };

    void init(Rng& rng) {
        x = random_bits({6, 2, 3}, rng, 0.5);
        w1 = random_tensor({4, 3}, rng, -0.6, 0.6);
        b1 = random_tensor({4}, rng, -0.2, 0.2);
        w2 = random_tensor({3, 4}, rng, -0.6, 0.6);
        b2 = random_tensor({3}, rng, -0.2, 0.2);
        be1 = random_tensor({4}, rng, -0.1, 0.1);
        be2 = random_tensor({3}, rng, -0.1, 0.1);
    }

    Built build() {
        Built bt;
        ad::Tape& t = bt.tape;
        ad::VarId xi = t.leaf(x, false);
        auto param = [&](const char* name, Tensor& v) {
            ad::VarId id = t.leaf(v, true);
            bt.params.emplace_back(name, id);
            return id;
        };
        ad::VarId w1i = param("w1", w1);
        ad::VarId b1i = param("b1", b1);
        ad::VarId h = t.pointwise_conv(xi, w1i, b1i);
        ad::VarId g1i = param("g1", g1);
        ad::VarId be1i = param("be1", be1);
        h = t.batchnorm(h, g1i, be1i, &rm1, &rv1, /*training=*/false);
        ad::LifScanConfig sc;
        sc.mode = mode;
        sc.v_th = 1.0f;
        if (mode == ad::SpikeMode::pinned) sc.pinned_spikes = &pinned;
        bt.plif = t.leaf(plif_w, true);
        h = t.lif_scan(h, sc, bt.plif);
        ad::VarId w2i = param("w2", w2);
        ad::VarId b2i = param("b2", b2);
        h = t.pointwise_conv(h, w2i, b2i);
        ad::VarId g2i = param("g2", g2);
        ad::VarId be2i = param("be2", be2);
        h = t.batchnorm(h, g2i, be2i, &rm2, &rv2, /*training=*/false);
        bt.loss = t.mse_loss(h, labels);
        return bt;
    }

    static ad::VarId find(const Built& bt, const std::string& name) {
        for (const auto& [n, id] : bt.params) {
            if (n == name) return id;
        }
        return -1;
    }

    double loss_value() {
        Built bt = build();
        return bt.tape.value(bt.loss)[0];
    }
};

// Central finite difference of the toy loss in one parameter entry.
double fd_slope(ToyNet& net, Tensor& param, int64_t i, double h) {
    float saved = param[i];
    param[i] = static_cast<float>(saved + h);
    double up = net.loss_value();
    param[i] = static_cast<float>(saved - h);
    double down = net.loss_value();
    param[i] = saved;
    return (up - down) / (2.0 * h);
}

// Richardson-extrapolated central difference: cancels the O(h^2) term, so a
// larger h can be used to stay above float32 rounding noise.
double fd_slope_rich(ToyNet& net, Tensor& param, int64_t i, double h) {
    double coarse = fd_slope(net, param, i, 2.0 * h);
    double fine = fd_slope(net, param, i, h);
    return (4.0 * fine - coarse) / 3.0;
}

GradCheckResult check_surrogate(Rng& rng) {
    GradCheckResult r{"surrogate_fd", 0.0, 1e-6, false};
    const double h = 1e-5;
    for (int i = 0; i < 100; ++i) {
        double x = rng.uniform(-3.0, 3.0);
        double fd = (ad::surrogate_sigma(x + h) - ad::surrogate_sigma(x - h)) / (2.0 * h);
        r.max_err = std::max(r.max_err, std::fabs(fd - ad::surrogate_grad(x)));
    }
    r.pass = r.max_err < r.tolerance;
    return r;
}

GradCheckResult check_linear_path(Rng& rng) {
    GradCheckResult r{"linear_path_fd", 0.0, 1e-4, false};
    ToyNet net;
    net.init(rng);

    // Record the spike decisions once, then pin them: the remaining path to
    // the loss is affine, so central differences are exact up to rounding.
    {
        ad::Tape probe;
        ad::VarId xi = probe.leaf(net.x, false);
        ad::VarId h = probe.pointwise_conv(xi, probe.leaf(net.w1, false),
                                           probe.leaf(net.b1, false));
        h = probe.batchnorm(h, probe.leaf(net.g1, false), probe.leaf(net.be1, false), &net.rm1,
                            &net.rv1, false);
        ad::LifScanConfig sc;
        sc.mode = ad::SpikeMode::spike;
        h = probe.lif_scan(h, sc, probe.leaf(net.plif_w, false));
        net.pinned = probe.value(h);
    }
    net.mode = ad::SpikeMode::pinned;

    ToyNet::Built bt = net.build();
    bt.tape.backward(bt.loss);

    struct Entry {
        Tensor* host;
        ad::VarId id;
    };
    std::vector<Entry> entries = {{&net.w2, ToyNet::find(bt, "w2")},
                                  {&net.b2, ToyNet::find(bt, "b2")},
                                  {&net.g2, ToyNet::find(bt, "g2")},
                                  {&net.be2, ToyNet::find(bt, "be2")}};
    // The loss is exactly quadratic along this path, so the central
    // difference has no truncation error at any step size; the comparison is
    // the gradient-vector relative error, which keeps float rounding noise on
    // near-zero entries from masquerading as a defect.
    double diff2 = 0.0, ref2 = 0.0;
    for (auto& e : entries) {
        const Tensor& an = bt.tape.grad(e.id);
        for (int64_t i = 0; i < e.host->numel(); ++i) {
            double fd = fd_slope(net, *e.host, i, 0.125);
            double a = static_cast<double>(an[i]);
            diff2 += (a - fd) * (a - fd);
            ref2 += fd * fd;
        }
    }
    r.max_err = std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-12);
    // Everything upstream of the pinned spikes must have an exactly zero
    // effect on the loss.
    for (int pi = 0; pi < 4; ++pi) {
        Tensor* host = pi == 0 ? &net.w1 : pi == 1 ? &net.b1 : pi == 2 ? &net.g1 : &net.be1;
        double fd = fd_slope(net, *host, 0, 0.125);
        r.max_err = std::max(r.max_err, std::fabs(fd));
    }
    r.pass = r.max_err < r.tolerance;
    return r;
}

GradCheckResult check_smooth_mode(Rng& rng) {
    GradCheckResult r{"smooth_mode_fd", 0.0, 5e-3, false};
    ToyNet net;
    net.init(rng);
    net.mode = ad::SpikeMode::smooth;

    ToyNet::Built bt = net.build();
    bt.tape.backward(bt.loss);

    const char* names[8] = {"w1", "b1", "g1", "be1", "w2", "b2", "g2", "be2"};
    Tensor* hosts[8] = {&net.w1, &net.b1, &net.g1, &net.be1,
                        &net.w2, &net.b2, &net.g2, &net.be2};
    for (int pi = 0; pi < 8; ++pi) {
        const Tensor& an = bt.tape.grad(ToyNet::find(bt, names[pi]));
        double gmax = 0.0;
        for (int64_t i = 0; i < an.numel(); ++i) {
            gmax = std::max(gmax, std::fabs(static_cast<double>(an[i])));
        }
        for (int64_t i = 0; i < hosts[pi]->numel(); ++i) {
            double fd = fd_slope_rich(net, *hosts[pi], i, 1e-2);
            double a = static_cast<double>(an[i]);
            // entries far below the parameter's gradient scale are noise
            double denom = std::max(std::max(std::fabs(a), std::fabs(fd)),
                                    std::max(0.05 * gmax, 1e-6));
            r.max_err = std::max(r.max_err, std::fabs(a - fd) / denom);
        }
    }
    r.pass = r.max_err < r.tolerance;
    return r;
}

GradCheckResult check_plif_decay(Rng& rng) {
    GradCheckResult r{"plif_decay_grad", 0.0, 0.0, false};
    ToyNet net;
    net.init(rng);
    net.mode = ad::SpikeMode::smooth;

    ToyNet::Built bt = net.build();
    bt.tape.backward(bt.loss);
    double an = bt.tape.grad(bt.plif)[0];
    double fd = fd_slope(net, net.plif_w, 0, 5e-3);
    bool nonzero = std::fabs(an) > 1e-8;
    bool sign_ok = (an > 0) == (fd > 0);
    r.max_err = rel_err(an, fd);
    r.pass = nonzero && sign_ok;

    // and the spiking net must also produce a nonzero decay gradient
    net.mode = ad::SpikeMode::spike;
    ToyNet::Built sp = net.build();
    sp.tape.backward(sp.loss);
    if (std::fabs(sp.tape.grad(sp.plif)[0]) <= 0.0) r.pass = false;
    return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradchecks(uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckResult> out;
    out.push_back(check_surrogate(rng));
    out.push_back(check_linear_path(rng));
    out.push_back(check_smooth_mode(rng));
    out.push_back(check_plif_decay(rng));
    return out;
}

}  // namespace spikepoint
