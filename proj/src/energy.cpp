#include "spikepoint/energy.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "spikepoint/rng.hpp"

namespace spikepoint {

using nlohmann::json;

std::vector<LayerShape> count_flops(const NetworkConfig& cfg) {
    // Build a throwaway network so the layer list can never drift from the
    // one the forward pass actually runs.
    Network net(cfg, 0);
    return net.layer_shapes();
}

std::vector<std::pair<std::string, double>> measure_firerate(
    Network& net, const std::vector<GroupedSample>& samples, bool clamp_negative,
    uint64_t seed, int max_samples) {
    std::map<std::string, std::pair<double, int64_t>> acc;
    int n = std::min<int>(max_samples, static_cast<int>(samples.size()));
    if (n == 0) throw DegenerateInputError("measure_firerate: no samples");
    bool raw = net.config().structure == Structure::global_only ||
               net.config().structure == Structure::pointnet;
    for (int i = 0; i < n; ++i) {
        uint64_t s = counter_hash(seed, 0xF12E, static_cast<uint64_t>(i));
        SamplePrediction p =
            raw ? net.predict_raw(samples[static_cast<size_t>(i)].points, s)
                : net.predict(samples[static_cast<size_t>(i)].grouped, s, clamp_negative);
        for (const auto& [name, rate] : p.fire_rates) {
            acc[name].first += rate;
            acc[name].second += 1;
        }
    }
    std::vector<std::pair<std::string, double>> out;
    for (const LayerShape& l : net.layer_shapes()) {
        auto it = acc.find(l.name);
        double rate = it == acc.end() ? 0.0
                                      : it->second.first / static_cast<double>(it->second.second);
        out.emplace_back(l.name, rate);
    }
    return out;
}

double dynamic_energy_total(double total_ops, Regime regime, const EnergyConstants& k) {
    return total_ops * (regime == Regime::snn ? k.e_ac_j : k.e_mac_j);
}

double dynamic_energy(const std::vector<LayerEnergy>& layers, Regime regime,
                      const EnergyConstants& k) {
    double total = 0.0;
    for (const auto& l : layers) {
        total += regime == Regime::snn ? l.sops : static_cast<double>(l.flops);
    }
    return dynamic_energy_total(total, regime, k);
}

double static_energy(double params, double bits_per_param, double spp_bit_w,
                     double l_sample_s) {
    if (params < 0.0 || bits_per_param <= 0.0 || spp_bit_w <= 0.0 || l_sample_s < 0.0) {
        throw ConfigError("static_energy: arguments must be positive");
    }
    return params * bits_per_param * spp_bit_w * l_sample_s;
}

EnergyReport make_report(Network& net, const std::vector<GroupedSample>& samples,
                         bool clamp_negative, const EnergyConstants& k, uint64_t seed,
                         int max_samples) {
    EnergyReport r;
    r.constants = k;
    r.T = net.config().T;
    r.params = net.param_count();
    auto shapes = net.layer_shapes();
    auto rates = measure_firerate(net, samples, clamp_negative, seed, max_samples);
    for (size_t i = 0; i < shapes.size(); ++i) {
        LayerEnergy le;
        le.name = shapes[i].name;
        le.flops = shapes[i].macs();
        le.firerate = rates[i].second;
        le.sops = le.firerate * static_cast<double>(r.T) * static_cast<double>(le.flops);
        r.total_flops += static_cast<double>(le.flops);
        r.total_sops += le.sops;
        r.layers.push_back(std::move(le));
    }
    r.dynamic_snn_j = dynamic_energy(r.layers, Regime::snn, k);
    r.dynamic_ann_j = dynamic_energy(r.layers, Regime::ann, k);
    r.static_j = static_energy(static_cast<double>(r.params), k.bits_per_param, k.spp_bit_w,
                               k.l_sample_s);
    verify_report(r);
    return r;
}

void verify_report(const EnergyReport& report) {
    // Second pass in reverse order with extended precision.
    long double flops = 0.0L, sops = 0.0L;
    for (auto it = report.layers.rbegin(); it != report.layers.rend(); ++it) {
        flops += static_cast<long double>(it->flops);
        long double s = static_cast<long double>(it->firerate) * report.T * it->flops;
        sops += s;
        if (it->firerate < 0.0 || it->firerate > 1.0) {
            throw NumericError("energy report: fire rate outside [0, 1] for layer " + it->name);
        }
    }
    auto close = [](long double a, double b) {
        long double diff = a - static_cast<long double>(b);
        if (diff < 0) diff = -diff;
        long double mag = a < 0 ? -a : a;
        return diff <= 1e-9L * (mag + 1.0L);
    };
    if (!close(flops, report.total_flops) || !close(sops, report.total_sops)) {
        throw NumericError("energy report: totals disagree with per-layer re-summation");
    }
    long double dyn_snn = sops * static_cast<long double>(report.constants.e_ac_j);
    long double dyn_ann = flops * static_cast<long double>(report.constants.e_mac_j);
    if (!close(dyn_snn, report.dynamic_snn_j) || !close(dyn_ann, report.dynamic_ann_j)) {
        throw NumericError("energy report: dynamic energy disagrees with re-summation");
    }
    long double st = static_cast<long double>(report.params) * report.constants.bits_per_param *
                     report.constants.spp_bit_w * report.constants.l_sample_s;
    if (!close(st, report.static_j)) {
        throw NumericError("energy report: static energy disagrees with re-computation");
    }
}

std::string report_to_json(const EnergyReport& report) {
    json j;
    j["layers"] = json::array();
    for (const auto& l : report.layers) {
        j["layers"].push_back({{"name", l.name},
                               {"flops", l.flops},
                               {"firerate", l.firerate},
                               {"sops", l.sops}});
    }
    j["totals"] = {{"flops", report.total_flops},
                   {"sops", report.total_sops},
                   {"dynamic_snn_j", report.dynamic_snn_j},
                   {"dynamic_ann_j", report.dynamic_ann_j},
                   {"static_j", report.static_j},
                   {"params", report.params},
                   {"timesteps", report.T}};
    j["constants"] = {{"e_mac_j", report.constants.e_mac_j},
                      {"e_ac_j", report.constants.e_ac_j},
                      {"spp_bit_w", report.constants.spp_bit_w},
                      {"bits_per_param", report.constants.bits_per_param},
                      {"l_sample_s", report.constants.l_sample_s}};
    return j.dump(2);
}

std::string report_to_csv(const EnergyReport& report) {
    std::string out = "layer,flops,firerate,sops\n";
    char buf[160];
    for (const auto& l : report.layers) {
        std::snprintf(buf, sizeof buf, "%s,%lld,%.9g,%.9g\n", l.name.c_str(),
                      static_cast<long long>(l.flops), l.firerate, l.sops);
        out += buf;
    }
    return out;
}

}  // namespace spikepoint
