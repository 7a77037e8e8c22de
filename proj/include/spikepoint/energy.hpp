#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikepoint/pipeline.hpp"
#include "spikepoint/snn.hpp"

namespace spikepoint {

// 45 nm operation energies and SRAM standby power.
struct EnergyConstants {
    double e_mac_j = 4.6e-12;
    double e_ac_j = 0.9e-12;
    double spp_bit_w = 12.991e-12;
    double bits_per_param = 32.0;
    double l_sample_s = 1.0;
};

enum class Regime { snn, ann };

struct LayerEnergy {
    std::string name;
    int64_t flops = 0;      // MACs of one pass (conv/fc only)
    double firerate = 0.0;  // mean nonzero fraction of the layer's input
    double sops = 0.0;      // firerate * T * flops
};

// MAC counts per layer from the network shape; batchnorm and pooling are
// excluded from the count.
std::vector<LayerShape> count_flops(const NetworkConfig& cfg);

// Mean input fire rate per layer over up to max_samples dataset samples.
std::vector<std::pair<std::string, double>> measure_firerate(
    Network& net, const std::vector<GroupedSample>& samples, bool clamp_negative,
    uint64_t seed, int max_samples);

double dynamic_energy_total(double total_ops, Regime regime, const EnergyConstants& k);
double dynamic_energy(const std::vector<LayerEnergy>& layers, Regime regime,
                      const EnergyConstants& k);

double static_energy(double params, double bits_per_param, double spp_bit_w,
                     double l_sample_s);

// Calibrated static model anchored to one reference (params, static_j) row;
// scaling by params ratio reproduces the reference row exactly.
struct StaticCalibration {
    double ref_params = 0.0;
    double ref_static_j = 0.0;

    double static_for(double params) const { return ref_static_j * (params / ref_params); }
    double bit_seconds_per_param(double spp_bit_w) const {
        return ref_static_j / (ref_params * spp_bit_w);
    }
};

struct EnergyReport {
    std::vector<LayerEnergy> layers;
    int64_t T = 0;
    int64_t params = 0;
    double total_flops = 0.0;
    double total_sops = 0.0;
    double dynamic_snn_j = 0.0;
    double dynamic_ann_j = 0.0;
    double static_j = 0.0;
    EnergyConstants constants;
};

EnergyReport make_report(Network& net, const std::vector<GroupedSample>& samples,
                         bool clamp_negative, const EnergyConstants& k, uint64_t seed,
                         int max_samples = 16);

// Independent re-summation of the report totals; throws NumericError on
// disagreement.
void verify_report(const EnergyReport& report);

std::string report_to_json(const EnergyReport& report);
std::string report_to_csv(const EnergyReport& report);

}  // namespace spikepoint
