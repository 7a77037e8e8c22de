#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spikepoint {

struct GradCheckResult {
    std::string name;
    double max_err = 0.0;  // relative, except the surrogate row (absolute)
    double tolerance = 0.0;
    bool pass = false;
};

// Finite-difference verification of the gradient engine:
//   surrogate_fd    - sigma'(x) vs central differences of sigma(x)
//   linear_path_fd  - conv/bn parameter gradients behind frozen spikes
//   smooth_mode_fd  - full stack with the smooth spike function end to end
//   plif_decay_grad - learnable decay gets a nonzero, sign-consistent gradient
std::vector<GradCheckResult> run_gradchecks(uint64_t seed);

}  // namespace spikepoint
