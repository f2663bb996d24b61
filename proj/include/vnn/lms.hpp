#pragma once

#include <cstdint>
#include <vector>

#include "vnn/oracle.hpp"

namespace vnn {

struct LmsConfig {
  double learning_rate = 0.1;  // eta
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double input_amplitude = 1.0;  // white noise, uniform in [-a, a]
  std::size_t mse_window = 100;  // samples per point of the MSE trace
};

struct LmsResult {
  VolterraSeries learned;  // canonical form (see canonical_form)
  std::vector<double> mse_trace;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  double max_weight_error = 0.0;  // vs canonical_form(target)
};

// Order-2 kernels only identify W[i][j] + W[j][i]; this folds each pair onto
// i <= j (lower triangle zero) so identified and planted systems compare
// entry by entry.
VolterraSeries canonical_form(const VolterraSeries& system);

// Adaptive Volterra filter trained sample by sample with
//   W(t+1) = W(t) - eta * dE/dW,  E = 1/2 (d - y)^2,
// where dE/dW^k[tau] is the product of the delayed inputs times (y - d).
// Supports order <= 2 and memory <= 3. Throws DivergenceError.
LmsResult lms_sysid(const VolterraSeries& target, const LmsConfig& config);

}  // namespace vnn
