#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vnn {

// Truncated 1-D Volterra series: kernels[k-1] holds the order-k kernel,
// L^k entries indexed (tau_1, ..., tau_k) row-major.
struct VolterraSeries {
  std::size_t memory = 1;  // L
  std::vector<std::vector<double>> kernels;

  std::size_t order() const noexcept { return kernels.size(); }
  void validate() const;
};

// Literal K-nested-loop evaluation. Emits one output per input sample; taps
// reaching before the start of the series read zero (causality).
std::vector<double> oracle_direct(const VolterraSeries& system, std::span<const double> series);

// Horner-style nested evaluation: x[t-t1](W1 + sum x[t-t2](W2 + ...)).
std::vector<double> oracle_nested(const VolterraSeries& system, std::span<const double> series);

struct OracleSuiteReport {
  std::size_t trials = 0;
  double max_direct_vs_nested = 0.0;
  double max_layer_vs_direct = 0.0;
  double tolerance = 1e-12;
  bool passed() const noexcept {
    return max_direct_vs_nested <= tolerance && max_layer_vs_direct <= tolerance;
  }
};

// Random systems with K <= 3, L <= 3: direct vs nested evaluation, and a
// 1x1-spatial Volterra layer vs the K = 2 direct oracle.
OracleSuiteReport run_oracle_suite(std::uint64_t seed, std::size_t trials);

}  // namespace vnn
