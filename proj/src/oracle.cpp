#include "vnn/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "vnn/errors.hpp"
#include "vnn/layer.hpp"
#include "vnn/rng.hpp"

namespace vnn {

void VolterraSeries::validate() const {
  if (memory == 0) throw ConfigError("series memory L must be >= 1");
  std::size_t expect = 1;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    expect *= memory;
    if (kernels[k].size() != expect) {
      throw ShapeError("order-" + std::to_string(k + 1) + " kernel needs " + std::to_string(expect) + " entries");
    }
  }
}

namespace {

double sample(std::span<const double> x, std::size_t t, std::size_t tau) {
  return tau > t ? 0.0 : x[t - tau];
}

double nested_term(const VolterraSeries& sys, std::span<const double> x, std::size_t t, std::size_t level,
                   std::size_t prefix) {
  const std::size_t L = sys.memory;
  double sum = 0.0;
  for (std::size_t tau = 0; tau < L; ++tau) {
    const std::size_t idx = prefix * L + tau;
    double bracket = sys.kernels[level][idx];
    if (level + 1 < sys.order()) bracket += nested_term(sys, x, t, level + 1, idx);
    sum += sample(x, t, tau) * bracket;
  }
  return sum;
}

}  // namespace

std::vector<double> oracle_direct(const VolterraSeries& sys, std::span<const double> x) {
  sys.validate();
  const std::size_t L = sys.memory;
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double total = 0.0;
    for (std::size_t k = 1; k <= sys.order(); ++k) {
      const auto& w = sys.kernels[k - 1];
      std::vector<std::size_t> taus(k, 0);
      for (std::size_t flat = 0; flat < w.size(); ++flat) {
        double term = w[flat];
        for (std::size_t j = 0; j < k; ++j) term *= sample(x, t, taus[j]);
        total += term;
        for (std::size_t j = k; j-- > 0;) {
          if (++taus[j] < L) break;
          taus[j] = 0;
        }
      }
    }
    y[t] = total;
  }
  return y;
}

std::vector<double> oracle_nested(const VolterraSeries& sys, std::span<const double> x) {
  sys.validate();
  std::vector<double> y(x.size(), 0.0);
  if (sys.order() == 0) return y;
  for (std::size_t t = 0; t < x.size(); ++t) y[t] = nested_term(sys, x, t, 0, 0);
  return y;
}

OracleSuiteReport run_oracle_suite(std::uint64_t seed, std::size_t trials) {
  Rng rng(seed);
  OracleSuiteReport report;
  report.trials = trials;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    VolterraSeries sys;
    sys.memory = 1 + rng.below(3);
    const std::size_t order = 1 + rng.below(3);
    std::size_t n = 1;
    for (std::size_t k = 0; k < order; ++k) {
      n *= sys.memory;
      std::vector<double> w(n);
      rng.fill_uniform(w, -1.0, 1.0);
      sys.kernels.push_back(std::move(w));
    }
    std::vector<double> x(6 + rng.below(6));
    rng.fill_uniform(x, -1.0, 1.0);
    const auto direct = oracle_direct(sys, x);
    const auto nested = oracle_nested(sys, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      report.max_direct_vs_nested = std::max(report.max_direct_vs_nested, std::abs(direct[i] - nested[i]));
    }

    // A single-channel layer with 1x1 spatial extent is the K = 2 series.
    VolterraSeries quad_sys{sys.memory, {sys.kernels[0]}};
    std::vector<double> w2(sys.memory * sys.memory);
    rng.fill_uniform(w2, -1.0, 1.0);
    quad_sys.kernels.push_back(w2);
    LayerGeometry g;
    g.len_t = sys.memory;
    auto layer = VolterraLayer::zeros(g, {});
    layer.w1 = quad_sys.kernels[0];
    layer.quad = ExactKernel{w2};
    const Tensor clip({1, x.size(), 1, 1}, x);
    const Tensor out = forward(layer, clip);
    const auto ref = oracle_direct(quad_sys, x);
    for (std::size_t i = 0; i < out.size(); ++i) {
      report.max_layer_vs_direct =
          std::max(report.max_layer_vs_direct, std::abs(out[i] - ref[i + sys.memory - 1]));
    }
  }
  return report;
}

}  // namespace vnn
