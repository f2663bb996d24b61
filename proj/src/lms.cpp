#include "vnn/lms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vnn/errors.hpp"
#include "vnn/rng.hpp"

namespace vnn {

VolterraSeries canonical_form(const VolterraSeries& system) {
  system.validate();
  const std::size_t L = system.memory;
  VolterraSeries out{L, {}};
  for (std::size_t k = 1; k <= system.order(); ++k) {
    const auto& w = system.kernels[k - 1];
    std::vector<double> folded(w.size(), 0.0);
    std::vector<std::size_t> taus(k, 0);
    for (std::size_t flat = 0; flat < w.size(); ++flat) {
      auto sorted = taus;
      std::sort(sorted.begin(), sorted.end());
      std::size_t target = 0;
      for (auto t : sorted) target = target * L + t;
      folded[target] += w[flat];
      for (std::size_t j = k; j-- > 0;) {
        if (++taus[j] < L) break;
        taus[j] = 0;
      }
    }
    out.kernels.push_back(std::move(folded));
  }
  return out;
}

namespace {

// Monomial features of the canonical form: x[t-i] and x[t-i] x[t-j], i <= j.
struct Features {
  std::size_t L = 0;
  std::size_t order = 0;
  std::vector<std::size_t> index;  // flat kernel position of each feature
  std::vector<std::size_t> first, second;
  std::vector<std::size_t> kernel;  // 0 linear, 1 quadratic

  Features(std::size_t memory, std::size_t k) : L(memory), order(k) {
    for (std::size_t i = 0; i < L && k >= 1; ++i) {
      index.push_back(i);
      first.push_back(i);
      second.push_back(0);
      kernel.push_back(0);
    }
    for (std::size_t i = 0; i < L && k >= 2; ++i) {
      for (std::size_t j = i; j < L; ++j) {
        index.push_back(i * L + j);
        first.push_back(i);
        second.push_back(j);
        kernel.push_back(1);
      }
    }
  }

  void eval(const std::vector<double>& delayed, std::vector<double>& phi) const {
    phi.resize(index.size());
    for (std::size_t f = 0; f < index.size(); ++f) {
      phi[f] = kernel[f] == 0 ? delayed[first[f]] : delayed[first[f]] * delayed[second[f]];
    }
  }
};

double response(const std::vector<double>& w, const std::vector<double>& phi) {
  double y = 0.0;
  for (std::size_t f = 0; f < w.size(); ++f) y += w[f] * phi[f];
  return y;
}

}  // namespace

LmsResult lms_sysid(const VolterraSeries& target, const LmsConfig& config) {
  target.validate();
  if (target.order() > 2) throw ConfigError("lms_sysid supports order <= 2");
  if (target.memory > 3) throw ConfigError("lms_sysid supports memory <= 3");
  if (!(config.learning_rate > 0.0)) throw ConfigError("lms learning_rate must be > 0");
  if (config.samples == 0 || config.mse_window == 0) throw ConfigError("lms samples and mse_window must be >= 1");

  const auto canon = canonical_form(target);
  const std::size_t L = target.memory;
  const Features feats(L, target.order());
  std::vector<double> truth(feats.index.size());
  for (std::size_t f = 0; f < truth.size(); ++f) truth[f] = canon.kernels[feats.kernel[f]][feats.index[f]];

  Rng rng(config.seed);
  const double a = config.input_amplitude;
  std::vector<double> delayed(L, 0.0), phi;
  auto push = [&] {
    for (std::size_t i = L; i-- > 1;) delayed[i] = delayed[i - 1];
    delayed[0] = rng.uniform(-a, a);
  };
  for (std::size_t i = 0; i < L; ++i) push();

  LmsResult result;
  std::vector<double> w(truth.size(), 0.0);
  double window_sum = 0.0;
  std::size_t window_count = 0;
  for (std::size_t t = 0; t < config.samples; ++t) {
    push();
    feats.eval(delayed, phi);
    const double d = response(truth, phi);
    const double e = response(w, phi) - d;
    if (!std::isfinite(e) || std::abs(e) > 1e6) {
      throw DivergenceError("LMS diverged at sample " + std::to_string(t) + " with eta = " +
                            std::to_string(config.learning_rate) + "; reduce the learning rate");
    }
    for (std::size_t f = 0; f < w.size(); ++f) w[f] -= config.learning_rate * e * phi[f];
    window_sum += e * e;
    if (++window_count == config.mse_window) {
      result.mse_trace.push_back(window_sum / static_cast<double>(window_count));
      window_sum = 0.0;
      window_count = 0;
    }
  }
  if (window_count) result.mse_trace.push_back(window_sum / static_cast<double>(window_count));
  result.initial_mse = result.mse_trace.front();
  result.final_mse = result.mse_trace.back();

  result.learned.memory = L;
  for (std::size_t k = 1; k <= target.order(); ++k) {
    result.learned.kernels.emplace_back(canon.kernels[k - 1].size(), 0.0);
  }
  for (std::size_t f = 0; f < w.size(); ++f) {
    result.learned.kernels[feats.kernel[f]][feats.index[f]] = w[f];
    result.max_weight_error = std::max(result.max_weight_error, std::abs(w[f] - truth[f]));
  }
  return result;
}

}  // namespace vnn
