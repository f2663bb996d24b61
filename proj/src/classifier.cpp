#include "vnn/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "vnn/errors.hpp"
#include "vnn/simd/kernels.hpp"

namespace vnn {

ClassifierHead ClassifierHead::zeros(std::size_t classes, std::size_t dim) {
  if (classes < 1 || dim < 1) throw ConfigError("classifier needs >= 1 class and feature");
  return {classes, dim, std::vector<double>(classes * dim, 0.0), std::vector<double>(classes, 0.0)};
}

std::vector<double> ClassifierHead::scores(std::span<const double> features) const {
  if (features.size() != dim) {
    throw ShapeError("classifier expects " + std::to_string(dim) + " features, got " +
                     std::to_string(features.size()));
  }
  std::vector<double> s(classes);
  for (std::size_t i = 0; i < classes; ++i) {
    s[i] = simd::dot(std::span<const double>(weights).subspan(i * dim, dim), features) + biases[i];
  }
  return s;
}

std::vector<double> softmax(std::span<const double> scores) {
  double top = -INFINITY;
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("non-finite class score");
    top = std::max(top, s);
  }
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] = std::exp(scores[i] - top);
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> class_probabilities(const ClassifierHead& head, std::span<const double> features) {
  for (double f : features) {
    if (!std::isfinite(f)) throw NumericError("non-finite feature");
  }
  return softmax(head.scores(features));
}

double cross_entropy(std::span<const double> probs, std::size_t label, bool* clamped) {
  if (label >= probs.size()) throw DomainError("label " + std::to_string(label) + " out of range");
  constexpr double floor = 1e-300;
  const double p = probs[label];
  const bool clip = p < floor;
  if (clamped) *clamped = clip;
  if (clip) std::fprintf(stderr, "warning: probability of label %zu underflowed; clamped to 1e-300\n", label);
  return -std::log(clip ? floor : p);
}

HeadGradients head_and_feature_grads(const ClassifierHead& head, std::span<const double> features,
                                     std::size_t label) {
  const auto probs = class_probabilities(head, features);
  return head_and_feature_grads(head, features, probs, label);
}

HeadGradients head_and_feature_grads(const ClassifierHead& head, std::span<const double> features,
                                     std::span<const double> probs, std::size_t label) {
  if (label >= head.classes) throw DomainError("label out of range");
  HeadGradients g;
  g.biases.assign(probs.begin(), probs.end());
  g.biases[label] -= 1.0;
  g.weights.assign(head.weights.size(), 0.0);
  g.features.assign(head.dim, 0.0);
  const auto& k = simd::active();
  k.ger(1.0, g.biases.data(), features.data(), g.weights.data(), head.classes, head.dim);
  k.gemv_t_acc(head.weights.data(), g.biases.data(), g.features.data(), head.classes, head.dim);
  return g;
}

}  // namespace vnn
