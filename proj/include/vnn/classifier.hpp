#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vnn {

// Linear scores W f + b followed by softmax.
struct ClassifierHead {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // [classes][dim]
  std::vector<double> biases;   // [classes]

  static ClassifierHead zeros(std::size_t classes, std::size_t dim);
  std::vector<double> scores(std::span<const double> features) const;
  bool operator==(const ClassifierHead&) const = default;
};

// Max-subtracted softmax. Throws NumericError on non-finite scores.
std::vector<double> softmax(std::span<const double> scores);
std::vector<double> class_probabilities(const ClassifierHead& head, std::span<const double> features);

// -log(probs[label]). A probability that underflowed to 0 is clamped to
// 1e-300; `clamped` (when given) reports that, and a warning is logged.
double cross_entropy(std::span<const double> probs, std::size_t label, bool* clamped = nullptr);

struct HeadGradients {
  std::vector<double> weights;   // (p - d) f^T
  std::vector<double> biases;    // p - d
  std::vector<double> features;  // W^T (p - d)
};

// Gradients of cross_entropy(class_probabilities(head, f), label).
HeadGradients head_and_feature_grads(const ClassifierHead& head, std::span<const double> features,
                                     std::size_t label);
// Same, from already computed probabilities.
HeadGradients head_and_feature_grads(const ClassifierHead& head, std::span<const double> features,
                                     std::span<const double> probs, std::size_t label);

struct LossConfig {
  double lambda = 0.0;  // weight decay, >= 0
};

}  // namespace vnn
