#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vnn/cascade.hpp"
#include "vnn/fusion.hpp"

namespace vnn {

// One labelled clip. `flow` is present for two-stream data.
struct Sample {
  Tensor rgb;
  std::optional<Tensor> flow;
  std::size_t label = 0;
  std::string id;
  std::string video;  // clips sharing a video id are aggregated by evaluate()
};

using Model = std::variant<CascadeNetwork, TwoStreamNetwork>;

template <class T>
struct BasicParamGroup {
  std::string name;
  std::span<T> values;
  bool decayed = true;  // biases are exempt from weight decay
  Shape shape;          // logical layout of `values`
};
using ParamGroup = BasicParamGroup<double>;
using ConstParamGroup = BasicParamGroup<const double>;

// Every trainable array, in a fixed order shared with SampleGradients.
std::vector<ParamGroup> parameter_groups(Model& model);
std::vector<ConstParamGroup> parameter_groups(const Model& model);

std::uint64_t census(const Model& model);
std::size_t num_classes(const Model& model);
bool needs_flow(const Model& model);

std::vector<double> predict(const Model& model, const Sample& sample);

struct SampleGradients {
  double loss = 0.0;  // cross-entropy only (sum over heads for weighted averaging)
  std::vector<double> probabilities;
  std::vector<std::vector<double>> groups;  // aligned with parameter_groups()
};

SampleGradients sample_gradients(const Model& model, const Sample& sample);

// The training loss of one sample, forward only (matches SampleGradients::loss).
double sample_loss(const Model& model, const Sample& sample);

// 1/2 sum of squared decayed weights (all layers of all streams, classifier
// weights; no biases).
double decay_term(const Model& model);

// Mean cross-entropy over the batch + lambda * decay_term.
double regularized_objective(const Model& model, std::span<const Sample> batch, double lambda);

}  // namespace vnn
