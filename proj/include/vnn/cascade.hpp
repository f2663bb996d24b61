#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vnn/classifier.hpp"
#include "vnn/layer.hpp"
#include "vnn/tensor.hpp"

namespace vnn {

struct LayerSpec {
  LayerGeometry geometry;
  QuadraticSpec quadratic;
  bool operator==(const LayerSpec&) const = default;
};

// How trunk features reach the classifier.
enum class Pooling { flatten, spatial_mean };

// A stack of quadratic Volterra layers applied to [C, T, H, W] clips.
struct TrunkConfig {
  std::vector<LayerSpec> layers;
  Shape input_shape;  // [C, T, H, W]

  // Throws ConfigError naming the first layer whose window, channel count,
  // or non-overlapping stride does not fit the incoming feature shape.
  void validate() const;
  // Input shape followed by each layer's (re-strided) output shape.
  std::vector<Shape> shape_chain() const;
  Shape output_shape() const { return shape_chain().back(); }
  bool operator==(const TrunkConfig&) const = default;
};

struct CascadeConfig {
  TrunkConfig trunk;
  Pooling pooling = Pooling::flatten;
  std::size_t num_classes = 2;

  void validate() const;
  std::size_t feature_dim() const;
  bool operator==(const CascadeConfig&) const = default;
};

struct CascadeNetwork {
  CascadeConfig config;
  std::vector<VolterraLayer> layers;
  ClassifierHead head;

  bool operator==(const CascadeNetwork&) const = default;
};

// Uniform init in [-s, s]: s = 1/n_w for linear kernels, 1/n_w^2 for
// quadratic kernels or their factors (n_w = quadratic block length for the
// latter), 1/sqrt(D) for classifier weights; zero biases.
void init_layer(VolterraLayer& layer, std::uint64_t seed);
void init_head(ClassifierHead& head, std::uint64_t seed);
std::vector<VolterraLayer> build_trunk(const TrunkConfig& config, std::uint64_t seed);
CascadeNetwork build(const CascadeConfig& config, std::uint64_t seed);

// Non-overlapping windows: keep every len_t-th output frame, starting at 0.
Tensor restride(const Tensor& layer_output, std::size_t len_t, std::size_t out_frames);
Tensor restride_adjoint(const Tensor& grad, std::size_t len_t, const Shape& layer_output_shape);

struct TrunkTrace {
  std::vector<Tensor> inputs;  // input to each layer
  Tensor output;
};

TrunkTrace forward_trunk(std::span<const VolterraLayer> layers, const Tensor& clip);
// Gradients of every layer given d(loss)/d(trunk output). The gradient with
// respect to the clip is only formed when requested.
std::vector<LayerGradients> backward_trunk(std::span<const VolterraLayer> layers, const TrunkTrace& trace,
                                           const Tensor& grad_output, Tensor* grad_clip = nullptr);

// Trunk features (before pooling). Throws ShapeError on a clip shape mismatch.
Tensor forward_cascade(const CascadeNetwork& net, const Tensor& clip);

std::vector<double> pool_features(const Tensor& features, Pooling pooling);
Tensor pool_adjoint(std::span<const double> grad, const Shape& feature_shape, Pooling pooling);
std::size_t pooled_dim(const Shape& feature_shape, Pooling pooling);

// Parameter counting ----------------------------------------------------------

std::uint64_t layer_param_count(const LayerGeometry& geometry, const QuadraticSpec& quadratic,
                                Pairing pairing = Pairing::within_channel);

struct ParamCount {
  std::vector<std::uint64_t> per_layer;
  std::uint64_t total = 0;  // all Volterra layers, exact or separable as configured
  std::uint64_t head = 0;   // classifier, reported separately
  std::uint64_t full_kth_order = 0;  // K used for the monolithic comparison (degree bound)
  std::uint64_t full_kth_window = 0;  // n_w of the cascade's receptive field
  std::uint64_t full_kth_equiv = 0;   // sum_k n_w^k, saturating
  bool full_kth_saturated = false;
};

ParamCount param_count(const CascadeConfig& config);
// sum_{k=1..order} window^k for one monolithic single-channel filter.
std::uint64_t monolithic_param_count(std::uint64_t window, std::uint64_t order, bool* saturated = nullptr);
std::uint64_t census(const CascadeNetwork& net);

// Order of a Z-layer quadratic cascade: the closed form quoted for such
// cascades, and the polynomial degree actually reachable (each quadratic
// layer at most doubles the degree).
struct OrderReport {
  std::size_t layers = 0;
  std::optional<std::uint64_t> nominal_order;  // 2^(2^(Z-1)); empty when it overflows
  std::uint64_t degree_bound = 0;             // 2^Z
};
OrderReport order_report(std::size_t layer_count);

// BIBO stability --------------------------------------------------------------

struct LayerStability {
  double linear_l1 = 0.0;
  double quad_l1 = 0.0;
  double bound = 0.0;  // A_z
};

struct StabilityReport {
  double input_bound = 0.0;
  std::vector<LayerStability> layers;
  double end_to_end = 0.0;
  bool finite = true;
};

// A_z = A_{z-1} sum|W1_z| + A_{z-1}^2 sum|W2_z|, A_0 = input_bound.
StabilityReport stability_report(std::span<const VolterraLayer> layers, double input_bound);
StabilityReport stability_report(const CascadeNetwork& net, double input_bound);

}  // namespace vnn
