#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vnn/tensor.hpp"

namespace vnn {

enum class Padding { valid, zero_spatial };
enum class TemporalMode { overlapping, non_overlapping };

// Which taps the quadratic term may multiply together. Trunk layers pair taps
// of the same input channel only; the two-stream fusion layer pairs taps
// across all of its input channels (both streams).
enum class Pairing { within_channel, cross_channel };

struct LayerGeometry {
  std::size_t len_t = 1;   // temporal taps
  std::size_t half_h = 0;  // spatial half-extents: sigma in [-half, half]
  std::size_t half_w = 0;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Padding padding = Padding::valid;
  TemporalMode temporal_mode = TemporalMode::overlapping;

  std::size_t taps_h() const noexcept { return 2 * half_h + 1; }
  std::size_t taps_w() const noexcept { return 2 * half_w + 1; }
  // n_w: taps in one spatio-temporal window of one channel.
  std::size_t window_size() const noexcept { return len_t * taps_h() * taps_w(); }

  void validate() const;
  bool operator==(const LayerGeometry&) const = default;
};

struct ExactKernel {
  // [out][group][m][m], row index = first tap, column = second tap.
  std::vector<double> w2;
  bool operator==(const ExactKernel&) const = default;
};

struct SeparableKernel {
  std::size_t rank = 1;  // Q
  // [out][group][q][m] each.
  std::vector<double> a;
  std::vector<double> b;
  bool operator==(const SeparableKernel&) const = default;
};

using QuadraticMode = std::variant<ExactKernel, SeparableKernel>;

enum class QuadraticKind { exact, separable };

struct QuadraticSpec {
  QuadraticKind kind = QuadraticKind::exact;
  std::size_t rank = 1;  // only for separable
  bool operator==(const QuadraticSpec&) const = default;
};

// Second-order spatio-temporal Volterra layer without a constant term:
//   y[o] = sum_i w1[o,i] . x_i + sum_groups x_g^T W2[o,g] x_g
// where x_i is the n_w-tap window of input channel i at one output position.
// Tap (tau, s1, s2) reads frame t - tau and pixel (h - s1, w - s2); tau = 0 is
// the newest frame of the window.
struct VolterraLayer {
  LayerGeometry geometry;
  Pairing pairing = Pairing::within_channel;
  std::vector<double> w1;  // [out][in][n_w]
  QuadraticMode quad;

  // Zero-initialised layer with correctly sized weight arrays.
  static VolterraLayer zeros(const LayerGeometry& geometry, const QuadraticSpec& spec,
                             Pairing pairing = Pairing::within_channel);

  std::size_t window_size() const noexcept { return geometry.window_size(); }
  // Number of independent quadratic blocks per output channel, and their length.
  std::size_t group_count() const noexcept;
  std::size_t group_length() const noexcept;
  bool is_separable() const noexcept { return std::holds_alternative<SeparableKernel>(quad); }
  QuadraticSpec quadratic_spec() const;
  std::size_t parameter_count() const noexcept;

  Shape output_shape(const Shape& input_shape) const;

  bool operator==(const VolterraLayer&) const = default;
};

// Named mutable views over a layer's (or a same-shaped gradient's) weights,
// in storage order: w1 then w2, or w1 then a, b.
struct WeightBlock {
  std::string name;
  std::span<double> values;
};
std::vector<WeightBlock> weight_blocks(VolterraLayer& layer);

// Sum of squares of every stored weight.
double squared_l2(const VolterraLayer& layer);

// Evaluates the layer; dispatches on the quadratic mode.
Tensor forward(const VolterraLayer& layer, const Tensor& input);
// Separable evaluation: sum_q (a_q . x)(b_q . x). Throws ConfigError for exact layers.
Tensor forward_separable(const VolterraLayer& layer, const Tensor& input);

// W2[o,g] = sum_q a_q b_q^T.
ExactKernel assemble_exact(const SeparableKernel& sep, std::size_t blocks, std::size_t group_length);
VolterraLayer assemble_exact(const VolterraLayer& layer);

struct LayerGradients {
  std::vector<double> w1;
  QuadraticMode quad;  // same alternative and sizes as the layer
  Tensor input;        // empty (default) when not requested
};

LayerGradients backward(const VolterraLayer& layer, const Tensor& input, const Tensor& upstream,
                        bool want_input_grad = true);

struct L1Norms {
  double linear_l1 = 0.0;
  double quad_l1 = 0.0;
};
L1Norms l1_norms(const VolterraLayer& layer);

// A * sum|W1| + A^2 * sum|W2|: bounds |forward(x)| whenever max|x| <= A.
double output_bound(const L1Norms& norms, double input_bound);
double output_bound(const VolterraLayer& layer, double input_bound);

}  // namespace vnn
