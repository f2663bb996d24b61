#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vnn/cascade.hpp"

namespace vnn {

enum class FusionKind { volterra, concat, weighted_average };

struct FusionMode {
  FusionKind kind = FusionKind::volterra;
  double beta_rgb = 0.5;  // weighted_average only; beta_rgb + beta_flow == 1
  double beta_flow = 0.5;
  bool operator==(const FusionMode&) const = default;
};

struct TwoStreamConfig {
  TrunkConfig rgb;
  TrunkConfig flow;
  FusionMode mode;
  // Volterra fusion only. in_channels must equal the stacked trunk channels;
  // taps pair across both streams.
  LayerSpec fusion_layer;
  Pooling pooling = Pooling::flatten;
  std::size_t num_classes = 2;

  void validate() const;
  // Classifier input width: fused map, concatenation, or one per stream.
  std::size_t feature_dim() const;
  std::size_t flow_feature_dim() const;  // weighted_average second head
  bool operator==(const TwoStreamConfig&) const = default;
};

// Appearance and motion trunks joined by a fusion stage. For Volterra fusion
// the trunk outputs are stacked along channels (rgb first, then flow), and the
// fusion layer's quadratic term pairs every tap with every tap, so products of
// rgb and flow features appear alongside within-stream products.
struct TwoStreamNetwork {
  TwoStreamConfig config;
  std::vector<VolterraLayer> rgb_layers;
  std::vector<VolterraLayer> flow_layers;
  VolterraLayer fusion;    // volterra mode only
  ClassifierHead head;     // fused/concat head, or the rgb head for weighted_average
  ClassifierHead flow_head;  // weighted_average only

  std::size_t rgb_channels() const { return config.rgb.output_shape()[0]; }
  std::size_t flow_channels() const { return config.flow.output_shape()[0]; }
  bool operator==(const TwoStreamNetwork&) const = default;
};

TwoStreamNetwork build_two_stream(const TwoStreamConfig& config, std::uint64_t seed);

// Channel-stacks two equally shaped feature maps: [C_a + C_b, T, H, W].
Tensor stack_channels(const Tensor& a, const Tensor& b);

// Class probabilities for one clip pair, per the configured fusion mode.
std::vector<double> two_stream_forward(const TwoStreamNetwork& net, const Tensor& clip_rgb, const Tensor& clip_flow);

// Output of the fusion layer on given trunk features (volterra mode).
Tensor fuse_features(const TwoStreamNetwork& net, const Tensor& rgb_features, const Tensor& flow_features);

// beta_rgb p_rgb + beta_flow p_flow.
std::vector<double> weighted_average_fusion(std::span<const double> p_rgb, std::span<const double> p_flow,
                                            double beta_rgb, double beta_flow);

// gamma P_maxMI + (1 - gamma) P_minMI over caller-supplied joint
// distributions evaluated per class; building those joints is outside this
// library.
std::vector<double> event_driven_fusion(std::span<const double> p_max_mi, std::span<const double> p_min_mi,
                                        double gamma);

// Feature concatenation: pooled rgb features then pooled flow features.
std::vector<double> feature_concat_forward(std::span<const VolterraLayer> rgb_layers,
                                           std::span<const VolterraLayer> flow_layers, Pooling pooling,
                                           const Tensor& clip_rgb, const Tensor& clip_flow,
                                           const ClassifierHead& head);

struct FusionNorms {
  double rgb = 0.0;     // 1/2 ||W||^2 over the rgb trunk
  double flow = 0.0;
  double fusion = 0.0;
};
FusionNorms fusion_weight_norms(const TwoStreamNetwork& net);

}  // namespace vnn
