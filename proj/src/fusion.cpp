#include "vnn/fusion.hpp"

#include <cmath>
#include <string>

#include "vnn/rng.hpp"

namespace vnn {

void TwoStreamConfig::validate() const {
  try {
    rgb.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("rgb trunk: ") + e.what());
  }
  try {
    flow.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("flow trunk: ") + e.what());
  }
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  switch (mode.kind) {
    case FusionKind::volterra: {
      const Shape r = rgb.output_shape();
      const Shape f = flow.output_shape();
      if (r != f) throw ConfigError("volterra fusion needs identical rgb and flow trunk output shapes");
      const auto& g = fusion_layer.geometry;
      g.validate();
      if (g.in_channels != r[0] + f[0]) {
        throw ConfigError("fusion layer in_channels must be " + std::to_string(r[0] + f[0]) +
                          " (rgb + flow trunk channels)");
      }
      if (g.temporal_mode != TemporalMode::overlapping) throw ConfigError("fusion layer must be overlapping");
      if (fusion_layer.quadratic.kind == QuadraticKind::separable && fusion_layer.quadratic.rank == 0) {
        throw ConfigError("fusion layer separable rank must be >= 1");
      }
      try {
        (void)VolterraLayer{g, Pairing::cross_channel, {}, ExactKernel{}}.output_shape({r[0] + f[0], r[1], r[2], r[3]});
      } catch (const Error& e) {
        throw ConfigError(std::string("fusion layer: ") + e.what());
      }
      break;
    }
    case FusionKind::concat:
      break;
    case FusionKind::weighted_average:
      if (mode.beta_rgb < 0.0 || mode.beta_flow < 0.0 || std::abs(mode.beta_rgb + mode.beta_flow - 1.0) > 1e-9) {
        throw ConfigError("weighted-average betas must be >= 0 and sum to 1");
      }
      break;
  }
}

std::size_t TwoStreamConfig::feature_dim() const {
  const Shape r = rgb.output_shape();
  switch (mode.kind) {
    case FusionKind::volterra: {
      const VolterraLayer probe{fusion_layer.geometry, Pairing::cross_channel, {}, ExactKernel{}};
      return pooled_dim(probe.output_shape({fusion_layer.geometry.in_channels, r[1], r[2], r[3]}), pooling);
    }
    case FusionKind::concat:
      return pooled_dim(r, pooling) + pooled_dim(flow.output_shape(), pooling);
    case FusionKind::weighted_average:
      return pooled_dim(r, pooling);
  }
  return 0;
}

std::size_t TwoStreamConfig::flow_feature_dim() const { return pooled_dim(flow.output_shape(), pooling); }

TwoStreamNetwork build_two_stream(const TwoStreamConfig& config, std::uint64_t seed) {
  config.validate();
  TwoStreamNetwork net;
  net.config = config;
  if (config.mode.kind != FusionKind::volterra) net.config.fusion_layer = LayerSpec{};
  net.rgb_layers = build_trunk(config.rgb, derive_seed(seed, 1));
  net.flow_layers = build_trunk(config.flow, derive_seed(seed, 2));
  if (config.mode.kind == FusionKind::volterra) {
    net.fusion = VolterraLayer::zeros(config.fusion_layer.geometry, config.fusion_layer.quadratic,
                                      Pairing::cross_channel);
    init_layer(net.fusion, derive_seed(seed, 3));
  } else {
    net.fusion = VolterraLayer{};
    net.fusion.quad = ExactKernel{};
  }
  net.head = ClassifierHead::zeros(config.num_classes, config.feature_dim());
  init_head(net.head, derive_seed(seed, 4));
  if (config.mode.kind == FusionKind::weighted_average) {
    net.flow_head = ClassifierHead::zeros(config.num_classes, config.flow_feature_dim());
    init_head(net.flow_head, derive_seed(seed, 5));
  }
  return net;
}

Tensor stack_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 4 || sb.size() != 4 || sa[1] != sb[1] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ConfigError("trunk feature shapes differ; cannot stack streams");
  }
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor({sa[0] + sb[0], sa[1], sa[2], sa[3]}, std::move(data));
}

Tensor fuse_features(const TwoStreamNetwork& net, const Tensor& rgb_features, const Tensor& flow_features) {
  if (net.config.mode.kind != FusionKind::volterra) throw ConfigError("network does not use volterra fusion");
  return forward(net.fusion, stack_channels(rgb_features, flow_features));
}

std::vector<double> weighted_average_fusion(std::span<const double> p_rgb, std::span<const double> p_flow,
                                            double beta_rgb, double beta_flow) {
  if (beta_rgb < 0.0 || beta_flow < 0.0 || std::abs(beta_rgb + beta_flow - 1.0) > 1e-9) {
    throw DomainError("fusion weights must be >= 0 and sum to 1");
  }
  if (p_rgb.size() != p_flow.size()) throw ShapeError("probability vectors differ in length");
  std::vector<double> p(p_rgb.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = beta_rgb * p_rgb[i] + beta_flow * p_flow[i];
  return p;
}

std::vector<double> event_driven_fusion(std::span<const double> p_max_mi, std::span<const double> p_min_mi,
                                        double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0, 1]");
  if (p_max_mi.size() != p_min_mi.size()) throw ShapeError("joint distributions differ in length");
  std::vector<double> p(p_max_mi.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = gamma * p_max_mi[i] + (1.0 - gamma) * p_min_mi[i];
  return p;
}

std::vector<double> feature_concat_forward(std::span<const VolterraLayer> rgb_layers,
                                           std::span<const VolterraLayer> flow_layers, Pooling pooling,
                                           const Tensor& clip_rgb, const Tensor& clip_flow,
                                           const ClassifierHead& head) {
  auto features = pool_features(forward_trunk(rgb_layers, clip_rgb).output, pooling);
  const auto flow = pool_features(forward_trunk(flow_layers, clip_flow).output, pooling);
  features.insert(features.end(), flow.begin(), flow.end());
  if (features.size() != head.dim) {
    throw ConfigError("concat head expects " + std::to_string(head.dim) + " features, trunks give " +
                      std::to_string(features.size()));
  }
  return class_probabilities(head, features);
}

std::vector<double> two_stream_forward(const TwoStreamNetwork& net, const Tensor& clip_rgb, const Tensor& clip_flow) {
  const auto& cfg = net.config;
  if (clip_rgb.shape() != cfg.rgb.input_shape) throw ShapeError("rgb clip shape does not match network input");
  if (clip_flow.shape() != cfg.flow.input_shape) throw ShapeError("flow clip shape does not match network input");
  switch (cfg.mode.kind) {
    case FusionKind::volterra: {
      const Tensor r = forward_trunk(net.rgb_layers, clip_rgb).output;
      const Tensor f = forward_trunk(net.flow_layers, clip_flow).output;
      return class_probabilities(net.head, pool_features(fuse_features(net, r, f), cfg.pooling));
    }
    case FusionKind::concat:
      return feature_concat_forward(net.rgb_layers, net.flow_layers, cfg.pooling, clip_rgb, clip_flow, net.head);
    case FusionKind::weighted_average: {
      const auto pr = class_probabilities(net.head, pool_features(forward_trunk(net.rgb_layers, clip_rgb).output, cfg.pooling));
      const auto pf =
          class_probabilities(net.flow_head, pool_features(forward_trunk(net.flow_layers, clip_flow).output, cfg.pooling));
      return weighted_average_fusion(pr, pf, cfg.mode.beta_rgb, cfg.mode.beta_flow);
    }
  }
  return {};
}

namespace {

double half_sq(const std::vector<VolterraLayer>& layers) {
  double s = 0.0;
  for (const auto& layer : layers) s += squared_l2(layer);
  return 0.5 * s;
}

}  // namespace

FusionNorms fusion_weight_norms(const TwoStreamNetwork& net) {
  FusionNorms n;
  n.rgb = half_sq(net.rgb_layers);
  n.flow = half_sq(net.flow_layers);
  if (net.config.mode.kind == FusionKind::volterra) n.fusion = half_sq({net.fusion});
  return n;
}

}  // namespace vnn
