#include "vnn/cascade.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vnn/rng.hpp"

namespace vnn {

void TrunkConfig::validate() const { (void)shape_chain(); }

std::vector<Shape> TrunkConfig::shape_chain() const {
  if (input_shape.size() != 4) throw ConfigError("input_shape must be [C, T, H, W]");
  for (auto e : input_shape) {
    if (e == 0) throw ConfigError("input_shape extents must be >= 1");
  }
  if (layers.empty()) throw ConfigError("cascade needs at least one layer");
  std::vector<Shape> chain{input_shape};
  for (std::size_t z = 0; z < layers.size(); ++z) {
    const auto& g = layers[z].geometry;
    const Shape& in = chain.back();
    const std::string where = "layer " + std::to_string(z) + ": ";
    try {
      g.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    if (g.in_channels != in[0]) {
      throw ConfigError(where + "expects " + std::to_string(g.in_channels) + " input channels but receives " +
                        std::to_string(in[0]));
    }
    if (layers[z].quadratic.kind == QuadraticKind::separable && layers[z].quadratic.rank == 0) {
      throw ConfigError(where + "separable rank must be >= 1");
    }
    if (g.temporal_mode == TemporalMode::non_overlapping && in[1] % g.len_t != 0) {
      throw ConfigError(where + "len_t " + std::to_string(g.len_t) + " does not divide temporal extent " +
                        std::to_string(in[1]));
    }
    Shape out;
    try {
      out = VolterraLayer{g, Pairing::within_channel, {}, ExactKernel{}}.output_shape(in);
    } catch (const Error& e) {
      throw ConfigError(where + e.what());
    }
    if (g.temporal_mode == TemporalMode::non_overlapping) out[1] = in[1] / g.len_t;
    chain.push_back(out);
  }
  return chain;
}

void CascadeConfig::validate() const {
  trunk.validate();
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
}

std::size_t CascadeConfig::feature_dim() const { return pooled_dim(trunk.output_shape(), pooling); }

void init_layer(VolterraLayer& layer, std::uint64_t seed) {
  Rng rng(seed);
  const double nw = static_cast<double>(layer.window_size());
  const double m = static_cast<double>(layer.group_length());
  const double s_lin = 1.0 / nw;
  const double s_quad = 1.0 / (m * m);
  rng.fill_uniform(layer.w1, -s_lin, s_lin);
  if (auto* sep = std::get_if<SeparableKernel>(&layer.quad)) {
    rng.fill_uniform(sep->a, -s_quad, s_quad);
    rng.fill_uniform(sep->b, -s_quad, s_quad);
  } else {
    rng.fill_uniform(std::get<ExactKernel>(layer.quad).w2, -s_quad, s_quad);
  }
}

void init_head(ClassifierHead& head, std::uint64_t seed) {
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(head.dim));
  rng.fill_uniform(head.weights, -s, s);
  std::fill(head.biases.begin(), head.biases.end(), 0.0);
}

std::vector<VolterraLayer> build_trunk(const TrunkConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<VolterraLayer> layers;
  for (std::size_t z = 0; z < config.layers.size(); ++z) {
    auto layer = VolterraLayer::zeros(config.layers[z].geometry, config.layers[z].quadratic);
    init_layer(layer, derive_seed(seed, z));
    layers.push_back(std::move(layer));
  }
  return layers;
}

CascadeNetwork build(const CascadeConfig& config, std::uint64_t seed) {
  config.validate();
  CascadeNetwork net;
  net.config = config;
  net.layers = build_trunk(config.trunk, seed);
  net.head = ClassifierHead::zeros(config.num_classes, config.feature_dim());
  init_head(net.head, derive_seed(seed, 1000));
  return net;
}

Tensor restride(const Tensor& y, std::size_t len_t, std::size_t out_frames) {
  const Shape& s = y.shape();
  Tensor out = Tensor::zeros({s[0], out_frames, s[2], s[3]});
  const std::size_t frame = s[2] * s[3];
  for (std::size_t c = 0; c < s[0]; ++c) {
    for (std::size_t k = 0; k < out_frames; ++k) {
      const auto src = y.data().subspan((c * s[1] + k * len_t) * frame, frame);
      std::copy(src.begin(), src.end(), out.data().begin() + (c * out_frames + k) * frame);
    }
  }
  return out;
}

Tensor restride_adjoint(const Tensor& grad, std::size_t len_t, const Shape& full) {
  const Shape& s = grad.shape();
  Tensor out = Tensor::zeros(full);
  const std::size_t frame = s[2] * s[3];
  for (std::size_t c = 0; c < s[0]; ++c) {
    for (std::size_t k = 0; k < s[1]; ++k) {
      const auto src = grad.data().subspan((c * s[1] + k) * frame, frame);
      std::copy(src.begin(), src.end(), out.data().begin() + (c * full[1] + k * len_t) * frame);
    }
  }
  return out;
}

TrunkTrace forward_trunk(std::span<const VolterraLayer> layers, const Tensor& clip) {
  TrunkTrace trace;
  Tensor x = clip;
  for (const auto& layer : layers) {
    Tensor y = forward(layer, x);
    const auto& g = layer.geometry;
    if (g.temporal_mode == TemporalMode::non_overlapping) {
      if (x.extent(1) % g.len_t != 0) throw GeometryError("len_t does not divide temporal extent");
      y = restride(y, g.len_t, x.extent(1) / g.len_t);
    }
    trace.inputs.push_back(std::move(x));
    x = std::move(y);
  }
  trace.output = std::move(x);
  return trace;
}

std::vector<LayerGradients> backward_trunk(std::span<const VolterraLayer> layers, const TrunkTrace& trace,
                                           const Tensor& grad_output, Tensor* grad_clip) {
  std::vector<LayerGradients> grads(layers.size());
  Tensor g = grad_output;
  for (std::size_t z = layers.size(); z-- > 0;) {
    const auto& layer = layers[z];
    const auto& geo = layer.geometry;
    if (geo.temporal_mode == TemporalMode::non_overlapping) {
      g = restride_adjoint(g, geo.len_t, layer.output_shape(trace.inputs[z].shape()));
    }
    const bool need_input = z > 0 || grad_clip != nullptr;
    grads[z] = backward(layer, trace.inputs[z], g, need_input);
    if (need_input) g = std::move(grads[z].input);
    grads[z].input = Tensor();
  }
  if (grad_clip) *grad_clip = std::move(g);
  return grads;
}

Tensor forward_cascade(const CascadeNetwork& net, const Tensor& clip) {
  if (clip.shape() != net.config.trunk.input_shape) throw ShapeError("clip shape does not match network input");
  return forward_trunk(net.layers, clip).output;
}

std::size_t pooled_dim(const Shape& s, Pooling pooling) {
  return pooling == Pooling::flatten ? shape_size(s) : s[0] * s[1];
}

std::vector<double> pool_features(const Tensor& f, Pooling pooling) {
  if (pooling == Pooling::flatten) return {f.data().begin(), f.data().end()};
  const Shape& s = f.shape();
  const std::size_t frame = s[2] * s[3];
  std::vector<double> out(s[0] * s[1], 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sum = 0.0;
    for (double v : f.data().subspan(i * frame, frame)) sum += v;
    out[i] = sum / static_cast<double>(frame);
  }
  return out;
}

Tensor pool_adjoint(std::span<const double> grad, const Shape& s, Pooling pooling) {
  if (grad.size() != pooled_dim(s, pooling)) throw ShapeError("pooled gradient size mismatch");
  if (pooling == Pooling::flatten) return Tensor(s, {grad.begin(), grad.end()});
  Tensor out = Tensor::zeros(s);
  const std::size_t frame = s[2] * s[3];
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double v = grad[i] / static_cast<double>(frame);
    for (auto& x : out.data().subspan(i * frame, frame)) x = v;
  }
  return out;
}

std::uint64_t layer_param_count(const LayerGeometry& g, const QuadraticSpec& q, Pairing pairing) {
  const std::uint64_t nw = g.window_size();
  const std::uint64_t in = g.in_channels;
  const std::uint64_t out = g.out_channels;
  if (pairing == Pairing::within_channel) {
    const std::uint64_t per_pair = q.kind == QuadraticKind::exact ? nw + nw * nw : nw + 2 * q.rank * nw;
    return in * out * per_pair;
  }
  const std::uint64_t m = in * nw;
  return out * (q.kind == QuadraticKind::exact ? m + m * m : m + 2 * q.rank * m);
}

std::uint64_t monolithic_param_count(std::uint64_t window, std::uint64_t order, bool* saturated) {
  constexpr auto max = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  std::uint64_t power = 1;
  bool sat = false;
  for (std::uint64_t k = 1; k <= order && !sat; ++k) {
    if (power > max / window) {
      sat = true;
      break;
    }
    power *= window;
    if (total > max - power) {
      sat = true;
      break;
    }
    total += power;
  }
  if (saturated) *saturated = sat;
  return sat ? max : total;
}

ParamCount param_count(const CascadeConfig& config) {
  config.validate();
  ParamCount pc;
  std::uint64_t rt = 1, jump = 1, rh = 1, rw = 1;
  for (const auto& spec : config.trunk.layers) {
    const auto n = layer_param_count(spec.geometry, spec.quadratic);
    pc.per_layer.push_back(n);
    pc.total += n;
    rt += (spec.geometry.len_t - 1) * jump;
    if (spec.geometry.temporal_mode == TemporalMode::non_overlapping) jump *= spec.geometry.len_t;
    rh += 2 * spec.geometry.half_h;
    rw += 2 * spec.geometry.half_w;
  }
  const std::uint64_t dim = config.feature_dim();
  pc.head = config.num_classes * dim + config.num_classes;
  pc.full_kth_order = order_report(config.trunk.layers.size()).degree_bound;
  pc.full_kth_window = rt * rh * rw;
  pc.full_kth_equiv = monolithic_param_count(pc.full_kth_window, pc.full_kth_order, &pc.full_kth_saturated);
  return pc;
}

std::uint64_t census(const CascadeNetwork& net) {
  std::uint64_t n = net.head.weights.size() + net.head.biases.size();
  for (const auto& layer : net.layers) n += layer.parameter_count();
  return n;
}

OrderReport order_report(std::size_t z) {
  OrderReport r;
  r.layers = z;
  if (z == 0) return r;
  r.degree_bound = z < 64 ? (std::uint64_t{1} << z) : 0;
  // 2^(2^(Z-1)) fits in 64 bits up to Z = 6 (2^32); Z = 7 would be 2^64.
  const std::uint64_t exponent = z - 1 < 63 ? (std::uint64_t{1} << (z - 1)) : 64;
  if (exponent < 64) r.nominal_order = std::uint64_t{1} << exponent;
  return r;
}

StabilityReport stability_report(std::span<const VolterraLayer> layers, double input_bound) {
  if (!(input_bound >= 0.0)) throw DomainError("input bound A must be >= 0");
  StabilityReport report;
  report.input_bound = input_bound;
  double a = input_bound;
  for (const auto& layer : layers) {
    const auto n = l1_norms(layer);
    a = output_bound(n, a);
    report.layers.push_back({n.linear_l1, n.quad_l1, a});
    report.finite = report.finite && std::isfinite(a);
  }
  report.end_to_end = a;
  return report;
}

StabilityReport stability_report(const CascadeNetwork& net, double input_bound) {
  return stability_report(net.layers, input_bound);
}

}  // namespace vnn
