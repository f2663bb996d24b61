#include "vnn/model.hpp"

#include <string>
#include <type_traits>

namespace vnn {
namespace {

template <class T, class Layer>
void layer_groups(Layer& layer, const std::string& prefix, std::vector<BasicParamGroup<T>>& out) {
  const auto& g = layer.geometry;
  const std::size_t groups = layer.group_count();
  const std::size_t m = layer.group_length();
  out.push_back({prefix + "w1", std::span<T>(layer.w1), true, {g.out_channels, g.in_channels, g.window_size()}});
  if (auto* sep = std::get_if<SeparableKernel>(&layer.quad)) {
    const Shape shape{g.out_channels, groups, sep->rank, m};
    out.push_back({prefix + "a", std::span<T>(sep->a), true, shape});
    out.push_back({prefix + "b", std::span<T>(sep->b), true, shape});
  } else {
    out.push_back({prefix + "w2", std::span<T>(std::get<ExactKernel>(layer.quad).w2), true,
                   {g.out_channels, groups, m, m}});
  }
}

template <class T, class Layers>
void trunk_groups(Layers& layers, const std::string& prefix, std::vector<BasicParamGroup<T>>& out) {
  for (std::size_t z = 0; z < layers.size(); ++z) {
    layer_groups<T>(layers[z], prefix + "layer" + std::to_string(z) + ".", out);
  }
}

template <class T, class Head>
void head_groups(Head& head, const std::string& prefix, std::vector<BasicParamGroup<T>>& out) {
  out.push_back({prefix + "weights", std::span<T>(head.weights), true, {head.classes, head.dim}});
  out.push_back({prefix + "biases", std::span<T>(head.biases), false, {head.classes}});
}

template <class T, class M>
std::vector<BasicParamGroup<T>> groups_of(M& model) {
  std::vector<BasicParamGroup<T>> out;
  std::visit(
      [&out](auto& net) {
        using Net = std::remove_cvref_t<decltype(net)>;
        if constexpr (std::is_same_v<Net, CascadeNetwork>) {
          trunk_groups<T>(net.layers, "", out);
          head_groups<T>(net.head, "head.", out);
        } else {
          trunk_groups<T>(net.rgb_layers, "rgb.", out);
          trunk_groups<T>(net.flow_layers, "flow.", out);
          if (net.config.mode.kind == FusionKind::volterra) layer_groups<T>(net.fusion, "fusion.", out);
          if (net.config.mode.kind == FusionKind::weighted_average) {
            head_groups<T>(net.head, "head_rgb.", out);
            head_groups<T>(net.flow_head, "head_flow.", out);
          } else {
            head_groups<T>(net.head, "head.", out);
          }
        }
      },
      model);
  return out;
}

void append_layer(std::vector<std::vector<double>>& out, LayerGradients& g) {
  out.push_back(std::move(g.w1));
  if (auto* sep = std::get_if<SeparableKernel>(&g.quad)) {
    out.push_back(std::move(sep->a));
    out.push_back(std::move(sep->b));
  } else {
    out.push_back(std::move(std::get<ExactKernel>(g.quad).w2));
  }
}

void append_trunk(std::vector<std::vector<double>>& out, std::vector<LayerGradients>& grads) {
  for (auto& g : grads) append_layer(out, g);
}

void append_head(std::vector<std::vector<double>>& out, HeadGradients& g) {
  out.push_back(std::move(g.weights));
  out.push_back(std::move(g.biases));
}

const Tensor& flow_of(const Sample& s) {
  if (!s.flow) throw ShapeError("sample '" + s.id + "' has no flow stream");
  return *s.flow;
}

void check_input(const Tensor& clip, const Shape& expected, const char* stream) {
  if (clip.shape() != expected) throw ShapeError(std::string(stream) + " clip shape does not match network input");
}

SampleGradients cascade_gradients(const CascadeNetwork& net, const Sample& s) {
  check_input(s.rgb, net.config.trunk.input_shape, "rgb");
  const auto trace = forward_trunk(net.layers, s.rgb);
  const auto features = pool_features(trace.output, net.config.pooling);
  SampleGradients out;
  out.probabilities = class_probabilities(net.head, features);
  out.loss = cross_entropy(out.probabilities, s.label);
  auto hg = head_and_feature_grads(net.head, features, out.probabilities, s.label);
  const Tensor g = pool_adjoint(hg.features, trace.output.shape(), net.config.pooling);
  auto lg = backward_trunk(net.layers, trace, g);
  append_trunk(out.groups, lg);
  append_head(out.groups, hg);
  return out;
}

// Splits a channel-stacked gradient back into its two streams.
std::pair<Tensor, Tensor> split_channels(const Tensor& t, std::size_t first) {
  const Shape& s = t.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  const auto data = t.data();
  Tensor a({first, s[1], s[2], s[3]}, {data.begin(), data.begin() + first * per});
  Tensor b({s[0] - first, s[1], s[2], s[3]}, {data.begin() + first * per, data.end()});
  return {std::move(a), std::move(b)};
}

SampleGradients two_stream_gradients(const TwoStreamNetwork& net, const Sample& s) {
  const auto& cfg = net.config;
  check_input(s.rgb, cfg.rgb.input_shape, "rgb");
  check_input(flow_of(s), cfg.flow.input_shape, "flow");
  const auto tr = forward_trunk(net.rgb_layers, s.rgb);
  const auto tf = forward_trunk(net.flow_layers, *s.flow);
  SampleGradients out;
  std::vector<LayerGradients> gr, gf;

  switch (cfg.mode.kind) {
    case FusionKind::volterra: {
      const Tensor stacked = stack_channels(tr.output, tf.output);
      const Tensor fused = forward(net.fusion, stacked);
      const auto features = pool_features(fused, cfg.pooling);
      out.probabilities = class_probabilities(net.head, features);
      out.loss = cross_entropy(out.probabilities, s.label);
      auto hg = head_and_feature_grads(net.head, features, out.probabilities, s.label);
      auto fg = backward(net.fusion, stacked, pool_adjoint(hg.features, fused.shape(), cfg.pooling));
      auto [g_rgb, g_flow] = split_channels(fg.input, tr.output.extent(0));
      fg.input = Tensor();
      gr = backward_trunk(net.rgb_layers, tr, g_rgb);
      gf = backward_trunk(net.flow_layers, tf, g_flow);
      append_trunk(out.groups, gr);
      append_trunk(out.groups, gf);
      append_layer(out.groups, fg);
      append_head(out.groups, hg);
      break;
    }
    case FusionKind::concat: {
      auto features = pool_features(tr.output, cfg.pooling);
      const std::size_t d_rgb = features.size();
      const auto ff = pool_features(tf.output, cfg.pooling);
      features.insert(features.end(), ff.begin(), ff.end());
      if (features.size() != net.head.dim) throw ConfigError("concat head dimension mismatch");
      out.probabilities = class_probabilities(net.head, features);
      out.loss = cross_entropy(out.probabilities, s.label);
      auto hg = head_and_feature_grads(net.head, features, out.probabilities, s.label);
      const std::span<const double> gfeat(hg.features);
      gr = backward_trunk(net.rgb_layers, tr, pool_adjoint(gfeat.first(d_rgb), tr.output.shape(), cfg.pooling));
      gf = backward_trunk(net.flow_layers, tf, pool_adjoint(gfeat.subspan(d_rgb), tf.output.shape(), cfg.pooling));
      append_trunk(out.groups, gr);
      append_trunk(out.groups, gf);
      append_head(out.groups, hg);
      break;
    }
    case FusionKind::weighted_average: {
      // Decision-level fusion: each stream is trained on its own decision.
      const auto fr = pool_features(tr.output, cfg.pooling);
      const auto ff = pool_features(tf.output, cfg.pooling);
      const auto pr = class_probabilities(net.head, fr);
      const auto pf = class_probabilities(net.flow_head, ff);
      out.probabilities = weighted_average_fusion(pr, pf, cfg.mode.beta_rgb, cfg.mode.beta_flow);
      out.loss = cross_entropy(pr, s.label) + cross_entropy(pf, s.label);
      auto hr = head_and_feature_grads(net.head, fr, pr, s.label);
      auto hf = head_and_feature_grads(net.flow_head, ff, pf, s.label);
      gr = backward_trunk(net.rgb_layers, tr, pool_adjoint(hr.features, tr.output.shape(), cfg.pooling));
      gf = backward_trunk(net.flow_layers, tf, pool_adjoint(hf.features, tf.output.shape(), cfg.pooling));
      append_trunk(out.groups, gr);
      append_trunk(out.groups, gf);
      append_head(out.groups, hr);
      append_head(out.groups, hf);
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<ParamGroup> parameter_groups(Model& model) { return groups_of<double>(model); }
std::vector<ConstParamGroup> parameter_groups(const Model& model) { return groups_of<const double>(model); }

std::uint64_t census(const Model& model) {
  std::uint64_t n = 0;
  for (const auto& g : parameter_groups(model)) n += g.values.size();
  return n;
}

std::size_t num_classes(const Model& model) {
  return std::visit([](const auto& net) { return net.config.num_classes; }, model);
}

bool needs_flow(const Model& model) { return std::holds_alternative<TwoStreamNetwork>(model); }

std::vector<double> predict(const Model& model, const Sample& sample) {
  if (const auto* net = std::get_if<CascadeNetwork>(&model)) {
    check_input(sample.rgb, net->config.trunk.input_shape, "rgb");
    return class_probabilities(net->head, pool_features(forward_cascade(*net, sample.rgb), net->config.pooling));
  }
  return two_stream_forward(std::get<TwoStreamNetwork>(model), sample.rgb, flow_of(sample));
}

SampleGradients sample_gradients(const Model& model, const Sample& sample) {
  if (const auto* net = std::get_if<CascadeNetwork>(&model)) return cascade_gradients(*net, sample);
  return two_stream_gradients(std::get<TwoStreamNetwork>(model), sample);
}

double sample_loss(const Model& model, const Sample& sample) {
  if (const auto* ts = std::get_if<TwoStreamNetwork>(&model);
      ts && ts->config.mode.kind == FusionKind::weighted_average) {
    const auto& cfg = ts->config;
    check_input(sample.rgb, cfg.rgb.input_shape, "rgb");
    check_input(flow_of(sample), cfg.flow.input_shape, "flow");
    const auto pr =
        class_probabilities(ts->head, pool_features(forward_trunk(ts->rgb_layers, sample.rgb).output, cfg.pooling));
    const auto pf = class_probabilities(
        ts->flow_head, pool_features(forward_trunk(ts->flow_layers, *sample.flow).output, cfg.pooling));
    return cross_entropy(pr, sample.label) + cross_entropy(pf, sample.label);
  }
  return cross_entropy(predict(model, sample), sample.label);
}

double decay_term(const Model& model) {
  double s = 0.0;
  for (const auto& g : parameter_groups(model)) {
    if (!g.decayed) continue;
    for (double v : g.values) s += v * v;
  }
  return 0.5 * s;
}

double regularized_objective(const Model& model, std::span<const Sample> batch, double lambda) {
  if (batch.empty()) throw DomainError("objective needs a nonempty batch");
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  double ce = 0.0;
  for (const auto& s : batch) ce += sample_loss(model, s);
  return ce / static_cast<double>(batch.size()) + lambda * decay_term(model);
}

}  // namespace vnn
