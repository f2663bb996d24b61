#include "vnn/layer.hpp"

#include <cmath>
#include <string>

#include "vnn/simd/kernels.hpp"

namespace vnn {

void LayerGeometry::validate() const {
  if (len_t == 0) throw ConfigError("layer len_t must be >= 1");
  if (in_channels == 0 || out_channels == 0) throw ConfigError("layer channels must be >= 1");
}

std::size_t VolterraLayer::group_count() const noexcept {
  return pairing == Pairing::within_channel ? geometry.in_channels : 1;
}

std::size_t VolterraLayer::group_length() const noexcept {
  return pairing == Pairing::within_channel ? window_size() : window_size() * geometry.in_channels;
}

QuadraticSpec VolterraLayer::quadratic_spec() const {
  if (const auto* s = std::get_if<SeparableKernel>(&quad)) return {QuadraticKind::separable, s->rank};
  return {QuadraticKind::exact, 1};
}

std::size_t VolterraLayer::parameter_count() const noexcept {
  std::size_t n = w1.size();
  if (const auto* s = std::get_if<SeparableKernel>(&quad)) {
    n += s->a.size() + s->b.size();
  } else {
    n += std::get<ExactKernel>(quad).w2.size();
  }
  return n;
}

VolterraLayer VolterraLayer::zeros(const LayerGeometry& geometry, const QuadraticSpec& spec, Pairing pairing) {
  geometry.validate();
  VolterraLayer layer;
  layer.geometry = geometry;
  layer.pairing = pairing;
  const std::size_t out = geometry.out_channels;
  layer.w1.assign(out * geometry.in_channels * geometry.window_size(), 0.0);
  const std::size_t groups = layer.group_count();
  const std::size_t m = layer.group_length();
  if (spec.kind == QuadraticKind::separable) {
    if (spec.rank == 0) throw ConfigError("separable rank Q must be >= 1");
    SeparableKernel sep;
    sep.rank = spec.rank;
    sep.a.assign(out * groups * spec.rank * m, 0.0);
    sep.b.assign(out * groups * spec.rank * m, 0.0);
    layer.quad = std::move(sep);
  } else {
    layer.quad = ExactKernel{std::vector<double>(out * groups * m * m, 0.0)};
  }
  return layer;
}

Shape VolterraLayer::output_shape(const Shape& in) const {
  const auto& g = geometry;
  if (in.size() != 4) throw ShapeError("layer input must be [C, T, H, W]");
  if (in[0] != g.in_channels) {
    throw ShapeError("layer expects " + std::to_string(g.in_channels) + " input channels, got " +
                     std::to_string(in[0]));
  }
  if (in[1] < g.len_t) {
    throw GeometryError("temporal extent " + std::to_string(in[1]) + " shorter than len_t " +
                        std::to_string(g.len_t));
  }
  std::size_t h = in[2];
  std::size_t w = in[3];
  if (g.padding == Padding::valid) {
    if (h < g.taps_h() || w < g.taps_w()) {
      throw GeometryError("frame " + std::to_string(h) + "x" + std::to_string(w) + " smaller than window " +
                          std::to_string(g.taps_h()) + "x" + std::to_string(g.taps_w()));
    }
    h -= 2 * g.half_h;
    w -= 2 * g.half_w;
  }
  return {g.out_channels, in[1] - g.len_t + 1, h, w};
}

std::vector<WeightBlock> weight_blocks(VolterraLayer& layer) {
  std::vector<WeightBlock> blocks{{"w1", layer.w1}};
  if (auto* s = std::get_if<SeparableKernel>(&layer.quad)) {
    blocks.push_back({"a", s->a});
    blocks.push_back({"b", s->b});
  } else {
    blocks.push_back({"w2", std::get<ExactKernel>(layer.quad).w2});
  }
  return blocks;
}

double squared_l2(const VolterraLayer& layer) {
  double s = 0.0;
  auto add = [&s](const std::vector<double>& v) {
    for (double x : v) s += x * x;
  };
  add(layer.w1);
  if (const auto* sep = std::get_if<SeparableKernel>(&layer.quad)) {
    add(sep->a);
    add(sep->b);
  } else {
    add(std::get<ExactKernel>(layer.quad).w2);
  }
  return s;
}

namespace {

// Maps one output position to the flat input offsets of every tap, with
// -1 marking zero-padded reads. Layout [in][tau][s1][s2].
class PatchIndex {
 public:
  PatchIndex(const LayerGeometry& g, const Shape& in) : g_(g), in_(in) {
    offsets_.resize(g.in_channels * g.window_size());
  }

  std::span<const std::ptrdiff_t> at(std::size_t t, std::size_t h, std::size_t w) {
    const auto& g = g_;
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(in_[2]);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(in_[3]);
    const std::size_t frame = in_[2] * in_[3];
    const std::size_t channel = in_[1] * frame;
    const std::ptrdiff_t ch = static_cast<std::ptrdiff_t>(h + (g.padding == Padding::valid ? g.half_h : 0));
    const std::ptrdiff_t cw = static_cast<std::ptrdiff_t>(w + (g.padding == Padding::valid ? g.half_w : 0));
    const std::ptrdiff_t ph = static_cast<std::ptrdiff_t>(g.half_h);
    const std::ptrdiff_t pw = static_cast<std::ptrdiff_t>(g.half_w);
    std::size_t k = 0;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      for (std::size_t tau = 0; tau < g.len_t; ++tau) {
        const std::size_t base = c * channel + (t + g.len_t - 1 - tau) * frame;
        for (std::ptrdiff_t s1 = -ph; s1 <= ph; ++s1) {
          const std::ptrdiff_t y = ch - s1;
          for (std::ptrdiff_t s2 = -pw; s2 <= pw; ++s2) {
            const std::ptrdiff_t x = cw - s2;
            offsets_[k++] = (y < 0 || y >= H || x < 0 || x >= W)
                                ? -1
                                : static_cast<std::ptrdiff_t>(base) + y * W + x;
          }
        }
      }
    }
    return offsets_;
  }

 private:
  const LayerGeometry& g_;
  const Shape& in_;
  std::vector<std::ptrdiff_t> offsets_;
};

void gather(std::span<const std::ptrdiff_t> offsets, std::span<const double> src, std::span<double> patch) {
  for (std::size_t k = 0; k < offsets.size(); ++k) patch[k] = offsets[k] < 0 ? 0.0 : src[offsets[k]];
}

void scatter_add(std::span<const std::ptrdiff_t> offsets, std::span<const double> patch, std::span<double> dst) {
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    if (offsets[k] >= 0) dst[offsets[k]] += patch[k];
  }
}

Tensor evaluate(const VolterraLayer& layer, const Tensor& input, bool separable) {
  const Shape out_shape = layer.output_shape(input.shape());
  Tensor out = Tensor::zeros(out_shape);
  const auto& k = simd::active();
  const std::size_t outs = out_shape[0];
  const std::size_t positions = out_shape[1] * out_shape[2] * out_shape[3];
  const std::size_t patch_len = layer.geometry.in_channels * layer.window_size();
  const std::size_t groups = layer.group_count();
  const std::size_t m = layer.group_length();
  std::vector<double> patch(patch_len);
  PatchIndex index(layer.geometry, input.shape());
  const auto src = input.data();
  auto dst = out.data();

  const auto* sep = std::get_if<SeparableKernel>(&layer.quad);
  const auto* exact = std::get_if<ExactKernel>(&layer.quad);
  std::size_t p = 0;
  for (std::size_t t = 0; t < out_shape[1]; ++t) {
    for (std::size_t h = 0; h < out_shape[2]; ++h) {
      for (std::size_t w = 0; w < out_shape[3]; ++w, ++p) {
        gather(index.at(t, h, w), src, patch);
        for (std::size_t o = 0; o < outs; ++o) {
          double y = k.dot(layer.w1.data() + o * patch_len, patch.data(), patch_len);
          for (std::size_t g = 0; g < groups; ++g) {
            const double* x = patch.data() + g * m;
            if (separable) {
              for (std::size_t q = 0; q < sep->rank; ++q) {
                const std::size_t off = ((o * groups + g) * sep->rank + q) * m;
                y += k.dot(sep->a.data() + off, x, m) * k.dot(sep->b.data() + off, x, m);
              }
            } else {
              y += k.quad_form(exact->w2.data() + (o * groups + g) * m * m, x, m);
            }
          }
          dst[o * positions + p] = y;
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor forward(const VolterraLayer& layer, const Tensor& input) {
  return evaluate(layer, input, layer.is_separable());
}

Tensor forward_separable(const VolterraLayer& layer, const Tensor& input) {
  if (!layer.is_separable()) throw ConfigError("forward_separable requires a separable layer");
  return evaluate(layer, input, true);
}

ExactKernel assemble_exact(const SeparableKernel& sep, std::size_t blocks, std::size_t m) {
  if (sep.a.size() != blocks * sep.rank * m || sep.b.size() != sep.a.size()) {
    throw ShapeError("separable factors do not match block layout");
  }
  const auto& k = simd::scalar_table();
  ExactKernel out{std::vector<double>(blocks * m * m, 0.0)};
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    for (std::size_t q = 0; q < sep.rank; ++q) {
      const std::size_t off = (blk * sep.rank + q) * m;
      k.ger(1.0, sep.a.data() + off, sep.b.data() + off, out.w2.data() + blk * m * m, m, m);
    }
  }
  return out;
}

VolterraLayer assemble_exact(const VolterraLayer& layer) {
  const auto* sep = std::get_if<SeparableKernel>(&layer.quad);
  if (!sep) return layer;
  VolterraLayer out = layer;
  out.quad = assemble_exact(*sep, layer.geometry.out_channels * layer.group_count(), layer.group_length());
  return out;
}

LayerGradients backward(const VolterraLayer& layer, const Tensor& input, const Tensor& upstream,
                        bool want_input_grad) {
  const Shape out_shape = layer.output_shape(input.shape());
  if (upstream.shape() != out_shape) throw ShapeError("upstream gradient shape does not match layer output");
  const auto& k = simd::active();
  const std::size_t outs = out_shape[0];
  const std::size_t positions = out_shape[1] * out_shape[2] * out_shape[3];
  const std::size_t patch_len = layer.geometry.in_channels * layer.window_size();
  const std::size_t groups = layer.group_count();
  const std::size_t m = layer.group_length();

  LayerGradients grads;
  grads.w1.assign(layer.w1.size(), 0.0);
  const auto* sep = std::get_if<SeparableKernel>(&layer.quad);
  const auto* exact = std::get_if<ExactKernel>(&layer.quad);
  SeparableKernel* gsep = nullptr;
  ExactKernel* gexact = nullptr;
  if (sep) {
    grads.quad = SeparableKernel{sep->rank, std::vector<double>(sep->a.size(), 0.0),
                                 std::vector<double>(sep->b.size(), 0.0)};
    gsep = &std::get<SeparableKernel>(grads.quad);
  } else {
    grads.quad = ExactKernel{std::vector<double>(exact->w2.size(), 0.0)};
    gexact = &std::get<ExactKernel>(grads.quad);
  }
  if (want_input_grad) grads.input = Tensor::zeros(input.shape());

  std::vector<double> patch(patch_len);
  std::vector<double> gpatch(patch_len);
  std::vector<double> tmp(m);
  PatchIndex index(layer.geometry, input.shape());
  const auto src = input.data();
  const auto up = upstream.data();

  std::size_t p = 0;
  for (std::size_t t = 0; t < out_shape[1]; ++t) {
    for (std::size_t h = 0; h < out_shape[2]; ++h) {
      for (std::size_t w = 0; w < out_shape[3]; ++w, ++p) {
        bool any = false;
        for (std::size_t o = 0; o < outs; ++o) any = any || up[o * positions + p] != 0.0;
        if (!any) continue;
        const auto offsets = index.at(t, h, w);
        gather(offsets, src, patch);
        if (want_input_grad) std::fill(gpatch.begin(), gpatch.end(), 0.0);
        for (std::size_t o = 0; o < outs; ++o) {
          const double g_out = up[o * positions + p];
          if (g_out == 0.0) continue;
          k.axpy(g_out, patch.data(), grads.w1.data() + o * patch_len, patch_len);
          if (want_input_grad) k.axpy(g_out, layer.w1.data() + o * patch_len, gpatch.data(), patch_len);
          for (std::size_t g = 0; g < groups; ++g) {
            const double* x = patch.data() + g * m;
            double* gx = gpatch.data() + g * m;
            if (sep) {
              for (std::size_t q = 0; q < sep->rank; ++q) {
                const std::size_t off = ((o * groups + g) * sep->rank + q) * m;
                const double u = k.dot(sep->a.data() + off, x, m);
                const double v = k.dot(sep->b.data() + off, x, m);
                k.axpy(g_out * v, x, gsep->a.data() + off, m);
                k.axpy(g_out * u, x, gsep->b.data() + off, m);
                if (want_input_grad) {
                  k.axpy(g_out * v, sep->a.data() + off, gx, m);
                  k.axpy(g_out * u, sep->b.data() + off, gx, m);
                }
              }
            } else {
              const std::size_t off = (o * groups + g) * m * m;
              k.ger(g_out, x, x, gexact->w2.data() + off, m, m);
              if (want_input_grad) {
                // d(x^T W x)/dx = (W + W^T) x
                k.gemv(exact->w2.data() + off, x, tmp.data(), m, m);
                k.gemv_t_acc(exact->w2.data() + off, x, tmp.data(), m, m);
                k.axpy(g_out, tmp.data(), gx, m);
              }
            }
          }
        }
        if (want_input_grad) scatter_add(offsets, gpatch, grads.input.data());
      }
    }
  }
  return grads;
}

L1Norms l1_norms(const VolterraLayer& layer) {
  const VolterraLayer exact = assemble_exact(layer);
  L1Norms n;
  for (double v : exact.w1) n.linear_l1 += std::abs(v);
  for (double v : std::get<ExactKernel>(exact.quad).w2) n.quad_l1 += std::abs(v);
  return n;
}

double output_bound(const L1Norms& norms, double input_bound) {
  if (!(input_bound >= 0.0)) throw DomainError("input bound A must be >= 0");
  return input_bound * norms.linear_l1 + input_bound * input_bound * norms.quad_l1;
}

double output_bound(const VolterraLayer& layer, double input_bound) {
  return output_bound(l1_norms(layer), input_bound);
}

}  // namespace vnn
