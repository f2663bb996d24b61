#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "vnn/layer.hpp"
#include "vnn/rng.hpp"
#include "vnn/tensor.hpp"

namespace testing {

inline vnn::Tensor random_tensor(const vnn::Shape& shape, vnn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  auto t = vnn::Tensor::zeros(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline void randomize(vnn::VolterraLayer& layer, vnn::Rng& rng, double scale = 1.0) {
  for (auto& block : vnn::weight_blocks(layer)) {
    for (auto& v : block.values) v = rng.uniform(-scale, scale);
  }
}

// Straight from the definition: every output position, every channel, every
// tap and tap pair enumerated with explicit loops. Independent of the
// library's patch gathering.
inline vnn::Tensor brute_force_layer(const vnn::VolterraLayer& layer, const vnn::Tensor& x) {
  const auto& g = layer.geometry;
  const std::size_t C = x.extent(0), T = x.extent(1), H = x.extent(2), W = x.extent(3);
  const long ph = static_cast<long>(g.half_h), pw = static_cast<long>(g.half_w);
  const bool zero = g.padding == vnn::Padding::zero_spatial;
  const std::size_t To = T - g.len_t + 1;
  const std::size_t Ho = zero ? H : H - 2 * g.half_h;
  const std::size_t Wo = zero ? W : W - 2 * g.half_w;
  const std::size_t th = g.taps_h(), tw = g.taps_w(), nw = g.window_size();
  const bool cross = layer.pairing == vnn::Pairing::cross_channel;
  auto exact = std::holds_alternative<vnn::ExactKernel>(layer.quad) ? layer.quad : vnn::assemble_exact(layer).quad;
  const auto& w2 = std::get<vnn::ExactKernel>(exact).w2;
  const std::size_t m = cross ? C * nw : nw;

  auto read = [&](std::size_t c, std::size_t frame, long r, long col) {
    if (r < 0 || col < 0 || r >= static_cast<long>(H) || col >= static_cast<long>(W)) return 0.0;
    return x.at({c, frame, static_cast<std::size_t>(r), static_cast<std::size_t>(col)});
  };
  // Tap (c, tau, s1, s2) at output (t, h, w); flat index within a channel is
  // tau * th * tw + (s1 + ph) * tw + (s2 + pw).
  auto tap = [&](std::size_t c, std::size_t idx, std::size_t t, std::size_t h, std::size_t w) {
    const std::size_t tau = idx / (th * tw);
    const long s1 = static_cast<long>((idx / tw) % th) - ph;
    const long s2 = static_cast<long>(idx % tw) - pw;
    const std::size_t frame = t + g.len_t - 1 - tau;
    const long row = static_cast<long>(zero ? h : h + g.half_h) - s1;
    const long col = static_cast<long>(zero ? w : w + g.half_w) - s2;
    return read(c, frame, row, col);
  };

  auto y = vnn::Tensor::zeros({g.out_channels, To, Ho, Wo});
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t t = 0; t < To; ++t)
      for (std::size_t h = 0; h < Ho; ++h)
        for (std::size_t w = 0; w < Wo; ++w) {
          double sum = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < nw; ++i) sum += layer.w1[(o * C + c) * nw + i] * tap(c, i, t, h, w);
          if (cross) {
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < m; ++j)
                sum += w2[(o * m + i) * m + j] * tap(i / nw, i % nw, t, h, w) * tap(j / nw, j % nw, t, h, w);
          } else {
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t i = 0; i < nw; ++i)
                for (std::size_t j = 0; j < nw; ++j)
                  sum += w2[((o * C + c) * nw + i) * nw + j] * tap(c, i, t, h, w) * tap(c, j, t, h, w);
          }
          y.at({o, t, h, w}) = sum;
        }
  return y;
}

inline double max_abs_diff(const vnn::Tensor& a, const vnn::Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("vnn_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this) ^ static_cast<std::uintptr_t>(::time(nullptr))));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testing
