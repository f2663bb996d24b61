#include <doctest.h>

#include <functional>

#include "support.hpp"
#include "vnn/errors.hpp"
#include "vnn/layer.hpp"

using namespace vnn;

namespace {

LayerGeometry scalar_geometry(std::size_t len_t) {
  LayerGeometry g;
  g.len_t = len_t;
  return g;
}

// The worked example: frames x = [1, 2], W1 = [0.5, -1], W2 = [[1, 2], [0, 0.25]].
VolterraLayer example_layer() {
  auto layer = VolterraLayer::zeros(scalar_geometry(2), {});
  layer.w1 = {0.5, -1.0};
  std::get<ExactKernel>(layer.quad).w2 = {1.0, 2.0, 0.0, 0.25};
  return layer;
}

Tensor example_input() { return Tensor({1, 2, 1, 1}, {1.0, 2.0}); }

double contract(const Tensor& y, const Tensor& u) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * u[i];
  return s;
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

// Central differences of <forward(layer, x), u> against backward(). The
// contraction is at most quadratic in any single coordinate, so a central
// difference has no truncation error and a wide step keeps rounding small.
double max_fd_error(VolterraLayer layer, Tensor x, const Tensor& u) {
  const auto grads = backward(layer, x, u);
  auto objective = [&] { return contract(forward(layer, x), u); };
  const double h = 1e-3;
  double worst = 0.0;
  auto probe = [&](double& v, double analytic) {
    const double orig = v;
    v = orig + h;
    const double up = objective();
    v = orig - h;
    const double down = objective();
    v = orig;
    const double e = rel_err(analytic, (up - down) / (2 * h));
    worst = std::max(worst, e);
  };
  for (std::size_t i = 0; i < layer.w1.size(); ++i) probe(layer.w1[i], grads.w1[i]);
  if (auto* e = std::get_if<ExactKernel>(&layer.quad)) {
    const auto& g = std::get<ExactKernel>(grads.quad).w2;
    for (std::size_t i = 0; i < e->w2.size(); ++i) probe(e->w2[i], g[i]);
  } else {
    auto& s = std::get<SeparableKernel>(layer.quad);
    const auto& g = std::get<SeparableKernel>(grads.quad);
    for (std::size_t i = 0; i < s.a.size(); ++i) probe(s.a[i], g.a[i]);
    for (std::size_t i = 0; i < s.b.size(); ++i) probe(s.b[i], g.b[i]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) probe(x[i], grads.input[i]);
  return worst;
}

}  // namespace

TEST_CASE("worked forward example") {
  const auto y = forward(example_layer(), example_input());
  REQUIRE(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y[0] == doctest::Approx(8.25).epsilon(1e-15));
}

TEST_CASE("zero input gives zero output") {
  Rng rng(1);
  LayerGeometry g{2, 1, 1, 2, 3};
  auto layer = VolterraLayer::zeros(g, {});
  testing::randomize(layer, rng);
  const auto y = forward(layer, Tensor::zeros({2, 4, 5, 5}));
  CHECK(max_abs(y) == 0.0);
}

TEST_CASE("unit impulse copies the valid region") {
  Rng rng(2);
  LayerGeometry g{2, 1, 1, 1, 1};
  auto layer = VolterraLayer::zeros(g, {});
  const std::size_t centre = 1 * g.taps_w() + 1;  // tau 0, sigma (0, 0)
  layer.w1[centre] = 1.0;
  const auto x = testing::random_tensor({1, 4, 5, 6}, rng);
  const auto y = forward(layer, x);
  REQUIRE(y.shape() == Shape{1, 3, 3, 4});
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t w = 0; w < 4; ++w) CHECK(y.at({0, t, h, w}) == x.at({0, t + 1, h + 1, w + 1}));
}

TEST_CASE("forward matches tap enumeration") {
  Rng rng(3);
  LayerGeometry g{2, 1, 1, 1, 1};
  auto layer = VolterraLayer::zeros(g, {});
  testing::randomize(layer, rng);
  const auto x = testing::random_tensor({1, 4, 3, 3}, rng);
  CHECK(testing::max_abs_diff(forward(layer, x), testing::brute_force_layer(layer, x)) <= 1e-12);

  SUBCASE("multi-channel, zero padding, both pairings") {
    for (auto pairing : {Pairing::within_channel, Pairing::cross_channel}) {
      for (auto pad : {Padding::valid, Padding::zero_spatial}) {
        LayerGeometry g2{3, 1, 0, 2, 3, pad};
        auto l2 = VolterraLayer::zeros(g2, {}, pairing);
        testing::randomize(l2, rng);
        const auto x2 = testing::random_tensor({2, 5, 4, 3}, rng);
        const auto y = forward(l2, x2);
        CHECK(y.shape() == l2.output_shape(x2.shape()));
        CHECK(testing::max_abs_diff(y, testing::brute_force_layer(l2, x2)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("output shapes and geometry errors") {
  LayerGeometry g{2, 1, 2, 1, 4};
  auto layer = VolterraLayer::zeros(g, {});
  CHECK(layer.output_shape({1, 8, 16, 16}) == Shape{4, 7, 14, 12});
  g.padding = Padding::zero_spatial;
  CHECK(VolterraLayer::zeros(g, {}).output_shape({1, 8, 16, 16}) == Shape{4, 7, 16, 16});
  CHECK_THROWS_AS(forward(layer, Tensor::zeros({1, 1, 5, 5})), GeometryError);
  CHECK_THROWS_AS(forward(layer, Tensor::zeros({1, 4, 2, 9})), GeometryError);
  CHECK_THROWS_AS(forward(layer, Tensor::zeros({2, 4, 5, 5})), ShapeError);
  LayerGeometry bad{0, 0, 0, 1, 1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("separable worked example") {
  auto layer = VolterraLayer::zeros(scalar_geometry(2), {QuadraticKind::separable, 1});
  auto& s = std::get<SeparableKernel>(layer.quad);
  s.a = {1.0, 1.0};
  s.b = {1.0, -1.0};
  CHECK(forward_separable(layer, example_input())[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(forward(layer, example_input())[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(forward_separable(example_layer(), example_input()), ConfigError);

  const auto exact = assemble_exact(s, 1, 2);
  CHECK(exact.w2 == std::vector<double>{1.0, -1.0, 1.0, -1.0});
}

TEST_CASE("separable with zero a reduces to the linear term") {
  Rng rng(4);
  LayerGeometry g{2, 1, 1, 2, 2};
  auto layer = VolterraLayer::zeros(g, {QuadraticKind::separable, 3});
  testing::randomize(layer, rng);
  auto& s = std::get<SeparableKernel>(layer.quad);
  std::fill(s.a.begin(), s.a.end(), 0.0);
  auto linear = VolterraLayer::zeros(g, {});
  linear.w1 = layer.w1;
  const auto x = testing::random_tensor({2, 3, 4, 4}, rng);
  CHECK(testing::max_abs_diff(forward(layer, x), forward(linear, x)) <= 1e-14);
  for (double v : assemble_exact(s, 2 * 2, g.window_size()).w2) CHECK(v == 0.0);
}

TEST_CASE("separable equals its assembled exact twin") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    LayerGeometry g{1 + rng.below(3), rng.below(2), rng.below(2), 1 + rng.below(2), 1 + rng.below(3)};
    const std::size_t rank = trial % 2 == 0 ? g.window_size() : 3;
    auto layer = VolterraLayer::zeros(g, {QuadraticKind::separable, rank});
    testing::randomize(layer, rng);
    const auto exact = assemble_exact(layer);
    CHECK(!exact.is_separable());
    for (int k = 0; k < 20; ++k) {
      const auto x = testing::random_tensor({g.in_channels, g.len_t + 2, 2 * g.half_h + 3, 2 * g.half_w + 2}, rng);
      CHECK(testing::max_abs_diff(forward_separable(layer, x), forward(exact, x)) <= 1e-10);
    }
  }
}

TEST_CASE("backward worked example") {
  const auto grads = backward(example_layer(), example_input(), Tensor({1, 1, 1, 1}, {1.0}));
  CHECK(grads.w1 == std::vector<double>{2.0, 1.0});
  const auto& w2 = std::get<ExactKernel>(grads.quad).w2;
  CHECK(w2 == std::vector<double>{4.0, 2.0, 2.0, 1.0});

  const auto zero = backward(example_layer(), Tensor::zeros({1, 2, 1, 1}), Tensor({1, 1, 1, 1}, {1.0}));
  CHECK(zero.w1 == std::vector<double>{0.0, 0.0});
  for (double v : std::get<ExactKernel>(zero.quad).w2) CHECK(v == 0.0);

  CHECK_THROWS_AS(backward(example_layer(), example_input(), Tensor::zeros({1, 2, 1, 1})), ShapeError);
}

TEST_CASE("backward matches finite differences") {
  Rng rng(6);
  for (int trial = 0; trial < 12; ++trial) {
    LayerGeometry g{1 + rng.below(2), rng.below(2), rng.below(2), 1 + rng.below(2), 1 + rng.below(2)};
    if (trial % 3 == 1) g.padding = Padding::zero_spatial;
    const QuadraticSpec spec = trial % 2 ? QuadraticSpec{QuadraticKind::separable, 2} : QuadraticSpec{};
    const Pairing pairing = trial % 4 == 3 ? Pairing::cross_channel : Pairing::within_channel;
    auto layer = VolterraLayer::zeros(g, spec, pairing);
    testing::randomize(layer, rng);
    const auto x = testing::random_tensor({g.in_channels, g.len_t + 1, 2 * g.half_h + 2, 2 * g.half_w + 2}, rng);
    const auto u = testing::random_tensor(layer.output_shape(x.shape()), rng);
    CHECK(max_fd_error(layer, x, u) <= 1e-5);
  }
}

TEST_CASE("homogeneity split") {
  Rng rng(7);
  LayerGeometry g{2, 1, 1, 2, 2};
  auto linear = VolterraLayer::zeros(g, {});
  auto quadratic = VolterraLayer::zeros(g, {});
  testing::randomize(linear, rng);
  testing::randomize(quadratic, rng);
  std::fill(std::get<ExactKernel>(linear.quad).w2.begin(), std::get<ExactKernel>(linear.quad).w2.end(), 0.0);
  std::fill(quadratic.w1.begin(), quadratic.w1.end(), 0.0);
  for (int k = 0; k < 10; ++k) {
    const double alpha = rng.uniform(-3.0, 3.0);
    const auto x = testing::random_tensor({2, 3, 4, 4}, rng);
    const auto ax = alpha * x;
    const auto y1 = forward(linear, x), y1a = forward(linear, ax);
    const auto y2 = forward(quadratic, x), y2a = forward(quadratic, ax);
    for (std::size_t i = 0; i < y1.size(); ++i) {
      CHECK(y1a[i] == doctest::Approx(alpha * y1[i]).epsilon(1e-12));
      CHECK(y2a[i] == doctest::Approx(alpha * alpha * y2[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("l1 norms and output bound") {
  const auto n = l1_norms(example_layer());
  CHECK(n.linear_l1 == 1.5);
  CHECK(n.quad_l1 == 3.25);
  const auto z = l1_norms(VolterraLayer::zeros(LayerGeometry{}, {}));
  CHECK(z.linear_l1 == 0.0);
  CHECK(z.quad_l1 == 0.0);

  CHECK(output_bound(L1Norms{2, 3}, 1.0) == 5.0);
  CHECK(output_bound(L1Norms{2, 3}, 0.0) == 0.0);
  CHECK(output_bound(L1Norms{2, 3}, 2.0) == 16.0);
  CHECK_THROWS_AS(output_bound(L1Norms{2, 3}, -1.0), DomainError);

  Rng rng(8);
  auto sep = VolterraLayer::zeros(LayerGeometry{2, 1, 0, 2, 2}, {QuadraticKind::separable, 2});
  testing::randomize(sep, rng);
  const auto a = l1_norms(sep), b = l1_norms(assemble_exact(sep));
  CHECK(a.linear_l1 == b.linear_l1);
  CHECK(a.quad_l1 == doctest::Approx(b.quad_l1).epsilon(1e-14));
}

TEST_CASE("output bound is sound") {
  Rng rng(9);
  LayerGeometry g{2, 1, 1, 2, 2};
  auto layer = VolterraLayer::zeros(g, {});
  testing::randomize(layer, rng, 0.3);
  const double A = 1.5;
  const double bound = output_bound(layer, A);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    auto x = testing::random_tensor({2, 2, 3, 3}, rng, -A, A);
    if (k % 10 == 0) {
      for (auto& v : x.data()) v = v < 0 ? -A : A;  // corners of the input box
    }
    worst = std::max(worst, max_abs(forward(layer, x)));
  }
  CHECK(worst <= bound);
  CHECK(worst > 0.0);
}
