#include <doctest.h>

#include <cstdlib>

#include "support.hpp"
#include "vnn/errors.hpp"
#include "vnn/trainer.hpp"

using namespace vnn;

namespace {

CascadeConfig tiny_config(QuadraticSpec q = {}) {
  CascadeConfig cfg;
  cfg.trunk.input_shape = {1, 4, 5, 5};
  cfg.trunk.layers = {LayerSpec{LayerGeometry{2, 1, 1, 1, 2}, q}, LayerSpec{LayerGeometry{2, 0, 0, 2, 2}, q}};
  cfg.num_classes = 2;
  return cfg;
}

Dataset random_dataset(std::size_t n, std::uint64_t seed, const Shape& shape = {1, 4, 5, 5}) {
  Rng rng(seed);
  Dataset d;
  d.classes = {"a", "b"};
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.rgb = testing::random_tensor(shape, rng, 0.0, 1.0);
    s.label = i % 2;
    s.id = "clip" + std::to_string(i);
    // Give class 1 a brighter mean so there is something to learn.
    if (s.label == 1)
      for (auto& v : s.rgb.data()) v += 0.5;
    d.samples.push_back(std::move(s));
  }
  return d;
}

std::vector<double> flat_params(const Model& m) {
  std::vector<double> out;
  for (const auto& g : parameter_groups(m)) out.insert(out.end(), g.values.begin(), g.values.end());
  return out;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lr_decay = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(50, 3, 0), b = epoch_order(50, 3, 0), c = epoch_order(50, 3, 1);
  CHECK(a == b);
  CHECK(a != c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("zero learning rate leaves weights untouched") {
  Model model = build(tiny_config(), 1);
  const auto before = flat_params(model);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  const auto report = train(model, random_dataset(8, 2), cfg);
  CHECK(flat_params(model) == before);
  REQUIRE(report.epochs.size() == 3);
  CHECK(report.epochs[0].train_loss == report.epochs[2].train_loss);
  CHECK(report.census == census(model));
}

TEST_CASE("single sample loss decreases monotonically") {
  CascadeConfig cfg;
  cfg.trunk.input_shape = {1, 2, 3, 3};
  cfg.trunk.layers = {LayerSpec{LayerGeometry{2, 1, 1, 1, 1}, {}}};
  auto net = build(cfg, 3);
  auto& w2 = std::get<ExactKernel>(net.layers[0].quad).w2;
  std::fill(w2.begin(), w2.end(), 0.0);
  Model model = net;
  Dataset d = random_dataset(1, 4, {1, 2, 3, 3});
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.batch_size = 1;
  tc.epochs = 50;
  tc.lr_decay = 1.0;
  tc.eval_every = 100;
  const auto report = train(model, d, tc);
  for (std::size_t e = 1; e < report.epochs.size(); ++e) {
    CHECK(report.epochs[e].train_loss < report.epochs[e - 1].train_loss);
  }
}

TEST_CASE("one step moves every parameter by -eta times the gradient") {
  Model model = build(tiny_config(), 5);
  const auto data = random_dataset(1, 6);
  const double eta = 0.3, lambda = 0.05;
  auto expected = flat_params(model);
  const auto sg = sample_gradients(model, data.samples[0]);
  {
    std::size_t k = 0;
    const auto groups = parameter_groups(model);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t i = 0; i < groups[g].values.size(); ++i, ++k) {
        const double grad = sg.groups[g][i] + (groups[g].decayed ? lambda * groups[g].values[i] : 0.0);
        expected[k] -= eta * grad;
      }
    }
  }
  TrainConfig tc;
  tc.learning_rate = eta;
  tc.lambda = lambda;
  tc.batch_size = 1;
  tc.epochs = 1;
  train(model, data, tc);
  const auto got = flat_params(model);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expected[i]);
}

TEST_CASE("training is deterministic across runs and thread counts") {
  const auto data = random_dataset(12, 7);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 4;
  tc.epochs = 3;
  tc.seed = 9;
  auto run = [&](std::size_t threads) {
    Model m = build(tiny_config(), 8);
    auto c = tc;
    c.threads = threads;
    auto r = train(m, data, c);
    return std::pair{flat_params(m), r};
  };
  const auto [p1, r1] = run(1);
  const auto [p2, r2] = run(1);
  const auto [p4, r4] = run(4);
  CHECK(p1 == p2);
  CHECK(p1 == p4);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(r1.epochs[e].train_loss == r4.epochs[e].train_loss);
    CHECK(r1.epochs[e].shuffle_seed == r2.epochs[e].shuffle_seed);
    CHECK(r1.epochs[e].eval_acc == r4.epochs[e].eval_acc);
  }
}

TEST_CASE("resuming continues the same trajectory") {
  const auto data = random_dataset(10, 10);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 3;
  tc.epochs = 4;
  Model whole = build(tiny_config(), 11);
  const auto full = train(whole, data, tc);

  Model part = build(tiny_config(), 11);
  tc.epochs = 2;
  train(part, data, tc);
  tc.start_epoch = 2;
  const auto rest = train(part, data, tc);
  CHECK(flat_params(part) == flat_params(whole));
  CHECK(rest.epochs[0].epoch == 2);
  CHECK(rest.epochs[0].train_loss == full.epochs[2].train_loss);
  CHECK(rest.epochs[0].learning_rate == full.epochs[2].learning_rate);
}

TEST_CASE("divergence aborts with a diagnostic") {
  Model model = build(tiny_config(), 12);
  TrainConfig tc;
  tc.learning_rate = 1e6;
  tc.epochs = 5;
  CHECK_THROWS_WITH_AS(train(model, random_dataset(8, 13), tc), doctest::Contains("epoch"), DivergenceError);
}

TEST_CASE("gradient check passes for exact and separable cascades") {
  const auto data = random_dataset(1, 14);
  for (auto q : {QuadraticSpec{}, QuadraticSpec{QuadraticKind::separable, 3}}) {
    const Model model = build(tiny_config(q), 15);
    GradCheckOptions opt;
    opt.lambda = 0.1;
    const auto r = grad_check(model, data.samples[0], opt);
    CHECK(r.passed);
    CHECK(r.worst()->max_rel_error <= 1e-4);
    for (const auto& g : r.groups) CHECK(g.checked == std::min<std::size_t>(200, g.checked));
  }
}

TEST_CASE("gradient check at the optimum") {
  auto net = build(tiny_config(), 16);
  net.head.biases = {60.0, -60.0};
  const Model model = net;
  auto data = random_dataset(1, 17);
  data.samples[0].label = 0;
  CHECK(grad_check(model, data.samples[0]).passed);
}

TEST_CASE("gradient check catches a corrupted entry") {
  const Model model = build(tiny_config(), 18);
  const auto data = random_dataset(1, 19);
  const auto groups = parameter_groups(model);
  std::size_t target = 0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (groups[g].name == "layer1.w2") target = g;
  GradCheckOptions opt;
  opt.corrupt = [&](std::vector<std::vector<double>>& grads) {
    auto& g = grads[target];
    const auto it = std::max_element(g.begin(), g.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    *it *= 1.1;
  };
  const auto r = grad_check(model, data.samples[0], opt);
  CHECK_FALSE(r.passed);
  CHECK(r.worst()->name == "layer1.w2");
  CHECK(r.worst()->max_rel_error > 0.05);
}

TEST_CASE("evaluation metrics") {
  auto net = build(tiny_config(), 20);
  auto data = random_dataset(6, 21);

  SUBCASE("constant predictor on balanced data") {
    std::fill(net.head.weights.begin(), net.head.weights.end(), 0.0);
    net.head.biases = {1.0, 0.0};
    const auto r = evaluate(Model{net}, data);
    CHECK(r.accuracy == 0.5);
    CHECK(r.per_class_accuracy == std::vector<double>{1.0, 0.0});
    std::size_t total = 0;
    for (const auto& row : r.confusion)
      for (auto v : row) total += v;
    CHECK(total == 6);
    CHECK(r.confusion[1][0] == 3);
  }

  SUBCASE("single clip predicted correctly") {
    std::fill(net.head.weights.begin(), net.head.weights.end(), 0.0);
    net.head.biases = {0.0, 1.0};
    Dataset one;
    one.samples = {data.samples[1]};
    CHECK(evaluate(Model{net}, one).accuracy == 1.0);
  }

  SUBCASE("video majority vote") {
    // Predict class from the sign of the clip's first pixel via a zeroed
    // trunk is awkward; instead craft head biases per clip through labels.
    std::fill(net.head.weights.begin(), net.head.weights.end(), 0.0);
    net.head.biases = {0.0, 2.0};  // always predicts class 1
    for (auto& s : data.samples) s.video = "v" + std::to_string(s.label);
    const auto r = evaluate(Model{net}, data);
    CHECK(r.accuracy == 0.5);
    CHECK(r.video_accuracy == 0.5);  // video v1 correct, v0 wrong
  }
}

TEST_CASE("resolve threads") {
  CHECK(resolve_threads(3) == 3);
  ::setenv("VNN_THREADS", "2", 1);
  CHECK(resolve_threads(0) == 2);
  ::unsetenv("VNN_THREADS");
  CHECK(resolve_threads(0) >= 1);
}

TEST_CASE("epoch records serialize as one JSON line") {
  EpochRecord r;
  r.epoch = 3;
  r.train_loss = 0.5;
  const auto line = to_json_line(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.find("\"epoch\":3") != std::string::npos);
  CHECK(line.find("\"eval_acc\":null") != std::string::npos);
}
