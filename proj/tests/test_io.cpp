#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "support.hpp"
#include "vnn/dataset.hpp"
#include "vnn/errors.hpp"
#include "vnn/io.hpp"
#include "vnn/trainer.hpp"

using namespace vnn;
namespace fs = std::filesystem;

namespace {

const fs::path golden_dir = VNN_GOLDEN_DIR;

// Compares against a checked-in file; VNN_WRITE_GOLDEN=1 refreshes it.
void check_golden(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const auto path = golden_dir / name;
  if (std::getenv("VNN_WRITE_GOLDEN")) write_file(path, bytes);
  REQUIRE(fs::exists(path));
  CHECK(read_file(path) == bytes);
}

CascadeConfig cascade_config() {
  CascadeConfig cfg;
  cfg.trunk.input_shape = {1, 5, 5, 5};
  cfg.trunk.layers = {LayerSpec{LayerGeometry{2, 1, 1, 1, 2}, {}},
                      LayerSpec{LayerGeometry{2, 0, 0, 2, 2, Padding::valid, TemporalMode::non_overlapping},
                                {QuadraticKind::separable, 2}}};
  cfg.pooling = Pooling::spatial_mean;
  cfg.num_classes = 3;
  return cfg;
}

TwoStreamConfig two_stream_config(FusionKind kind) {
  TwoStreamConfig cfg;
  cfg.rgb.input_shape = {1, 4, 5, 5};
  cfg.rgb.layers = {LayerSpec{LayerGeometry{2, 1, 1, 1, 2}, {}}};
  cfg.flow = cfg.rgb;
  cfg.mode.kind = kind;
  if (kind == FusionKind::weighted_average) cfg.mode.beta_rgb = 0.25, cfg.mode.beta_flow = 0.75;
  cfg.fusion_layer = LayerSpec{LayerGeometry{2, 0, 0, 4, 1}, {}};
  cfg.num_classes = 2;
  return cfg;
}

void check_round_trip(const Model& model, std::uint64_t seed) {
  const auto bytes = encode_model(model);
  const Model back = decode_model(bytes);
  CHECK(back == model);
  CHECK(encode_model(back) == bytes);
  Rng rng(seed);
  const Model& m = model;
  for (int k = 0; k < 10; ++k) {
    Sample s;
    if (const auto* c = std::get_if<CascadeNetwork>(&m)) {
      s.rgb = testing::random_tensor(c->config.trunk.input_shape, rng);
    } else {
      const auto& t = std::get<TwoStreamNetwork>(m);
      s.rgb = testing::random_tensor(t.config.rgb.input_shape, rng);
      s.flow = testing::random_tensor(t.config.flow.input_shape, rng);
    }
    CHECK(predict(back, s) == predict(model, s));
  }
}

SyntheticConfig motion_config() {
  SyntheticConfig cfg;
  cfg.classes = {{"right", 1, 0}, {"left", -1, 0}, {"down", 0, 1}};
  cfg.clips_per_class = 4;
  cfg.test_clips_per_class = 2;
  cfg.frames = 8;
  cfg.height = 16;
  cfg.width = 16;
  cfg.noise_sigma = 0.05;
  cfg.seed = 5;
  cfg.with_flow = true;
  return cfg;
}

}  // namespace

TEST_CASE("tensor file layout") {
  const Tensor t({2, 2}, {1, 2, 3, 4});
  const auto bytes = encode_tensor(t);
  CHECK(bytes.size() == 31);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "VNNT");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);
  CHECK(bytes[7] == 2);  // dims[0], little-endian u32
  CHECK(bytes[15] == 0x00);  // payload: 1.0f = 0x3f800000 LE
  CHECK(bytes[17] == 0x80);
  CHECK(bytes[18] == 0x3f);
  check_golden("tensor_2x2.vnnt", bytes);
  CHECK(decode_tensor(bytes) == t);

  testing::TempDir dir("tensor");
  save_tensor(dir.path / "t.vnnt", t);
  CHECK(fs::file_size(dir.path / "t.vnnt") == 31);
  CHECK(load_tensor(dir.path / "t.vnnt") == t);
}

TEST_CASE("tensor round trip at f32 precision") {
  Rng rng(1);
  const auto t = testing::random_tensor({3, 4, 5}, rng);
  const auto back = decode_tensor(encode_tensor(t));
  CHECK(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
  CHECK(encode_tensor(back) == encode_tensor(t));
}

TEST_CASE("malformed tensor files") {
  auto bytes = encode_tensor(Tensor({2, 2}, {1, 2, 3, 4}));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(bad), FormatError);
  try {
    decode_tensor(bad);
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_WITH_AS(decode_tensor(bad), doctest::Contains("version"), FormatError);
  bad = bytes;
  bad[6] = 0;
  CHECK_THROWS_AS(decode_tensor(bad), FormatError);
  bad = bytes;
  bad.resize(29);
  try {
    decode_tensor(bad);
    FAIL("truncated file accepted");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 15);
  }
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_tensor(bad), FormatError);
  CHECK_THROWS_AS(load_tensor("/nonexistent/file.vnnt"), Error);
}

TEST_CASE("cascade model round trip") {
  const Model model = build(cascade_config(), 3);
  check_round_trip(model, 4);
  check_golden("cascade.vnnm", encode_model(model));

  testing::TempDir dir("model");
  save_model(dir.path / "m.vnnm", model);
  CHECK(load_model(dir.path / "m.vnnm") == model);
}

TEST_CASE("two-stream model round trip keeps the partition") {
  for (auto kind : {FusionKind::volterra, FusionKind::concat, FusionKind::weighted_average}) {
    const Model model = build_two_stream(two_stream_config(kind), 7);
    check_round_trip(model, 8);
    const auto back = std::get<TwoStreamNetwork>(decode_model(encode_model(model)));
    CHECK(back.config.mode == std::get<TwoStreamNetwork>(model).config.mode);
    CHECK(back.rgb_channels() == 2);
    CHECK(back.flow_channels() == 2);
    CHECK(back.fusion.pairing == std::get<TwoStreamNetwork>(model).fusion.pairing);
  }
  check_golden("two_stream.vnnm", encode_model(build_two_stream(two_stream_config(FusionKind::volterra), 7)));
}

TEST_CASE("trained model resumes bit-exactly") {
  Rng rng(9);
  Dataset d;
  for (int i = 0; i < 6; ++i) d.samples.push_back(Sample{testing::random_tensor({1, 5, 5, 5}, rng), {}, std::size_t(i % 3), "c", ""});
  Model model = build(cascade_config(), 10);
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.batch_size = 2;
  tc.epochs = 2;
  train(model, d, tc);
  CHECK(decode_model(encode_model(model)) == model);
}

TEST_CASE("malformed model files") {
  const auto bytes = encode_model(build(cascade_config(), 3));
  auto bad = bytes;
  bad.resize(bytes.size() - 5);
  CHECK_THROWS_WITH_AS(decode_model(bad), doctest::Contains("census"), FormatError);
  bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS_AS(decode_model(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_WITH_AS(decode_model(bad), doctest::Contains("version"), FormatError);
  bad = bytes;
  bad.resize(20);
  CHECK_THROWS_AS(decode_model(bad), FormatError);
}

TEST_CASE("synthetic generator is deterministic") {
  testing::TempDir a("gen_a"), b("gen_b");
  const auto cfg = motion_config();
  const auto out_a = gen_synthetic(cfg, a.path);
  gen_synthetic(cfg, b.path);
  CHECK(out_a.clips_written == 18);
  REQUIRE(out_a.test_manifest.has_value());
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path);
    CHECK(read_file(entry.path()) == read_file(b.path / rel));
    ++files;
  }
  CHECK(files == 2 + 18 * 2);
  check_golden("synthetic_train.json", read_file(a.path / "train.json"));
  check_golden("synthetic_train_00000_rgb.vnnt", read_file(a.path / "clips" / "train_00000_rgb.vnnt"));
}

TEST_CASE("blob moves one column per frame") {
  SyntheticConfig cfg;
  cfg.classes = {{"right", 1, 0}};
  cfg.noise_sigma = 0.0;
  cfg.seed = 3;
  for (std::uint64_t stream = 0; stream < 5; ++stream) {
    const auto clip = synthesize_clip(cfg, 0, stream);
    long prev = -1;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      std::size_t best_h = 0, best_w = 0;
      for (std::size_t h = 0; h < cfg.height; ++h)
        for (std::size_t w = 0; w < cfg.width; ++w)
          if (clip.rgb.at({0, t, h, w}) > clip.rgb.at({0, t, best_h, best_w})) best_h = h, best_w = w;
      CHECK(clip.rgb.at({0, t, best_h, best_w}) == 1.0);
      if (prev >= 0) CHECK(static_cast<long>(best_w) == prev + 1);
      prev = static_cast<long>(best_w);
      CHECK(clip.centers[t][1] == static_cast<double>(best_w));
    }
  }
}

TEST_CASE("static clip has exactly zero flow") {
  SyntheticConfig cfg;
  cfg.classes = {{"still", 0, 0}};
  cfg.noise_sigma = 0.0;
  const auto clip = synthesize_clip(cfg, 0, 1);
  for (double v : clip.flow.data()) CHECK(v == 0.0);
  CHECK(max_abs(clip.rgb) == 1.0);
}

TEST_CASE("generator config errors") {
  SyntheticConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.classes = {{"fast", 3, 0}};
  cfg.width = 8;
  testing::TempDir dir("gen_bad");
  CHECK_THROWS_AS(gen_synthetic(cfg, dir.path / "out"), ConfigError);
  CHECK_FALSE(fs::exists(dir.path / "out"));
}

TEST_CASE("centroid tracking separates the classes") {
  auto cfg = motion_config();
  cfg.clips_per_class = 30;
  std::size_t correct = 0, total = 0;
  for (std::size_t cls = 0; cls < cfg.classes.size(); ++cls) {
    for (std::uint64_t s = 0; s < cfg.clips_per_class; ++s) {
      const auto clip = synthesize_clip(cfg, cls, 100 * cls + s);
      auto centroid = [&](std::size_t t) {
        double m = 0, r = 0, c = 0;
        for (std::size_t h = 0; h < cfg.height; ++h)
          for (std::size_t w = 0; w < cfg.width; ++w) {
            const double v = clip.rgb.at({0, t, h, w});
            if (v < 0.5) continue;
            m += v;
            r += v * static_cast<double>(h);
            c += v * static_cast<double>(w);
          }
        return std::array<double, 2>{r / m, c / m};
      };
      const auto first = centroid(0), last = centroid(cfg.frames - 1);
      const double vy = (last[0] - first[0]) / static_cast<double>(cfg.frames - 1);
      const double vx = (last[1] - first[1]) / static_cast<double>(cfg.frames - 1);
      std::size_t best = 0;
      double best_d = 1e9;
      for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
        const double d = std::hypot(vx - cfg.classes[k].velocity_x, vy - cfg.classes[k].velocity_y);
        if (d < best_d) best_d = d, best = k;
      }
      correct += best == cls;
      ++total;
    }
  }
  CHECK(correct == total);
}

TEST_CASE("dataset round trip and load errors") {
  testing::TempDir dir("dataset");
  const auto out = gen_synthetic(motion_config(), dir.path);
  const auto d = load_dataset(out.train_manifest);
  CHECK(d.samples.size() == 12);
  CHECK(d.classes == std::vector<std::string>{"right", "left", "down"});
  CHECK(d.streams == std::vector<std::string>{"rgb", "flow"});
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(d.samples[i].label == i / 4);
    CHECK(d.samples[i].rgb.shape() == Shape{1, 8, 16, 16});
    REQUIRE(d.samples[i].flow.has_value());
  }
  // In-memory clip equals what the generator produced.
  const auto clip = synthesize_clip(motion_config(), 0, 0);
  CHECK(d.samples[0].rgb == clip.rgb);

  auto manifest = read_manifest(out.train_manifest);
  write_manifest(dir.path / "copy.json", manifest);
  CHECK(read_manifest(dir.path / "copy.json").clips.size() == 12);

  auto broken = manifest;
  broken.clips[3].files["rgb"] = "clips/absent.vnnt";
  write_manifest(dir.path / "absent.json", broken);
  try {
    load_dataset(dir.path / "absent.json");
    FAIL("missing file accepted");
  } catch (const LoadError& e) {
    CHECK(e.clip_id() == manifest.clips[3].id);
  }

  broken = manifest;
  broken.clips[2].label = 3;
  write_manifest(dir.path / "label.json", broken);
  CHECK_THROWS_AS(load_dataset(dir.path / "label.json"), LoadError);

  broken = manifest;
  broken.frames_per_clip = 7;
  write_manifest(dir.path / "frames.json", broken);
  CHECK_THROWS_AS(load_dataset(dir.path / "frames.json"), LoadError);

  save_tensor(dir.path / "clips" / "odd.vnnt", Tensor::zeros({8, 15, 16}));
  broken = manifest;
  broken.height.reset();
  broken.width.reset();
  broken.clips[5].files["rgb"] = "clips/odd.vnnt";
  write_manifest(dir.path / "shape.json", broken);
  try {
    load_dataset(dir.path / "shape.json");
    FAIL("shape mismatch accepted");
  } catch (const LoadError& e) {
    CHECK(e.clip_id() == manifest.clips[5].id);
  }

  std::ofstream(dir.path / "junk.json") << "{not json";
  CHECK_THROWS_AS(load_dataset(dir.path / "junk.json"), LoadError);
}
