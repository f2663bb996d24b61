#include <cmath>

#include "vnn/dataset.hpp"
#include "vnn/io.hpp"
#include "vnn/rng.hpp"

namespace vnn {

void SyntheticConfig::validate() const {
  if (classes.empty()) throw ConfigError("synthetic config needs at least one motion class");
  if (clips_per_class == 0) throw ConfigError("clips_per_class must be >= 1");
  if (frames < 2 || height < 3 || width < 3) throw ConfigError("frames must be >= 2 and height/width >= 3");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(blob_sigma > 0.0)) throw ConfigError("blob_sigma must be > 0");
  for (const auto& c : classes) {
    if (!std::isfinite(c.velocity_x) || !std::isfinite(c.velocity_y)) {
      throw ConfigError("class '" + c.name + "' has a non-finite velocity");
    }
  }
}

namespace {

// Integer start positions whose whole trajectory stays one pixel inside the frame.
double pick_start(Rng& rng, double velocity, std::size_t frames, std::size_t extent, const std::string& name) {
  const double travel = velocity * static_cast<double>(frames - 1);
  const double lo = std::ceil(1.0 - std::min(0.0, travel));
  const double hi = std::floor(static_cast<double>(extent) - 2.0 - std::max(0.0, travel));
  if (lo > hi) throw ConfigError("class '" + name + "' moves too far to stay inside the frame");
  return lo + static_cast<double>(rng.below(static_cast<std::uint64_t>(hi - lo) + 1));
}

}  // namespace

SyntheticClip synthesize_clip(const SyntheticConfig& cfg, std::size_t cls, std::uint64_t stream) {
  const auto& motion = cfg.classes.at(cls);
  Rng rng(derive_seed(cfg.seed, stream));
  const double r0 = pick_start(rng, motion.velocity_y, cfg.frames, cfg.height, motion.name);
  const double c0 = pick_start(rng, motion.velocity_x, cfg.frames, cfg.width, motion.name);
  const std::size_t T = cfg.frames, H = cfg.height, W = cfg.width;
  SyntheticClip clip;
  clip.rgb = Tensor::zeros({1, T, H, W});
  clip.flow = Tensor::zeros({1, T, H, W});
  const double inv = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
  for (std::size_t t = 0; t < T; ++t) {
    const double cr = r0 + motion.velocity_y * static_cast<double>(t);
    const double cc = c0 + motion.velocity_x * static_cast<double>(t);
    clip.centers.push_back({cr, cc});
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        const double dr = static_cast<double>(h) - cr;
        const double dc = static_cast<double>(w) - cc;
        double v = std::exp(-(dr * dr + dc * dc) * inv);
        if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * rng.normal();
        v = std::clamp(v, 0.0, 1.0);
        // Values are stored as f32; keep the in-memory clip identical to the file.
        clip.rgb.at({0, t, h, w}) = static_cast<double>(static_cast<float>(v));
      }
    }
  }
  const std::size_t frame = H * W;
  auto rgb = clip.rgb.data();
  auto flow = clip.flow.data();
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < frame; ++i) flow[t * frame + i] = rgb[(t + 1) * frame + i] - rgb[t * frame + i];
  }
  for (std::size_t i = 0; i < frame; ++i) flow[(T - 1) * frame + i] = flow[(T - 2) * frame + i];
  return clip;
}

namespace {

std::filesystem::path write_split(const SyntheticConfig& cfg, const std::filesystem::path& dir, const std::string& split,
                                  std::size_t per_class, std::uint64_t stream_base, std::size_t& written) {
  DatasetManifest m;
  for (const auto& c : cfg.classes) m.classes.push_back(c.name);
  m.frames_per_clip = cfg.frames;
  m.height = cfg.height;
  m.width = cfg.width;
  m.streams = {"rgb"};
  if (cfg.with_flow) m.streams.push_back("flow");
  std::filesystem::create_directories(dir / "clips");
  std::size_t index = 0;
  for (std::size_t cls = 0; cls < cfg.classes.size(); ++cls) {
    for (std::size_t i = 0; i < per_class; ++i, ++index) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05zu", split.c_str(), index);
      const auto clip = synthesize_clip(cfg, cls, stream_base + index);
      ManifestClip mc;
      mc.id = id;
      mc.video = id;
      mc.label = cls;
      const std::string rgb = std::string("clips/") + id + "_rgb.vnnt";
      save_tensor(dir / rgb, clip.rgb);
      mc.files["rgb"] = rgb;
      if (cfg.with_flow) {
        const std::string flow = std::string("clips/") + id + "_flow.vnnt";
        save_tensor(dir / flow, clip.flow);
        mc.files["flow"] = flow;
      }
      m.clips.push_back(std::move(mc));
      ++written;
    }
  }
  const auto path = dir / (split + ".json");
  write_manifest(path, m);
  return path;
}

}  // namespace

SyntheticOutput gen_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  // Fail on impossible trajectories before touching the filesystem.
  for (std::size_t cls = 0; cls < cfg.classes.size(); ++cls) (void)synthesize_clip(cfg, cls, 0);
  SyntheticOutput out;
  std::filesystem::create_directories(out_dir);
  out.train_manifest = write_split(cfg, out_dir, "train", cfg.clips_per_class, 0, out.clips_written);
  if (cfg.test_clips_per_class > 0) {
    out.test_manifest = write_split(cfg, out_dir, "test", cfg.test_clips_per_class, 1'000'000, out.clips_written);
  }
  return out;
}

}  // namespace vnn
