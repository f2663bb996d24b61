#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vnn/model.hpp"

namespace vnn {

struct ManifestClip {
  std::string id;
  std::size_t label = 0;
  std::string video;                          // optional; defaults to id
  std::map<std::string, std::string> files;   // stream name -> path relative to the manifest
};

struct DatasetManifest {
  std::vector<std::string> classes;
  std::size_t frames_per_clip = 0;
  std::optional<std::size_t> height;
  std::optional<std::size_t> width;
  std::vector<std::string> streams;  // subset of {"rgb", "flow"}
  std::vector<ManifestClip> clips;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct Dataset {
  std::vector<std::string> classes;
  std::size_t frames_per_clip = 0;
  std::vector<std::string> streams;
  std::vector<Sample> samples;
};

// Loads and shape-checks every clip. Clip tensors may be [T, H, W] (one
// channel) or [C, T, H, W]. Throws LoadError naming the offending clip.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Synthetic moving-blob videos ---------------------------------------------------

struct MotionClass {
  std::string name;
  double velocity_x = 0.0;  // columns per frame
  double velocity_y = 0.0;  // rows per frame
};

struct SyntheticConfig {
  std::vector<MotionClass> classes;
  std::size_t clips_per_class = 10;
  std::size_t test_clips_per_class = 0;  // > 0 also writes test.json
  std::size_t frames = 8;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise_sigma = 0.05;
  double blob_sigma = 1.5;
  std::uint64_t seed = 1;
  bool with_flow = false;

  void validate() const;
};

struct SyntheticClip {
  Tensor rgb;   // [1, T, H, W]
  Tensor flow;  // [1, T, H, W], x[t+1] - x[t] with the last difference repeated
  std::vector<std::array<double, 2>> centers;  // (row, col) per frame
};

// One clip of class `cls`, deterministic in (config.seed, stream).
SyntheticClip synthesize_clip(const SyntheticConfig& config, std::size_t cls, std::uint64_t stream);

struct SyntheticOutput {
  std::filesystem::path train_manifest;
  std::optional<std::filesystem::path> test_manifest;
  std::size_t clips_written = 0;
};

SyntheticOutput gen_synthetic(const SyntheticConfig& config, const std::filesystem::path& out_dir);

}  // namespace vnn
