#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "vnn/dataset.hpp"
#include "vnn/model.hpp"
#include "vnn/trainer.hpp"

namespace vnn {

// Experiment description read by the command-line tool:
//
//   {"model": {"input_shape": [C,T,H,W], "layers": [...], "pooling": "flatten",
//              "classes": 2, "init_seed": 1, "two_stream": {...}},
//    "train": {"learning_rate": 0.01, ...},
//    "data": {"train": "train.json", "eval": "test.json"}}
//
// Layer channel counts are chained: each layer's in_channels is the previous
// out_channels. Unknown keys anywhere are rejected with ConfigError.
struct RunConfig {
  std::variant<CascadeConfig, TwoStreamConfig> model;
  std::uint64_t init_seed = 1;
  TrainConfig train;
  std::optional<std::filesystem::path> train_data;
  std::optional<std::filesystem::path> eval_data;
};

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

Model build_model(const RunConfig& config);

// {"classes": [{"name", "velocity": [vx, vy]}], "clips_per_class", "test_clips_per_class",
//  "frames", "height", "width", "noise_sigma", "blob_sigma", "seed", "with_flow"}
SyntheticConfig parse_synthetic_config(std::string_view json_text);
SyntheticConfig load_synthetic_config(const std::filesystem::path& path);

}  // namespace vnn
