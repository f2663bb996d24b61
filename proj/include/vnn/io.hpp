#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vnn/model.hpp"
#include "vnn/tensor.hpp"

// Binary formats (all little-endian; full layout in docs/formats.md).
//
// VNNT tensor file:
//   "VNNT" | u16 version = 1 | u8 rank (>= 1) | rank x u32 dims | f32 payload
// VNNM model file:
//   "VNNM" | u16 version = 1 | header | u64 census | parameter blocks, each a
//   VNNT-framed block whose payload is f64 instead of f32.
namespace vnn {

inline constexpr std::uint16_t kFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_model(const Model& model);
Model decode_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace vnn
