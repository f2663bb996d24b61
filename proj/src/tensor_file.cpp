#include <fstream>
#include <iterator>

#include "byte_io.hpp"
#include "vnn/io.hpp"

namespace vnn {
namespace detail {

void write_tensor_block(ByteWriter& w, const Shape& shape, std::span<const double> values, Payload payload) {
  if (shape.empty()) throw ShapeError("tensor files need rank >= 1");
  if (shape.size() > 255) throw ShapeError("tensor rank exceeds 255");
  w.bytes("VNNT", 4);
  w.u16(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) {
    if (d == 0 || d > UINT32_MAX) throw ShapeError("tensor extent out of range for file format");
    w.u32(static_cast<std::uint32_t>(d));
  }
  for (double v : values) {
    if (payload == Payload::f32) {
      w.f32(static_cast<float>(v));
    } else {
      w.f64(v);
    }
  }
}

Tensor read_tensor_block(ByteReader& r, Payload payload) {
  r.expect_magic("VNNT");
  const std::size_t at_version = r.offset();
  if (const auto v = r.u16("version"); v != kFormatVersion) {
    throw FormatError("unsupported tensor version " + std::to_string(v), at_version);
  }
  const std::size_t at_rank = r.offset();
  const std::size_t rank = r.u8("rank");
  if (rank == 0) throw FormatError("rank-0 tensors are not allowed", at_rank);
  Shape shape(rank);
  for (auto& d : shape) {
    const std::size_t at = r.offset();
    d = r.u32("dims");
    if (d == 0) throw FormatError("zero extent", at);
  }
  const std::size_t n = shape_size(shape);
  const std::size_t width = payload == Payload::f32 ? 4 : 8;
  if (n > r.remaining() / width) throw FormatError("truncated payload", r.offset());
  std::vector<double> data(n);
  for (auto& v : data) v = payload == Payload::f32 ? static_cast<double>(r.f32("payload")) : r.f64("payload");
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace detail

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  detail::ByteWriter w;
  detail::write_tensor_block(w, t.shape(), t.data(), detail::Payload::f32);
  return std::move(w.data());
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  Tensor t = detail::read_tensor_block(r, detail::Payload::f32);
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensor payload", r.offset());
  return t;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace vnn
