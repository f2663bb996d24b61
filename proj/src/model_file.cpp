#include <string>

#include "byte_io.hpp"
#include "vnn/io.hpp"

namespace vnn {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::size_t kBlockHeader = 4 + 2 + 1;  // magic, version, rank; dims follow

enum class Partition : std::uint8_t { absent = 0, volterra = 1, concat = 2, weighted_average = 3 };

std::uint32_t narrow(std::size_t v) {
  if (v > UINT32_MAX) throw ConfigError("value exceeds u32 range of model format");
  return static_cast<std::uint32_t>(v);
}

void write_layer(ByteWriter& w, const LayerSpec& spec) {
  const auto& g = spec.geometry;
  w.u32(narrow(g.len_t));
  w.u32(narrow(g.half_h));
  w.u32(narrow(g.half_w));
  w.u32(narrow(g.in_channels));
  w.u32(narrow(g.out_channels));
  w.u8(spec.quadratic.kind == QuadraticKind::separable ? 1 : 0);
  w.u32(narrow(spec.quadratic.kind == QuadraticKind::separable ? spec.quadratic.rank : 0));
  w.u8(g.padding == Padding::zero_spatial ? 1 : 0);
  w.u8(g.temporal_mode == TemporalMode::non_overlapping ? 1 : 0);
}

template <class E>
E read_enum(ByteReader& r, const char* what, std::uint8_t max) {
  const std::size_t at = r.offset();
  const auto v = r.u8(what);
  if (v > max) throw FormatError(std::string("invalid ") + what + " " + std::to_string(v), at);
  return static_cast<E>(v);
}

LayerSpec read_layer(ByteReader& r) {
  LayerSpec spec;
  auto& g = spec.geometry;
  g.len_t = r.u32("len_t");
  g.half_h = r.u32("half_h");
  g.half_w = r.u32("half_w");
  g.in_channels = r.u32("in_channels");
  g.out_channels = r.u32("out_channels");
  const auto mode = read_enum<std::uint8_t>(r, "quadratic mode", 1);
  const auto rank = r.u32("rank");
  spec.quadratic = mode == 1 ? QuadraticSpec{QuadraticKind::separable, rank} : QuadraticSpec{QuadraticKind::exact, 1};
  g.padding = read_enum<Padding>(r, "padding", 1);
  g.temporal_mode = read_enum<TemporalMode>(r, "temporal mode", 1);
  return spec;
}

void write_trunk(ByteWriter& w, const TrunkConfig& t) {
  for (auto d : t.input_shape) w.u32(narrow(d));
  w.u32(narrow(t.layers.size()));
  for (const auto& l : t.layers) write_layer(w, l);
}

TrunkConfig read_trunk(ByteReader& r) {
  TrunkConfig t;
  t.input_shape.resize(4);
  for (auto& d : t.input_shape) d = r.u32("input shape");
  const std::size_t at = r.offset();
  const auto n = r.u32("layer count");
  if (n > r.remaining() / 23) throw FormatError("layer count exceeds file size", at);
  for (std::uint32_t i = 0; i < n; ++i) t.layers.push_back(read_layer(r));
  return t;
}

void write_head_dims(ByteWriter& w, const ClassifierHead& h) {
  w.u32(narrow(h.classes));
  w.u32(narrow(h.dim));
}

}  // namespace

std::vector<std::uint8_t> encode_model(const Model& model) {
  ByteWriter w;
  w.bytes("VNNM", 4);
  w.u16(kFormatVersion);
  if (const auto* net = std::get_if<CascadeNetwork>(&model)) {
    w.u8(0);
    w.u8(static_cast<std::uint8_t>(Partition::absent));
    w.u8(net->config.pooling == Pooling::spatial_mean ? 1 : 0);
    w.u32(narrow(net->config.num_classes));
    w.u8(1);
    write_trunk(w, net->config.trunk);
    w.u8(1);
    write_head_dims(w, net->head);
  } else {
    const auto& ts = std::get<TwoStreamNetwork>(model);
    const auto& cfg = ts.config;
    w.u8(1);
    const Partition part = cfg.mode.kind == FusionKind::volterra ? Partition::volterra
                           : cfg.mode.kind == FusionKind::concat ? Partition::concat
                                                                 : Partition::weighted_average;
    w.u8(static_cast<std::uint8_t>(part));
    w.u32(narrow(ts.rgb_channels()));
    w.u32(narrow(ts.flow_channels()));
    w.f64(cfg.mode.beta_rgb);
    w.f64(cfg.mode.beta_flow);
    w.u8(cfg.pooling == Pooling::spatial_mean ? 1 : 0);
    w.u32(narrow(cfg.num_classes));
    w.u8(2);
    write_trunk(w, cfg.rgb);
    write_trunk(w, cfg.flow);
    if (part == Partition::volterra) write_layer(w, cfg.fusion_layer);
    if (part == Partition::weighted_average) {
      w.u8(2);
      write_head_dims(w, ts.head);
      write_head_dims(w, ts.flow_head);
    } else {
      w.u8(1);
      write_head_dims(w, ts.head);
    }
  }
  const auto groups = parameter_groups(model);
  w.u64(census(model));
  for (const auto& g : groups) detail::write_tensor_block(w, g.shape, g.values, detail::Payload::f64);
  return std::move(w.data());
}

Model decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VNNM");
  const std::size_t at_version = r.offset();
  if (const auto v = r.u16("version"); v != kFormatVersion) {
    throw FormatError("unsupported model version " + std::to_string(v), at_version);
  }
  const std::size_t at_kind = r.offset();
  const auto kind = read_enum<std::uint8_t>(r, "model kind", 1);
  const auto part = read_enum<Partition>(r, "stream partition", 3);
  if ((kind == 0) != (part == Partition::absent)) {
    throw FormatError("stream partition does not match model kind", at_kind);
  }
  std::uint32_t rgb_channels = 0, flow_channels = 0;
  double beta_rgb = 0.5, beta_flow = 0.5;
  if (part != Partition::absent) {
    rgb_channels = r.u32("rgb channels");
    flow_channels = r.u32("flow channels");
    beta_rgb = r.f64("beta_rgb");
    beta_flow = r.f64("beta_flow");
  }
  const auto pooling = read_enum<Pooling>(r, "pooling", 1);
  const auto classes = r.u32("classes");
  const std::size_t at_trunks = r.offset();
  const auto trunks = r.u8("trunk count");
  if (trunks != (kind == 0 ? 1 : 2)) throw FormatError("unexpected trunk count", at_trunks);

  Model model;
  const std::size_t at_config = r.offset();
  try {
    if (kind == 0) {
      CascadeConfig cfg;
      cfg.trunk = read_trunk(r);
      cfg.pooling = pooling;
      cfg.num_classes = classes;
      model = build(cfg, 0);
    } else {
      TwoStreamConfig cfg;
      cfg.rgb = read_trunk(r);
      cfg.flow = read_trunk(r);
      cfg.pooling = pooling;
      cfg.num_classes = classes;
      cfg.mode.kind = part == Partition::volterra ? FusionKind::volterra
                      : part == Partition::concat ? FusionKind::concat
                                                  : FusionKind::weighted_average;
      cfg.mode.beta_rgb = beta_rgb;
      cfg.mode.beta_flow = beta_flow;
      if (part == Partition::volterra) cfg.fusion_layer = read_layer(r);
      auto net = build_two_stream(cfg, 0);
      if (net.rgb_channels() != rgb_channels || net.flow_channels() != flow_channels) {
        throw FormatError("stream partition disagrees with trunk channels", at_config);
      }
      model = std::move(net);
    }
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model configuration: ") + e.what(), at_config);
  }

  auto groups = parameter_groups(model);
  const std::size_t at_heads = r.offset();
  const auto heads = r.u8("head count");
  std::vector<const ClassifierHead*> expect_heads;
  if (const auto* ts = std::get_if<TwoStreamNetwork>(&model)) {
    expect_heads.push_back(&ts->head);
    if (ts->config.mode.kind == FusionKind::weighted_average) expect_heads.push_back(&ts->flow_head);
  } else {
    expect_heads.push_back(&std::get<CascadeNetwork>(model).head);
  }
  if (heads != expect_heads.size()) throw FormatError("unexpected head count", at_heads);
  for (const auto* h : expect_heads) {
    const std::size_t at = r.offset();
    const auto i = r.u32("head classes");
    const auto d = r.u32("head dim");
    if (i != h->classes || d != h->dim) throw FormatError("head dimensions disagree with configuration", at);
  }

  const std::size_t at_census = r.offset();
  const auto declared = r.u64("census");
  std::uint64_t expected = 0;
  std::uint64_t framing = 0;
  for (const auto& g : groups) {
    expected += g.values.size();
    framing += kBlockHeader + 4 * g.shape.size();
  }
  if (declared != expected) {
    throw FormatError("census error: header declares " + std::to_string(declared) + " parameters, configuration has " +
                          std::to_string(expected),
                      at_census);
  }
  if (r.remaining() != framing + 8 * declared) {
    throw FormatError("census error: parameter section is " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(framing + 8 * declared),
                      r.offset());
  }
  for (auto& g : groups) {
    const std::size_t at = r.offset();
    const Tensor block = detail::read_tensor_block(r, detail::Payload::f64);
    if (block.shape() != g.shape) throw FormatError("parameter block '" + g.name + "' has the wrong shape", at);
    std::copy(block.data().begin(), block.data().end(), g.values.begin());
  }
  return model;
}

void save_model(const std::filesystem::path& path, const Model& model) { write_file(path, encode_model(model)); }

Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace vnn
