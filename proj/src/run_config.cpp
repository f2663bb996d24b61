#include "vnn/run_config.hpp"

#include <initializer_list>
#include <json.hpp>

#include "vnn/errors.hpp"
#include "vnn/io.hpp"

namespace vnn {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return get<T>(j, key, where, T{});
}

std::size_t get_count(const json& j, const char* key, const std::string& where, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

Shape parse_shape(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(where + ": expected [C, T, H, W]");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_integer() || d.get<long long>() <= 0) throw ConfigError(where + ": dims must be positive");
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

LayerSpec parse_layer(const json& j, const std::string& where, std::size_t in_channels) {
  require_object(j, where);
  reject_unknown(j, where,
                 {"len_t", "half_h", "half_w", "out_channels", "quadratic", "rank", "padding", "temporal_mode"});
  LayerSpec spec;
  auto& g = spec.geometry;
  g.len_t = get_count(j, "len_t", where, 1);
  g.half_h = get_count(j, "half_h", where, 0);
  g.half_w = get_count(j, "half_w", where, 0);
  g.in_channels = in_channels;
  g.out_channels = get_count(j, "out_channels", where, 1);
  const auto quad = get<std::string>(j, "quadratic", where, "exact");
  if (quad == "exact") {
    spec.quadratic.kind = QuadraticKind::exact;
    if (j.contains("rank")) throw ConfigError(where + ": rank only applies to separable layers");
  } else if (quad == "separable") {
    spec.quadratic.kind = QuadraticKind::separable;
    spec.quadratic.rank = get_count(j, "rank", where, 1);
  } else {
    throw ConfigError(where + ".quadratic: expected \"exact\" or \"separable\"");
  }
  const auto pad = get<std::string>(j, "padding", where, "valid");
  if (pad == "valid") {
    g.padding = Padding::valid;
  } else if (pad == "zero") {
    g.padding = Padding::zero_spatial;
  } else {
    throw ConfigError(where + ".padding: expected \"valid\" or \"zero\"");
  }
  const auto mode = get<std::string>(j, "temporal_mode", where, "overlapping");
  if (mode == "overlapping") {
    g.temporal_mode = TemporalMode::overlapping;
  } else if (mode == "non_overlapping") {
    g.temporal_mode = TemporalMode::non_overlapping;
  } else {
    throw ConfigError(where + ".temporal_mode: expected \"overlapping\" or \"non_overlapping\"");
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (spec.quadratic.kind == QuadraticKind::separable && spec.quadratic.rank == 0) {
    throw ConfigError(where + ": rank must be >= 1");
  }
  return spec;
}

TrunkConfig parse_trunk(const json& layers, const Shape& input, const std::string& where) {
  if (!layers.is_array() || layers.empty()) throw ConfigError(where + ": expected a non-empty list of layers");
  TrunkConfig trunk;
  trunk.input_shape = input;
  std::size_t channels = input[0];
  for (std::size_t z = 0; z < layers.size(); ++z) {
    auto spec = parse_layer(layers[z], where + "[" + std::to_string(z) + "]", channels);
    channels = spec.geometry.out_channels;
    trunk.layers.push_back(spec);
  }
  return trunk;
}

Pooling parse_pooling(const json& j, const std::string& where) {
  const auto p = get<std::string>(j, "pooling", where, "flatten");
  if (p == "flatten") return Pooling::flatten;
  if (p == "spatial_mean") return Pooling::spatial_mean;
  throw ConfigError(where + ".pooling: expected \"flatten\" or \"spatial_mean\"");
}

std::variant<CascadeConfig, TwoStreamConfig> parse_model(const json& j, std::uint64_t& init_seed) {
  const std::string where = "model";
  require_object(j, where);
  reject_unknown(j, where, {"input_shape", "layers", "pooling", "classes", "init_seed", "two_stream"});
  if (!j.contains("input_shape")) throw ConfigError("model: missing 'input_shape'");
  if (!j.contains("layers")) throw ConfigError("model: missing 'layers'");
  const Shape input = parse_shape(j.at("input_shape"), "model.input_shape");
  const auto trunk = parse_trunk(j.at("layers"), input, "model.layers");
  const Pooling pooling = parse_pooling(j, where);
  const std::size_t classes = get_count(j, "classes", where, 2);
  init_seed = get<std::uint64_t>(j, "init_seed", where, 1);

  if (!j.contains("two_stream")) {
    CascadeConfig cfg{trunk, pooling, classes};
    cfg.validate();
    return cfg;
  }
  const auto& ts = j.at("two_stream");
  const std::string tw = "model.two_stream";
  require_object(ts, tw);
  reject_unknown(ts, tw, {"flow_input_shape", "flow_layers", "fusion", "fusion_layer", "beta_rgb"});
  TwoStreamConfig cfg;
  cfg.rgb = trunk;
  const Shape flow_input = ts.contains("flow_input_shape") ? parse_shape(ts.at("flow_input_shape"), tw + ".flow_input_shape")
                                                           : input;
  cfg.flow = parse_trunk(ts.contains("flow_layers") ? ts.at("flow_layers") : j.at("layers"), flow_input,
                         tw + ".flow_layers");
  cfg.pooling = pooling;
  cfg.num_classes = classes;
  const auto fusion = get<std::string>(ts, "fusion", tw, "volterra");
  if (fusion == "volterra") {
    cfg.mode.kind = FusionKind::volterra;
    if (!ts.contains("fusion_layer")) throw ConfigError(tw + ": volterra fusion needs 'fusion_layer'");
    const std::size_t stacked = cfg.rgb.output_shape()[0] + cfg.flow.output_shape()[0];
    cfg.fusion_layer = parse_layer(ts.at("fusion_layer"), tw + ".fusion_layer", stacked);
  } else if (fusion == "concat") {
    cfg.mode.kind = FusionKind::concat;
  } else if (fusion == "weighted_average") {
    cfg.mode.kind = FusionKind::weighted_average;
    cfg.mode.beta_rgb = get<double>(ts, "beta_rgb", tw, 0.5);
    cfg.mode.beta_flow = 1.0 - cfg.mode.beta_rgb;
  } else {
    throw ConfigError(tw + ".fusion: expected \"volterra\", \"concat\" or \"weighted_average\"");
  }
  if (fusion != "volterra" && ts.contains("fusion_layer")) throw ConfigError(tw + ": fusion_layer needs volterra fusion");
  if (fusion != "weighted_average" && ts.contains("beta_rgb")) {
    throw ConfigError(tw + ": beta_rgb needs weighted_average fusion");
  }
  cfg.validate();
  return cfg;
}

TrainConfig parse_train(const json& j) {
  const std::string where = "train";
  require_object(j, where);
  reject_unknown(j, where,
                 {"learning_rate", "lambda", "batch_size", "epochs", "seed", "eval_every", "lr_decay", "threads"});
  TrainConfig t;
  t.learning_rate = get<double>(j, "learning_rate", where, t.learning_rate);
  t.lambda = get<double>(j, "lambda", where, t.lambda);
  t.batch_size = get_count(j, "batch_size", where, t.batch_size);
  t.epochs = get_count(j, "epochs", where, t.epochs);
  t.seed = get<std::uint64_t>(j, "seed", where, t.seed);
  t.eval_every = get_count(j, "eval_every", where, t.eval_every);
  t.lr_decay = get<double>(j, "lr_decay", where, t.lr_decay);
  t.threads = get_count(j, "threads", where, t.threads);
  t.validate();
  return t;
}

json parse_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  const json j = parse_text(text);
  require_object(j, "config");
  reject_unknown(j, "config", {"model", "train", "data"});
  if (!j.contains("model")) throw ConfigError("config: missing 'model'");
  RunConfig cfg;
  cfg.model = parse_model(j.at("model"), cfg.init_seed);
  if (j.contains("train")) cfg.train = parse_train(j.at("train"));
  if (j.contains("data")) {
    const auto& d = j.at("data");
    require_object(d, "data");
    reject_unknown(d, "data", {"train", "eval"});
    if (d.contains("train")) cfg.train_data = base_dir / require<std::string>(d, "train", "data");
    if (d.contains("eval")) cfg.eval_data = base_dir / require<std::string>(d, "eval", "data");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path.parent_path());
}

Model build_model(const RunConfig& config) {
  if (const auto* c = std::get_if<CascadeConfig>(&config.model)) return build(*c, config.init_seed);
  return build_two_stream(std::get<TwoStreamConfig>(config.model), config.init_seed);
}

SyntheticConfig parse_synthetic_config(std::string_view text) {
  const json j = parse_text(text);
  const std::string where = "synthetic";
  require_object(j, where);
  reject_unknown(j, where,
                 {"classes", "clips_per_class", "test_clips_per_class", "frames", "height", "width", "noise_sigma",
                  "blob_sigma", "seed", "with_flow"});
  SyntheticConfig cfg;
  if (!j.contains("classes") || !j.at("classes").is_array()) throw ConfigError(where + ": 'classes' must be a list");
  for (const auto& c : j.at("classes")) {
    const std::string cw = where + ".classes";
    require_object(c, cw);
    reject_unknown(c, cw, {"name", "velocity"});
    MotionClass mc;
    mc.name = require<std::string>(c, "name", cw);
    const auto v = require<std::vector<double>>(c, "velocity", cw);
    if (v.size() != 2) throw ConfigError(cw + ".velocity: expected [vx, vy]");
    mc.velocity_x = v[0];
    mc.velocity_y = v[1];
    cfg.classes.push_back(mc);
  }
  cfg.clips_per_class = get_count(j, "clips_per_class", where, cfg.clips_per_class);
  cfg.test_clips_per_class = get_count(j, "test_clips_per_class", where, cfg.test_clips_per_class);
  cfg.frames = get_count(j, "frames", where, cfg.frames);
  cfg.height = get_count(j, "height", where, cfg.height);
  cfg.width = get_count(j, "width", where, cfg.width);
  cfg.noise_sigma = get<double>(j, "noise_sigma", where, cfg.noise_sigma);
  cfg.blob_sigma = get<double>(j, "blob_sigma", where, cfg.blob_sigma);
  cfg.seed = get<std::uint64_t>(j, "seed", where, cfg.seed);
  cfg.with_flow = get<bool>(j, "with_flow", where, cfg.with_flow);
  cfg.validate();
  return cfg;
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_synthetic_config(text);
}

}  // namespace vnn
