#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "vnn/cascade.hpp"
#include "vnn/errors.hpp"
#include "vnn/io.hpp"
#include "vnn/oracle.hpp"
#include "vnn/rng.hpp"
#include "vnn/run_config.hpp"
#include "vnn/trainer.hpp"

using nlohmann::json;

namespace {

enum Exit { ok = 0, check_failed = 1, config_error = 2, runtime_error = 3 };

int emit(const json& doc, int code = ok) {
  std::cout << doc.dump(2) << '\n';
  return code;
}

json param_json(const vnn::ParamCount& pc) {
  return {{"per_layer", pc.per_layer},
          {"total", pc.total},
          {"head", pc.head},
          {"full_kth_order", pc.full_kth_order},
          {"full_kth_window", pc.full_kth_window},
          {"full_kth_equiv", pc.full_kth_equiv},
          {"full_kth_saturated", pc.full_kth_saturated}};
}

json stability_json(const vnn::StabilityReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers) layers.push_back({{"linear_l1", l.linear_l1}, {"quad_l1", l.quad_l1}, {"bound", l.bound}});
  return {{"input_bound", r.input_bound}, {"layers", layers}, {"end_to_end", r.end_to_end}, {"finite", r.finite}};
}

json order_json(const vnn::OrderReport& r) {
  json j{{"layers", r.layers}, {"degree_bound", r.degree_bound}};
  j["nominal_order"] = r.nominal_order ? json(*r.nominal_order) : json(nullptr);
  return j;
}

json eval_json(const vnn::EvalReport& r) {
  return {{"clips", r.clips},
          {"accuracy", r.accuracy},
          {"video_accuracy", r.video_accuracy},
          {"per_class_accuracy", r.per_class_accuracy},
          {"confusion", r.confusion}};
}

// --- subcommands -----------------------------------------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = vnn::load_synthetic_config(config_path);
  const auto out = vnn::gen_synthetic(cfg, out_dir);
  json j{{"manifest", out.train_manifest.string()}, {"clips", out.clips_written}};
  j["test_manifest"] = out.test_manifest ? json(out.test_manifest->string()) : json(nullptr);
  return emit(j);
}

struct TrainArgs {
  std::string config, data, eval, out, report, resume;
  std::optional<std::size_t> start_epoch;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = vnn::load_run_config(a.config);
  if (!a.data.empty()) cfg.train_data = a.data;
  if (!a.eval.empty()) cfg.eval_data = a.eval;
  if (!cfg.train_data) throw vnn::ConfigError("no training data: pass --data or set data.train");
  if (a.start_epoch) cfg.train.start_epoch = *a.start_epoch;

  vnn::Model model = a.resume.empty() ? vnn::build_model(cfg) : vnn::load_model(a.resume);
  const auto train_set = vnn::load_dataset(*cfg.train_data);
  std::optional<vnn::Dataset> eval_set;
  if (cfg.eval_data) eval_set = vnn::load_dataset(*cfg.eval_data);

  std::ofstream report(a.report);
  if (!report) throw vnn::Error("cannot write report " + a.report);
  const auto result = vnn::train(model, train_set, cfg.train, eval_set ? &*eval_set : nullptr,
                                 [&](const vnn::EpochRecord& r) {
                                   report << vnn::to_json_line(r) << '\n';
                                   report.flush();
                                   std::cerr << vnn::to_json_line(r) << '\n';
                                 });
  vnn::save_model(a.out, model);
  const auto& last = result.epochs.back();
  json j{{"model", a.out},
         {"report", a.report},
         {"epochs", result.epochs.size()},
         {"census", result.census},
         {"train_loss", last.train_loss},
         {"train_acc", last.train_acc}};
  j["eval_acc"] = last.eval_acc ? json(*last.eval_acc) : json(nullptr);
  return emit(j);
}

int cmd_eval(const std::string& model_path, const std::string& data) {
  const auto model = vnn::load_model(model_path);
  const auto set = vnn::load_dataset(data);
  return emit(eval_json(vnn::evaluate(model, set, vnn::resolve_threads(0))));
}

int cmd_count_params(const std::string& config_path) {
  const auto cfg = vnn::load_run_config(config_path);
  const auto model = vnn::build_model(cfg);
  json j;
  if (const auto* c = std::get_if<vnn::CascadeConfig>(&cfg.model)) {
    j = param_json(vnn::param_count(*c));
  } else {
    const auto& ts = std::get<vnn::TwoStreamConfig>(cfg.model);
    const auto rgb = vnn::param_count(vnn::CascadeConfig{ts.rgb, ts.pooling, ts.num_classes});
    const auto flow = vnn::param_count(vnn::CascadeConfig{ts.flow, ts.pooling, ts.num_classes});
    std::uint64_t fusion = 0;
    if (ts.mode.kind == vnn::FusionKind::volterra) {
      fusion = vnn::layer_param_count(ts.fusion_layer.geometry, ts.fusion_layer.quadratic, vnn::Pairing::cross_channel);
    }
    const auto& net = std::get<vnn::TwoStreamNetwork>(model);
    const std::uint64_t head = net.head.weights.size() + net.head.biases.size() + net.flow_head.weights.size() +
                               net.flow_head.biases.size();
    j = {{"rgb", param_json(rgb)},
         {"flow", param_json(flow)},
         {"fusion", fusion},
         {"total", rgb.total + flow.total + fusion},
         {"head", head}};
  }
  j["census"] = vnn::census(model);
  return emit(j);
}

json stability_of(const vnn::Model& model, double bound, bool& finite) {
  if (const auto* net = std::get_if<vnn::CascadeNetwork>(&model)) {
    const auto r = vnn::stability_report(*net, bound);
    finite = r.finite;
    return stability_json(r);
  }
  const auto& net = std::get<vnn::TwoStreamNetwork>(model);
  const auto rgb = vnn::stability_report(net.rgb_layers, bound);
  const auto flow = vnn::stability_report(net.flow_layers, bound);
  json j{{"rgb", stability_json(rgb)}, {"flow", stability_json(flow)}};
  double end = std::max(rgb.end_to_end, flow.end_to_end);
  finite = rgb.finite && flow.finite;
  if (net.config.mode.kind == vnn::FusionKind::volterra) {
    const auto fusion = vnn::stability_report(std::span(&net.fusion, 1), end);
    j["fusion"] = stability_json(fusion);
    end = fusion.end_to_end;
    finite = finite && fusion.finite;
  }
  j["end_to_end"] = end;
  j["finite"] = finite;
  return j;
}

int cmd_check_stability(const std::string& model_path, const std::string& config_path, double bound,
                        std::optional<double> limit) {
  if (model_path.empty() == config_path.empty()) throw vnn::ConfigError("pass exactly one of --model or --config");
  const vnn::Model model =
      model_path.empty() ? vnn::build_model(vnn::load_run_config(config_path)) : vnn::load_model(model_path);
  bool finite = true;
  json j = stability_of(model, bound, finite);
  bool pass = finite;
  if (limit) {
    const double end = j["end_to_end"].get<double>();
    pass = pass && end <= *limit;
    j["limit"] = *limit;
  }
  j["passed"] = pass;
  return emit(j, pass ? ok : check_failed);
}

vnn::Sample random_sample(const vnn::Model& model, std::uint64_t seed) {
  vnn::Rng rng(seed);
  vnn::Sample s;
  auto clip = [&](const vnn::Shape& shape) {
    auto t = vnn::Tensor::zeros(shape);
    for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  if (const auto* net = std::get_if<vnn::CascadeNetwork>(&model)) {
    s.rgb = clip(net->config.trunk.input_shape);
  } else {
    const auto& ts = std::get<vnn::TwoStreamNetwork>(model);
    s.rgb = clip(ts.config.rgb.input_shape);
    s.flow = clip(ts.config.flow.input_shape);
  }
  s.label = rng.below(vnn::num_classes(model));
  s.id = "grad-check";
  return s;
}

int cmd_grad_check(const std::string& config_path, double tolerance, std::uint64_t seed) {
  const auto cfg = vnn::load_run_config(config_path);
  const auto model = vnn::build_model(cfg);
  vnn::GradCheckOptions opt;
  opt.tolerance = tolerance;
  opt.lambda = cfg.train.lambda;
  opt.seed = seed;
  const auto r = vnn::grad_check(model, random_sample(model, seed), opt);
  json groups = json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"name", g.name},
                      {"checked", g.checked},
                      {"max_rel_error", g.max_rel_error},
                      {"worst_index", g.worst_index},
                      {"passed", g.passed}});
  }
  const auto* worst = r.worst();
  json j{{"tolerance", r.tolerance}, {"passed", r.passed}, {"groups", groups}};
  j["max_rel_error"] = worst ? worst->max_rel_error : 0.0;
  return emit(j, r.passed ? ok : check_failed);
}

int cmd_oracle(std::size_t trials, std::uint64_t seed) {
  const auto r = vnn::run_oracle_suite(seed, trials);
  json j{{"trials", r.trials},
         {"max_direct_vs_nested", r.max_direct_vs_nested},
         {"max_layer_vs_direct", r.max_layer_vs_direct},
         {"tolerance", r.tolerance},
         {"passed", r.passed()}};
  return emit(j, r.passed() ? ok : check_failed);
}

int cmd_order(const std::string& config_path, std::optional<std::size_t> layers) {
  if (config_path.empty() == !layers.has_value()) throw vnn::ConfigError("pass exactly one of --config or --layers");
  std::size_t z = layers.value_or(0);
  if (!config_path.empty()) {
    const auto cfg = vnn::load_run_config(config_path);
    if (const auto* c = std::get_if<vnn::CascadeConfig>(&cfg.model)) {
      z = c->trunk.layers.size();
    } else {
      const auto& ts = std::get<vnn::TwoStreamConfig>(cfg.model);
      z = std::max(ts.rgb.layers.size(), ts.flow.layers.size()) + (ts.mode.kind == vnn::FusionKind::volterra ? 1 : 0);
    }
  }
  if (z == 0) throw vnn::ConfigError("--layers must be >= 1");
  return emit(order_json(vnn::order_report(z)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volterra neural network toolkit"};
  app.require_subcommand(1);

  std::string config, out, data, model_path;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic moving-blob dataset");
  gen->add_option("--config", config, "Generator config (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();

  TrainArgs ta;
  std::size_t start_epoch = 0;
  auto* train = app.add_subcommand("train", "Train a network");
  train->add_option("--config", ta.config, "Run config (JSON)")->required();
  train->add_option("--data", ta.data, "Training manifest (overrides data.train)");
  train->add_option("--eval", ta.eval, "Evaluation manifest (overrides data.eval)");
  train->add_option("--out", ta.out, "Model file to write")->required();
  train->add_option("--report", ta.report, "Line-JSON epoch report to write")->required();
  train->add_option("--resume", ta.resume, "Continue from a saved model");
  auto* start_opt = train->add_option("--start-epoch", start_epoch, "Index of the first epoch when resuming");

  auto* eval = app.add_subcommand("eval", "Evaluate a saved model");
  eval->add_option("--model", model_path, "Model file")->required();
  eval->add_option("--data", data, "Dataset manifest")->required();

  auto* count = app.add_subcommand("count-params", "Parameter counts for a config");
  count->add_option("--config", config, "Run config (JSON)")->required();

  double bound = 1.0;
  std::optional<double> limit;
  auto* stab = app.add_subcommand("check-stability", "Bounded-input bounded-output bound of a network");
  stab->add_option("--model", model_path, "Model file");
  stab->add_option("--config", config, "Run config (JSON); the freshly initialised network is checked");
  stab->add_option("--bound", bound, "Input magnitude bound A")->required()->check(CLI::NonNegativeNumber);
  stab->add_option("--limit", limit, "Fail (exit 1) when the end-to-end bound exceeds this");

  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  auto* gc = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  gc->add_option("--config", config, "Run config (JSON)")->required();
  gc->add_option("--tolerance", tolerance, "Maximum relative error")->check(CLI::PositiveNumber);
  gc->add_option("--seed", seed, "Sample and coordinate seed");

  std::size_t trials = 100;
  auto* oracle = app.add_subcommand("oracle", "Cross-check the reference evaluators");
  oracle->add_option("--trials", trials, "Random systems to test");
  oracle->add_option("--seed", seed, "Seed");

  std::optional<std::size_t> layers;
  auto* order = app.add_subcommand("order", "Polynomial order of a cascade");
  order->add_option("--config", config, "Run config (JSON)");
  order->add_option("--layers", layers, "Number of layers Z");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*gen) return cmd_gen_data(config, out);
    if (*train) {
      if (*start_opt) ta.start_epoch = start_epoch;
      return cmd_train(ta);
    }
    if (*eval) return cmd_eval(model_path, data);
    if (*count) return cmd_count_params(config);
    if (*stab) return cmd_check_stability(model_path, config, bound, limit);
    if (*gc) return cmd_grad_check(config, tolerance, seed);
    if (*oracle) return cmd_oracle(trials, seed);
    if (*order) return cmd_order(config, layers);
  } catch (const vnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return emit({{"error", e.what()}, {"kind", "config"}}, config_error);
  } catch (const vnn::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return emit({{"error", e.what()}, {"kind", "divergence"}}, runtime_error);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return emit({{"error", e.what()}, {"kind", "runtime"}}, runtime_error);
  }
  return config_error;
}
