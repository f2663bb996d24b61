#include "vnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <map>
#include <thread>

#include "parallel.hpp"
#include "vnn/rng.hpp"

namespace vnn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["learning_rate"] = r.learning_rate;
  j["train_loss"] = r.train_loss;
  j["train_acc"] = r.train_acc;
  j["eval_acc"] = r.eval_acc ? nlohmann::json(*r.eval_acc) : nlohmann::json(nullptr);
  j["seconds"] = r.seconds;
  j["shuffle_seed"] = r.shuffle_seed;
  return j.dump();
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("VNN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
  return order;
}

namespace {

std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

bool parameters_finite(const Model& model) {
  for (const auto& g : parameter_groups(model)) {
    for (double v : g.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

BatchGradient batch_gradient(const Model& model, std::span<const Sample* const> batch, double lambda,
                             std::size_t threads) {
  if (batch.empty()) throw DomainError("empty batch");
  std::vector<SampleGradients> per(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) { per[i] = sample_gradients(model, *batch[i]); });

  const auto params = parameter_groups(model);
  BatchGradient out;
  out.groups.resize(params.size());
  for (std::size_t g = 0; g < params.size(); ++g) out.groups[g].assign(params[g].values.size(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < per.size(); ++i) {
    loss += per[i].loss;
    if (argmax(per[i].probabilities) == batch[i]->label) ++out.correct;
    for (std::size_t g = 0; g < params.size(); ++g) {
      auto& acc = out.groups[g];
      const auto& src = per[i].groups[g];
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t g = 0; g < params.size(); ++g) {
    auto& acc = out.groups[g];
    const auto values = params[g].values;
    for (std::size_t k = 0; k < acc.size(); ++k) {
      acc[k] *= inv;
      if (params[g].decayed) acc[k] += lambda * values[k];
    }
  }
  out.objective = loss * inv + lambda * decay_term(model);
  return out;
}

void apply_step(Model& model, const std::vector<std::vector<double>>& gradient, double eta) {
  auto params = parameter_groups(model);
  if (params.size() != gradient.size()) throw ShapeError("gradient does not match parameter groups");
  for (std::size_t g = 0; g < params.size(); ++g) {
    auto values = params[g].values;
    if (gradient[g].size() != values.size()) throw ShapeError("gradient group size mismatch");
    for (std::size_t k = 0; k < values.size(); ++k) values[k] -= eta * gradient[g][k];
  }
}

TrainReport train(Model& model, const Dataset& data, const TrainConfig& config, const Dataset* eval,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.samples.empty()) throw DomainError("training set is empty");
  const std::size_t threads = resolve_threads(config.threads);
  const std::size_t n = data.samples.size();
  TrainReport report;
  report.census = census(model);
  const std::size_t last = config.start_epoch + config.epochs;
  for (std::size_t epoch = config.start_epoch; epoch < last; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = config.learning_rate * std::pow(config.lr_decay, static_cast<double>(epoch));
    rec.shuffle_seed = derive_seed(config.seed, epoch);
    const auto order = epoch_order(n, config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0, correct = 0;
    std::vector<const Sample*> batch;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(n, start + config.batch_size); ++i) {
        batch.push_back(&data.samples[order[i]]);
      }
      const std::string where = "epoch " + std::to_string(epoch) + ", step " + std::to_string(steps);
      BatchGradient g;
      try {
        g = batch_gradient(model, batch, config.lambda, threads);
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at " + where + " (" + e.what() + ")");
      }
      if (!std::isfinite(g.objective) || g.objective > 1e6) {
        throw DivergenceError("training diverged at " + where + " (objective " + std::to_string(g.objective) +
                              ", learning rate " + std::to_string(rec.learning_rate) + ")");
      }
      apply_step(model, g.groups, rec.learning_rate);
      if (!parameters_finite(model)) {
        throw DivergenceError("training diverged at " + where + " (non-finite weights after the update, learning rate " +
                              std::to_string(rec.learning_rate) + ")");
      }
      loss_sum += g.objective;
      correct += g.correct;
      ++steps;
    }
    rec.train_loss = loss_sum / static_cast<double>(steps);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    const std::size_t done = epoch - config.start_epoch + 1;
    if ((config.eval_every > 0 && done % config.eval_every == 0) || epoch + 1 == last) {
      try {
        rec.eval_acc = evaluate(model, eval ? *eval : data, threads).accuracy;
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + " (" + e.what() + ")");
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return report;
}

const GroupCheck* GradCheckReport::worst() const {
  const GroupCheck* w = nullptr;
  for (const auto& g : groups) {
    if (!w || g.max_rel_error > w->max_rel_error) w = &g;
  }
  return w;
}

GradCheckReport grad_check(const Model& model, const Sample& sample, const GradCheckOptions& opt) {
  if (!(opt.tolerance > 0.0)) throw DomainError("grad_check tolerance must be > 0");
  auto analytic = sample_gradients(model, sample).groups;
  {
    const auto params = parameter_groups(model);
    for (std::size_t g = 0; g < params.size(); ++g) {
      if (!params[g].decayed) continue;
      for (std::size_t k = 0; k < analytic[g].size(); ++k) analytic[g][k] += opt.lambda * params[g].values[k];
    }
  }
  if (opt.corrupt) opt.corrupt(analytic);

  Model work = model;
  auto params = parameter_groups(work);
  auto objective = [&] { return sample_loss(work, sample) + opt.lambda * decay_term(work); };
  Rng rng(opt.seed);
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (std::size_t g = 0; g < params.size(); ++g) {
    const auto values = params[g].values;
    const std::size_t n = values.size();
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (n > opt.coords_per_group) {
      // Partial Fisher-Yates for a random subset; the largest analytic entry always joins it.
      for (std::size_t i = 0; i < opt.coords_per_group; ++i) std::swap(coords[i], coords[i + rng.below(n - i)]);
      coords.resize(opt.coords_per_group);
      const auto big = static_cast<std::size_t>(
          std::max_element(analytic[g].begin(), analytic[g].end(),
                           [](double a, double b) { return std::abs(a) < std::abs(b); }) -
          analytic[g].begin());
      if (std::find(coords.begin(), coords.end(), big) == coords.end()) coords.back() = big;
    }
    GroupCheck check;
    check.name = params[g].name;
    for (const std::size_t k : coords) {
      const double orig = values[k];
      values[k] = orig + opt.step;
      const double up = objective();
      values[k] = orig - opt.step;
      const double down = objective();
      values[k] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[g][k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-5});
      if (rel > check.max_rel_error) {
        check.max_rel_error = rel;
        check.worst_index = k;
      }
      ++check.checked;
    }
    check.passed = check.max_rel_error <= opt.tolerance;
    report.passed = report.passed && check.passed;
    report.groups.push_back(std::move(check));
  }
  return report;
}

EvalReport evaluate(const Model& model, const Dataset& data, std::size_t threads) {
  if (data.samples.empty()) throw DomainError("evaluation set is empty");
  const std::size_t classes = num_classes(model);
  std::vector<std::vector<double>> probs(data.samples.size());
  detail::parallel_for(data.samples.size(), threads, [&](std::size_t i) { probs[i] = predict(model, data.samples[i]); });

  EvalReport r;
  r.clips = data.samples.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  struct Votes {
    std::vector<std::size_t> count;
    std::vector<double> mass;
    std::size_t label = 0;
  };
  std::map<std::string, Votes> videos;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto& s = data.samples[i];
    const std::size_t pred = argmax(probs[i]);
    if (s.label >= classes) throw DomainError("sample '" + s.id + "' label exceeds class count");
    ++r.confusion[s.label][pred];
    if (pred == s.label) ++correct;
    auto& v = videos[s.video.empty() ? s.id : s.video];
    if (v.count.empty()) {
      v.count.assign(classes, 0);
      v.mass.assign(classes, 0.0);
      v.label = s.label;
    }
    ++v.count[pred];
    for (std::size_t c = 0; c < classes; ++c) v.mass[c] += probs[i][c];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.clips);
  r.per_class_accuracy.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t total = 0;
    for (auto v : r.confusion[c]) total += v;
    if (total) r.per_class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(total);
  }
  std::size_t video_correct = 0;
  for (const auto& [id, v] : videos) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (v.count[c] > v.count[best] || (v.count[c] == v.count[best] && v.mass[c] > v.mass[best])) best = c;
    }
    if (best == v.label) ++video_correct;
  }
  r.video_accuracy = static_cast<double>(video_correct) / static_cast<double>(videos.size());
  return r;
}

}  // namespace vnn
