#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vnn/dataset.hpp"
#include "vnn/model.hpp"

namespace vnn {

struct TrainConfig {
  double learning_rate = 0.01;  // eta
  double lambda = 0.0;          // weight decay
  std::size_t batch_size = 8;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;  // epochs between evaluation passes
  double lr_decay = 0.99;      // eta_e = eta * lr_decay^e
  std::size_t threads = 0;     // 0: VNN_THREADS, else hardware concurrency
  std::size_t start_epoch = 0;  // resuming: index of the first epoch to run

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean regularized objective over the epoch's steps
  double train_acc = 0.0;   // accuracy of the forward passes made while training
  std::optional<double> eval_acc;
  double seconds = 0.0;
  std::uint64_t shuffle_seed = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::uint64_t census = 0;
};

// One JSON object per line.
std::string to_json_line(const EpochRecord& record);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch gradient descent on the regularized objective. Deterministic
// for a given (config, dataset): per-sample gradients may be computed on
// several threads but are reduced in sample order. Throws DivergenceError if
// the loss becomes non-finite or exceeds 1e6.
TrainReport train(Model& model, const Dataset& data, const TrainConfig& config, const Dataset* eval = nullptr,
                  const EpochCallback& on_epoch = {});

// Fisher-Yates permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

// Mean gradient of the regularized objective over `batch`, aligned with
// parameter_groups(). Also returns the objective value.
struct BatchGradient {
  double objective = 0.0;
  std::size_t correct = 0;
  std::vector<std::vector<double>> groups;
};
BatchGradient batch_gradient(const Model& model, std::span<const Sample* const> batch, double lambda,
                             std::size_t threads = 1);

// Applies p -= eta * g to every parameter group.
void apply_step(Model& model, const std::vector<std::vector<double>>& gradient, double eta);

// Gradient verification --------------------------------------------------------

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-6;
  double lambda = 0.0;
  std::size_t coords_per_group = 200;
  std::uint64_t seed = 7;
  // Test hook: edits the analytic gradient before comparison.
  std::function<void(std::vector<std::vector<double>>&)> corrupt;
};

struct GroupCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  double tolerance = 0.0;
  bool passed = true;
  const GroupCheck* worst() const;
};

// |a - n| / max(|a|, |n|, 1e-5) per coordinate, central differences.
GradCheckReport grad_check(const Model& model, const Sample& sample, const GradCheckOptions& options = {});

// Evaluation ---------------------------------------------------------------------

struct EvalReport {
  std::size_t clips = 0;
  double accuracy = 0.0;        // per clip, argmax probability
  double video_accuracy = 0.0;  // majority vote over each video's clips
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], clip level
};

EvalReport evaluate(const Model& model, const Dataset& data, std::size_t threads = 1);

std::size_t resolve_threads(std::size_t requested);

}  // namespace vnn
