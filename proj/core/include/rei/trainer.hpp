// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rei/losses.hpp"
#include "rei/model.hpp"
#include "rei/noise.hpp"
#include "rei/operators.hpp"
#include "rei/transforms.hpp"

namespace rei {

enum class Task { mri, inpaint, ct };

std::string to_string(Task task);
Task parse_task(const std::string& name);

/// Adam with bias correction; L2 weight decay is added to the gradient.
struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(Tensor::Shape{n}), v(Tensor::Shape{n}) {}
};

void adam_step(AdamState& state, Tensor& params, const Tensor& grads, double lr, double weight_decay);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  double lr0 = 1e-4;
  /// Epochs (0-based) at which the rate is multiplied by decay_factor.
  std::vector<std::size_t> decay_points;
  double decay_factor = 0.1;
  double weight_decay = 1e-8;
  std::uint64_t seed = 0;
  LossConfig loss;
  /// Clip the batch gradient to this Euclidean norm; 0 disables clipping.
  double grad_clip = 0.0;
  /// Write a checkpoint every this many epochs (0: only at the end) when checkpoint_dir is set.
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  /// Parallel batch items; gradients are still reduced in item order.
  std::size_t threads = 1;

  /// Schedule and loss defaults for a task.
  static TrainConfig preset(Task task);
  void validate() const;
  /// lr0 · factor^(number of decay points <= epoch)
  double lr(std::size_t epoch) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Fields missing from `j` keep the values of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct TrainItem {
  Tensor y;
  std::optional<Tensor> x;
  std::optional<Tensor> u;
};

struct EvalItem {
  Tensor y;
  Tensor x;
};

/// Per-epoch record: mean of every loss term over the epoch's items and the
/// mean test PSNR of f(y) when a test split is available.
struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::map<std::string, double> terms;
  std::optional<double> test_psnr;
};

struct TrainProblem {
  const ForwardOperator& op;
  const TransformGroup& group;
  NoiseParams noise;
  /// Evaluate PSNR on magnitudes of 2-channel images.
  bool magnitude_psnr = false;
};

struct Checkpoint {
  ModelSpec spec;
  Tensor params;
  AdamState adam;
  /// Number of completed epochs.
  std::size_t epoch = 0;
  TrainConfig config;
  std::vector<EpochLog> history;
};

/// Payload: params, then Adam first and second moments.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws FormatError on malformed files or inconsistent sizes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j, ModelSpec base = {});

/// Mean PSNR of G(A† y) over the items.
double evaluate_psnr(const ReconModel& model, const ForwardOperator& op, const std::vector<EvalItem>& items,
                     bool magnitude);

/// The epoch loop. f(y) = G(A† y); each step averages per-item gradients of
/// variant_loss over a batch and applies one Adam update.
class Trainer {
 public:
  using EpochCallback = std::function<void(const EpochLog&)>;

  Trainer(TrainConfig cfg, ReconModel model, TrainProblem problem, std::vector<TrainItem> train,
          std::vector<EvalItem> test = {});

  /// Restores parameters, optimizer state, epoch counter and history.
  void restore(const Checkpoint& ckpt);
  Checkpoint checkpoint() const;

  /// Runs epochs until `until` (default: cfg.epochs) have completed.
  void run(std::optional<std::size_t> until = std::nullopt, const EpochCallback& on_epoch = {});
  EpochLog run_epoch();

  const ReconModel& model() const { return model_; }
  const AdamState& adam() const { return adam_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<EpochLog>& history() const { return history_; }

 private:
  struct ItemResult {
    Tensor grad;
    std::map<std::string, double> terms;
    bool finite = true;
  };
  ItemResult evaluate_item(std::size_t index) const;
  [[noreturn]] void abort_non_finite(std::size_t index, const ItemResult& r) const;

  TrainConfig cfg_;
  ReconModel model_;
  TrainProblem problem_;
  std::vector<TrainItem> train_;
  std::vector<EvalItem> test_;
  AdamState adam_;
  std::size_t epoch_ = 0;
  std::vector<EpochLog> history_;
};

}  // namespace rei
