#pragma once

// Mini-batch SGD over the toy model with learning-rate selection on the
// validation split, plus multi-source training with one head per dataset.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfer/toy/toy_model.hpp"

namespace xfer::toy {

enum class LrSchedule : std::uint8_t { Constant, StepDecay };

std::string_view to_string(LrSchedule s);
LrSchedule parse_schedule(std::string_view s);

struct TrainConfig {
  std::size_t steps = 120;
  LrSchedule schedule = LrSchedule::StepDecay;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  std::vector<double> lr_candidates{0.1, 0.3, 1.0};
  double decay_factor = 0.1;    // StepDecay multiplies the rate once...
  double decay_fraction = 0.75; // ...after this fraction of the steps
  double weight_decay = 0.0;    // L2 coefficient on non-bias weights
  bool freeze_backbone = false;
  LossOptions loss{};
  EvalOptions eval{};

  /// Throws on zero batch size, empty or negative candidates, bad decay.
  void validate() const;
  double lr_at(double base, std::size_t step) const;
};

/// Training failure with the offending step (non-finite loss).
class TrainError : public Error {
 public:
  TrainError(const std::string& what, std::size_t step, double lr)
      : Error(what), step_(step), lr_(lr) {}
  std::size_t step() const { return step_; }
  double learning_rate() const { return lr_; }

 private:
  std::size_t step_;
  double lr_;
};

struct TrainOutcome {
  ToyModel model;
  std::vector<double> loss_trace;  // batch loss before each update
  double learning_rate = 0.0;
  double val_score = 0.0;  // validation metric (accuracy for classification)
};

/// Plain SGD at one learning rate, starting from `model`.
TrainOutcome train_fixed_lr(const ToyModel& model, const SynthDataset& ds,
                            const TrainConfig& cfg, double lr);

/// Runs every learning-rate candidate and keeps the best validation result;
/// ties go to the lowest rate. The head of `model` must match the task.
TrainOutcome train(const ToyModel& model, const SynthDataset& ds, TaskType task,
                   const TrainConfig& cfg);
/// Same for any head kind (used for the classification pretraining).
TrainOutcome train(const ToyModel& model, const SynthDataset& ds, const TrainConfig& cfg);

struct MultiSourceOutcome {
  Backbone backbone;
  std::vector<Head> heads;  // one per dataset, input order
  std::vector<double> loss_trace;
  double learning_rate = 0.0;
  double val_score = 0.0;  // mean over datasets
};

/// Seed of the head initialisation used by train_multisource.
std::uint64_t head_seed(const TrainConfig& cfg);

/// Shared backbone, one fresh head per dataset (all initialised from
/// head_seed(cfg)), round-robin batch interleaving. One dataset reduces to
/// train(with_fresh_head(init, shape, head_seed(cfg), stride), ...).
MultiSourceOutcome train_multisource(const Backbone& init,
                                     std::span<const SynthDataset> datasets,
                                     HeadKind kind, const TrainConfig& cfg,
                                     int stride = 1);
MultiSourceOutcome train_multisource(const Backbone& init,
                                     std::span<const SynthDataset> datasets,
                                     std::span<const TaskType> tasks,
                                     const TrainConfig& cfg, int stride = 1);

}  // namespace xfer::toy
