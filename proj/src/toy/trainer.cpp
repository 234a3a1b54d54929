#include "xfer/toy/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>

#include "xfer/toy/rng.hpp"

namespace xfer::toy {

std::string_view to_string(LrSchedule s) {
  return s == LrSchedule::Constant ? "constant" : "step-decay";
}

LrSchedule parse_schedule(std::string_view s) {
  if (s == "constant") return LrSchedule::Constant;
  if (s == "step-decay") return LrSchedule::StepDecay;
  throw Error("unknown learning-rate schedule '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("train config: batch_size must be positive");
  if (lr_candidates.empty()) throw Error("train config: no learning-rate candidates");
  for (double lr : lr_candidates) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
      throw Error("train config: learning rates must be finite and non-negative");
    }
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw Error("train config: weight_decay must be finite and non-negative");
  }
  if (!(decay_factor > 0.0) || !(decay_fraction >= 0.0 && decay_fraction <= 1.0)) {
    throw Error("train config: bad decay parameters");
  }
}

double TrainConfig::lr_at(double base, std::size_t step) const {
  if (schedule == LrSchedule::Constant) return base;
  const auto boundary = static_cast<std::size_t>(decay_fraction * static_cast<double>(steps));
  return step >= boundary ? base * decay_factor : base;
}

std::uint64_t head_seed(const TrainConfig& cfg) { return mix_seed(cfg.seed, hash_name("head")); }

namespace {

// Cycles through shuffled epochs of one dataset's training split.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = n;
  }

  std::size_t next() {
    if (pos_ == order_.size()) {
      for (std::size_t i = order_.size(); i > 1; --i) {
        std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_.below(i))]);
      }
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_;
};

// grad += coeff * w for every non-bias weight (bias is the last column).
void add_weight_decay(const ToyModel& m, double coeff, ModelGrad& grad) {
  const std::size_t din = m.backbone.input_dim();
  for (std::size_t i = 0; i < grad.backbone.size(); ++i) {
    if (i % din != din - 1) grad.backbone[i] += coeff * m.backbone.weights[i];
  }
  const std::size_t cols = m.head.hidden + 1;
  for (std::size_t i = 0; i < grad.head.size(); ++i) {
    if (i % cols != cols - 1) grad.head[i] += coeff * m.head.weights[i];
  }
}

struct LoopResult {
  Backbone backbone;
  std::vector<Head> heads;
  std::vector<double> trace;
};

LoopResult sgd_loop(const Backbone& init, std::vector<Head> heads,
                    std::span<const SynthDataset> datasets, int stride,
                    const TrainConfig& cfg, double lr) {
  LoopResult res{init, std::move(heads), {}};
  res.trace.reserve(cfg.steps);
  std::vector<BatchSampler> samplers;
  for (const auto& ds : datasets) {
    if (ds.train.empty()) throw Error("train: dataset '" + ds.id() + "' has no training images");
    samplers.emplace_back(ds.train.size(), mix_seed(cfg.seed, hash_name("batches")));
  }

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::size_t d = step % datasets.size();
    ToyModel model{std::move(res.backbone), std::move(res.heads[d]), stride};
    ModelGrad grad = ModelGrad::zeros_like(model);
    double loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      loss += image_loss(model, datasets[d].train[samplers[d].next()], cfg.loss, &grad);
    }
    const double inv = 1.0 / static_cast<double>(cfg.batch_size);
    loss *= inv;
    if (!std::isfinite(loss)) {
      throw TrainError("training diverged: non-finite loss at step " + std::to_string(step) +
                           " (lr " + std::to_string(lr) + ")",
                       step, lr);
    }
    res.trace.push_back(loss);
    const double step_lr = cfg.lr_at(lr, step);
    const double rate = step_lr * inv;
    if (cfg.weight_decay > 0.0) {
      add_weight_decay(model, cfg.weight_decay * static_cast<double>(cfg.batch_size), grad);
    }
    if (!cfg.freeze_backbone) {
      for (std::size_t i = 0; i < grad.backbone.size(); ++i) {
        model.backbone.weights[i] -= rate * grad.backbone[i];
      }
    }
    for (std::size_t i = 0; i < grad.head.size(); ++i) model.head.weights[i] -= rate * grad.head[i];
    res.backbone = std::move(model.backbone);
    res.heads[d] = std::move(model.head);
  }
  return res;
}

// Validation score oriented so that larger is better.
struct Score {
  double raw = 0.0;
  double oriented = 0.0;
};

Score validation_score(const ToyModel& model, const SynthDataset& ds, const TrainConfig& cfg) {
  if (model.head.shape.kind == HeadKind::ImageClassification) {
    const double acc = classification_accuracy(model, ds.val);
    return {acc, acc};
  }
  const MetricValue m = evaluate(model, ds.val, cfg.eval);
  return {m.value, m.direction == Direction::LowerBetter ? -m.value : m.value};
}

struct Selected {
  LoopResult loop;
  double lr = 0.0;
  Score score;
};

Selected select_lr(const Backbone& init, const std::vector<Head>& heads,
                   std::span<const SynthDataset> datasets, int stride,
                   const TrainConfig& cfg) {
  cfg.validate();
  std::vector<double> lrs = cfg.lr_candidates;
  std::sort(lrs.begin(), lrs.end());
  std::optional<Selected> best;
  std::exception_ptr first_failure;
  for (double lr : lrs) {
    LoopResult loop;
    try {
      loop = sgd_loop(init, heads, datasets, stride, cfg, lr);
    } catch (const TrainError&) {
      if (!first_failure) first_failure = std::current_exception();
      continue;
    }
    Score total;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      const Score s = validation_score(ToyModel{loop.backbone, loop.heads[d], stride},
                                       datasets[d], cfg);
      total.raw += s.raw;
      total.oriented += s.oriented;
    }
    const auto n = static_cast<double>(datasets.size());
    total.raw /= n;
    total.oriented /= n;
    if (!std::isfinite(total.oriented)) continue;
    if (!best || total.oriented > best->score.oriented) {
      best = Selected{std::move(loop), lr, total};
    }
  }
  if (!best) {
    if (first_failure) std::rethrow_exception(first_failure);
    throw Error("train: no learning rate produced a finite validation metric");
  }
  return std::move(*best);
}

}  // namespace

TrainOutcome train_fixed_lr(const ToyModel& model, const SynthDataset& ds,
                            const TrainConfig& cfg, double lr) {
  cfg.validate();
  LoopResult loop = sgd_loop(model.backbone, {model.head}, std::span(&ds, 1), model.stride, cfg, lr);
  TrainOutcome out{{std::move(loop.backbone), std::move(loop.heads.front()), model.stride},
                   std::move(loop.trace), lr, 0.0};
  out.val_score = validation_score(out.model, ds, cfg).raw;
  return out;
}

TrainOutcome train(const ToyModel& model, const SynthDataset& ds, const TrainConfig& cfg) {
  Selected s = select_lr(model.backbone, {model.head}, std::span(&ds, 1), model.stride, cfg);
  return {{std::move(s.loop.backbone), std::move(s.loop.heads.front()), model.stride},
          std::move(s.loop.trace), s.lr, s.score.raw};
}

TrainOutcome train(const ToyModel& model, const SynthDataset& ds, TaskType task,
                   const TrainConfig& cfg) {
  if (model.head.shape.kind != head_kind(task)) {
    throw Error("train: head is " + std::string(to_string(model.head.shape.kind)) +
                " but the task is " + std::string(to_string(task)));
  }
  return train(model, ds, cfg);
}

MultiSourceOutcome train_multisource(const Backbone& init,
                                     std::span<const SynthDataset> datasets, HeadKind kind,
                                     const TrainConfig& cfg, int stride) {
  if (datasets.empty()) throw Error("train_multisource: no datasets");
  std::vector<Head> heads;
  for (const auto& ds : datasets) {
    heads.push_back(init_head(head_shape(kind, ds.spec), init.hidden, head_seed(cfg)));
  }
  Selected s = select_lr(init, heads, datasets, stride, cfg);
  return {std::move(s.loop.backbone), std::move(s.loop.heads), std::move(s.loop.trace), s.lr,
          s.score.raw};
}

MultiSourceOutcome train_multisource(const Backbone& init,
                                     std::span<const SynthDataset> datasets,
                                     std::span<const TaskType> tasks, const TrainConfig& cfg,
                                     int stride) {
  if (tasks.size() != datasets.size()) {
    throw Error("train_multisource: one task type per dataset required");
  }
  if (tasks.empty()) throw Error("train_multisource: no datasets");
  for (TaskType t : tasks) {
    if (t != tasks.front()) throw Error("train_multisource: mixed task types");
  }
  return train_multisource(init, datasets, head_kind(tasks.front()), cfg, stride);
}

}  // namespace xfer::toy
