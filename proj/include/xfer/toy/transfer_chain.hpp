#pragma once

// pretrain -> source -> target transfer chains on the toy benchmark, with the
// pretrain -> target baseline run on the same seeds.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "xfer/gains_meta.hpp"
#include "xfer/toy/trainer.hpp"

namespace xfer::toy {

/// Source-stage defaults: weight decay lets features the source task does
/// not use fade.
TrainConfig default_source_config();

struct ChainSettings {
  TrainConfig pretrain{};
  TrainConfig source = default_source_config();
  TrainConfig target{};
  std::size_t small_target = 150;
  std::size_t small_source = 1500;
  /// When positive, the source stage runs ceil(epochs * n / batch) steps
  /// instead of source.steps.
  double source_epochs = 16.0;
  std::size_t hidden = 4;
  std::size_t patch = 3;
  int stride = 1;
  std::uint64_t seed = 0;  // per-stage seeds are derived from this
  /// Per-dataset override of eval.nms for the source and target stages.
  std::map<std::string, bool> nms_by_dataset;

  TrainConfig eval_for(const TrainConfig& base, const std::string& dataset_id) const;
};

struct ChainTask {
  const SynthDataset* dataset = nullptr;
  TaskType task = TaskType::SemanticSegmentation;
};

std::string experiment_key(const TaskRef& source, const TaskRef& target, Regime regime,
                           std::uint64_t seed);

/// Caches the pretrained backbone, source backbones and baselines of one
/// seed so that many chains can share them. Not thread-safe.
class ChainRunner {
 public:
  ChainRunner(SynthDataset pretrain, ChainSettings settings);

  const ChainSettings& settings() const { return settings_; }

  /// Classification-pretrained backbone.
  const Backbone& pretrained();
  /// Backbone after fine-tuning on the (possibly capped) source.
  const Backbone& source_backbone(const SynthDataset& source, TaskType task, Regime regime);
  /// Target fine-tuning from an arbitrary backbone; same seeds for every call.
  MetricValue fine_tune_target(const Backbone& start, const SynthDataset& target,
                               TaskType task, Regime regime);
  /// pretrain -> target, cached.
  MetricValue baseline(const SynthDataset& target, TaskType task, Regime regime);

  TransferResult run(const ChainTask& source, const ChainTask& target, Regime regime);

  /// Seed the caches with backbones trained earlier (same settings).
  void preload_pretrained(Backbone bb);
  void preload_source(const std::string& source_id, TaskType task, Regime regime, Backbone bb);

  /// Training-set size the source sees under a regime.
  std::size_t source_size(const SynthDataset& source, Regime regime) const;
  std::size_t target_size(const SynthDataset& target, Regime regime) const;

 private:
  using Key = std::tuple<std::string, TaskType, Regime>;

  static Key source_key(const std::string& id, TaskType task, Regime regime);

  SynthDataset pretrain_;
  ChainSettings settings_;
  std::unique_ptr<Backbone> pretrained_;
  std::map<Key, Backbone> sources_;
  std::map<Key, MetricValue> baselines_;
};

/// One full chain plus its baseline. Training failures are rethrown with the
/// stage ("pretrain", "source", "target", "baseline") in the message.
TransferResult run_chain(const SynthDataset& pretrain, const ChainTask& source,
                         const ChainTask& target, const ChainSettings& settings,
                         Regime regime = Regime::SmallTarget);

/// Fixture domains: two narrow domains, a broad mixture including both, a
/// disjoint domain, and a pretraining mixture over all of them.
struct DomainSuite {
  SynthDomainSpec pretrain;
  std::vector<SynthDomainSpec> datasets;
};

/// Appearance component whose objects are visible in channels
/// (2 * slot, 2 * slot + 1) of a `channels`-channel image.
AppearanceComponent narrow_component(std::string name, std::size_t slot,
                                     std::size_t channels, std::size_t num_classes);

/// Datasets A1, A2 (narrow "alpha"), B1, B2 (narrow "beta"), M1 (broad:
/// alpha, beta and an "epsilon" component of its own) and D1, D2 (disjoint
/// "gamma"). Images have 8 channels.
DomainSuite fixture_suite(std::uint64_t seed);

}  // namespace xfer::toy
