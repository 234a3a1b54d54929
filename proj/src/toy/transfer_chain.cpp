#include "xfer/toy/transfer_chain.hpp"

#include <algorithm>
#include <cmath>

#include "xfer/toy/rng.hpp"

namespace xfer::toy {
namespace {

TrainConfig reseeded(const TrainConfig& cfg, std::uint64_t seed) {
  TrainConfig out = cfg;
  out.seed = seed;
  return out;
}

std::string task_label(const std::string& id, TaskType t) {
  return id + ":" + std::string(to_string(t));
}

template <class F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const TrainError& e) {
    throw TrainError(std::string("stage '") + stage + "': " + e.what(), e.step(),
                     e.learning_rate());
  } catch (const Error& e) {
    throw Error(std::string("stage '") + stage + "': " + e.what());
  }
}

}  // namespace

TrainConfig default_source_config() {
  TrainConfig c;
  c.weight_decay = 0.03;
  return c;
}

TrainConfig ChainSettings::eval_for(const TrainConfig& base,
                                    const std::string& dataset_id) const {
  TrainConfig out = base;
  if (auto it = nms_by_dataset.find(dataset_id); it != nms_by_dataset.end()) {
    out.eval.nms = it->second;
  }
  return out;
}

std::string experiment_key(const TaskRef& source, const TaskRef& target, Regime regime,
                           std::uint64_t seed) {
  return std::string(to_string(regime)) + "/" + task_label(source.dataset_id, source.task) +
         "->" + task_label(target.dataset_id, target.task) + "/seed=" + std::to_string(seed);
}

ChainRunner::ChainRunner(SynthDataset pretrain, ChainSettings settings)
    : pretrain_(std::move(pretrain)), settings_(std::move(settings)) {
  if (settings_.small_target == 0 || settings_.small_source == 0) {
    throw Error("chain settings: regime caps must be positive");
  }
}

std::size_t ChainRunner::source_size(const SynthDataset& source, Regime regime) const {
  const std::size_t n = source.train.size();
  return regime == Regime::SmallSourceSmallTarget ? std::min(n, settings_.small_source) : n;
}

std::size_t ChainRunner::target_size(const SynthDataset& target, Regime regime) const {
  const std::size_t n = target.train.size();
  return regime == Regime::FullTarget ? n : std::min(n, settings_.small_target);
}

ChainRunner::Key ChainRunner::source_key(const std::string& id, TaskType task, Regime regime) {
  // only the small-source regime changes what the source stage sees
  return {id, task, regime == Regime::SmallSourceSmallTarget ? regime : Regime::FullTarget};
}

void ChainRunner::preload_pretrained(Backbone bb) {
  pretrained_ = std::make_unique<Backbone>(std::move(bb));
}

void ChainRunner::preload_source(const std::string& source_id, TaskType task, Regime regime,
                                 Backbone bb) {
  sources_.insert_or_assign(source_key(source_id, task, regime), std::move(bb));
}

const Backbone& ChainRunner::pretrained() {
  if (!pretrained_) {
    pretrained_ = std::make_unique<Backbone>(staged("pretrain", [&] {
      const Backbone init =
          init_backbone(pretrain_.spec.channels(), settings_.patch, settings_.hidden,
                        mix_seed(settings_.seed, hash_name("backbone")));
      const TrainConfig cfg =
          reseeded(settings_.pretrain, mix_seed(settings_.seed, hash_name("pretrain")));
      return train_multisource(init, std::span(&pretrain_, 1), HeadKind::ImageClassification,
                               cfg, settings_.stride)
          .backbone;
    }));
  }
  return *pretrained_;
}

const Backbone& ChainRunner::source_backbone(const SynthDataset& source, TaskType task,
                                             Regime regime) {
  const Key key = source_key(source.id(), task, regime);
  if (auto it = sources_.find(key); it != sources_.end()) return it->second;
  const Backbone& start = pretrained();
  Backbone bb = staged("source", [&] {
    const SynthDataset capped = source.capped(source_size(source, regime));
    TrainConfig cfg = reseeded(
        settings_.eval_for(settings_.source, source.id()), mix_seed(settings_.seed, hash_name("source/" + task_label(source.id(), task))));
    if (settings_.source_epochs > 0.0) {
      cfg.steps = static_cast<std::size_t>(std::ceil(settings_.source_epochs *
                                                     static_cast<double>(capped.train.size()) /
                                                     static_cast<double>(cfg.batch_size)));
    }
    const ToyModel model = with_fresh_head(start, head_shape(head_kind(task), source.spec),
                                           head_seed(cfg), settings_.stride);
    return train(model, capped, task, cfg).model.backbone;
  });
  return sources_.emplace(key, std::move(bb)).first->second;
}

MetricValue ChainRunner::fine_tune_target(const Backbone& start, const SynthDataset& target,
                                          TaskType task, Regime regime) {
  const SynthDataset capped = target.capped(target_size(target, regime));
  const TrainConfig cfg = reseeded(
      settings_.eval_for(settings_.target, target.id()), mix_seed(settings_.seed, hash_name("target/" + task_label(target.id(), task))));
  const ToyModel model = with_fresh_head(start, head_shape(head_kind(task), target.spec),
                                         head_seed(cfg), settings_.stride);
  const TrainOutcome out = train(model, capped, task, cfg);
  return evaluate(out.model, target.val, cfg.eval);
}

MetricValue ChainRunner::baseline(const SynthDataset& target, TaskType task, Regime regime) {
  const Key key{target.id(), task, regime};
  if (auto it = baselines_.find(key); it != baselines_.end()) return it->second;
  const Backbone& start = pretrained();
  const MetricValue m =
      staged("baseline", [&] { return fine_tune_target(start, target, task, regime); });
  return baselines_.emplace(key, m).first->second;
}

TransferResult ChainRunner::run(const ChainTask& source, const ChainTask& target,
                                Regime regime) {
  if (source.dataset == nullptr || target.dataset == nullptr) {
    throw Error("run_chain: task without dataset");
  }
  const SynthDataset& src = *source.dataset;
  const SynthDataset& tgt = *target.dataset;
  if (src.spec.channels() != pretrain_.spec.channels() ||
      tgt.spec.channels() != pretrain_.spec.channels()) {
    throw Error("run_chain: datasets do not share the pretraining channel layout");
  }

  TransferResult r;
  r.source = {src.id(), source.task};
  r.target = {tgt.id(), target.task};
  r.regime = regime;
  r.seed = settings_.seed;
  r.experiment_key = experiment_key(r.source, r.target, regime, settings_.seed);
  r.source_domain = src.spec.domain_label;
  r.target_domain = tgt.spec.domain_label;
  r.source_train_size = source_size(src, regime);
  r.baseline_metric = baseline(tgt, target.task, regime);
  const Backbone& bb = source_backbone(src, source.task, regime);
  r.metric = staged("target", [&] { return fine_tune_target(bb, tgt, target.task, regime); });
  return r;
}

TransferResult run_chain(const SynthDataset& pretrain, const ChainTask& source,
                         const ChainTask& target, const ChainSettings& settings,
                         Regime regime) {
  ChainRunner runner(pretrain, settings);
  return runner.run(source, target, regime);
}

AppearanceComponent narrow_component(std::string name, std::size_t slot, std::size_t channels,
                                     std::size_t num_classes) {
  if (2 * slot + 1 >= channels) throw Error("narrow_component: slot outside the channels");
  AppearanceComponent c;
  c.name = std::move(name);
  c.background_mean.assign(channels, 0.0);
  c.noise_std.assign(channels, 1.0);
  const std::size_t a = 2 * slot, b = 2 * slot + 1;
  c.background_mean[a] = -0.5;
  c.background_mean[b] = 0.5;
  c.noise_std[a] = c.noise_std[b] = 0.5;
  for (std::size_t k = 0; k < num_classes; ++k) {
    std::vector<double> sig(channels, 0.0);
    sig[a] = 1.5;
    sig[b] = num_classes == 1 ? -1.0
                              : 2.0 * static_cast<double>(k) /
                                        static_cast<double>(num_classes - 1) - 1.0;
    c.class_signature.push_back(std::move(sig));
  }
  c.background_depth = 3.0 + 0.5 * static_cast<double>(slot);
  return c;
}

DomainSuite fixture_suite(std::uint64_t seed) {
  constexpr std::size_t kChannels = 8, kClasses = 2;
  auto narrow = [&](std::string id, std::string domain, std::size_t slot, std::string comp) {
    SynthDomainSpec s;
    s.dataset_id = std::move(id);
    s.domain_label = std::move(domain);
    s.components = {narrow_component(std::move(comp), slot, kChannels, kClasses)};
    s.num_classes = kClasses;
    s.seed = mix_seed(seed, hash_name(s.dataset_id));
    return s;
  };
  DomainSuite suite;
  const SynthDomainSpec a1 = narrow("A1", "alpha", 0, "alpha");
  const SynthDomainSpec b1 = narrow("B1", "beta", 1, "beta");
  const SynthDomainSpec d1 = narrow("D1", "gamma", 2, "gamma");
  // the broad domain also has appearance of its own that no narrow dataset covers
  const SynthDomainSpec e = narrow("E", "epsilon", 3, "epsilon");
  const SynthDomainSpec ab[] = {a1, b1, e};
  const SynthDomainSpec abd[] = {a1, b1, d1, e};
  suite.datasets = {a1,
                    narrow("A2", "alpha", 0, "alpha"),
                    b1,
                    narrow("B2", "beta", 1, "beta"),
                    make_mixture("M1", "broad", ab, mix_seed(seed, hash_name("M1"))),
                    d1,
                    narrow("D2", "gamma", 2, "gamma")};
  suite.pretrain = make_mixture("PRETRAIN", "pretrain", abd, mix_seed(seed, hash_name("PRETRAIN")));
  return suite;
}

}  // namespace xfer::toy
