#include <doctest.h>

#include "xfer/toy/rng.hpp"
#include "xfer/toy/transfer_chain.hpp"

using namespace xfer;
using namespace xfer::toy;

namespace {

struct Data {
  SynthDataset pretrain;
  std::vector<SynthDataset> datasets;
  const SynthDataset& get(const std::string& id) const {
    for (const auto& d : datasets)
      if (d.id() == id) return d;
    throw Error("missing " + id);
  }
};

Data make_data(std::uint64_t seed, std::size_t n_train = 40) {
  const auto suite = fixture_suite(seed);
  Data d;
  d.pretrain = generate_dataset(suite.pretrain, 80, 20);
  for (const auto& s : suite.datasets) d.datasets.push_back(generate_dataset(s, n_train, 20));
  return d;
}

ChainSettings quick_settings(std::uint64_t seed) {
  ChainSettings s;
  s.seed = seed;
  s.pretrain.steps = 40;
  s.source.steps = 40;
  s.source_epochs = 0;
  s.target.steps = 40;
  s.small_target = 10;
  return s;
}

}  // namespace

TEST_CASE("experiment keys name regime, tasks and seed") {
  const auto k = experiment_key({"A1", TaskType::SemanticSegmentation}, {"B1", TaskType::DepthEstimation},
                                Regime::SmallTarget, 3);
  CHECK(k.find("A1") != std::string::npos);
  CHECK(k.find("B1") != std::string::npos);
  CHECK(k.find("seed=3") != std::string::npos);
  CHECK(k != experiment_key({"B1", TaskType::DepthEstimation}, {"A1", TaskType::SemanticSegmentation},
                            Regime::SmallTarget, 3));
}

TEST_CASE("run_chain is reproducible and fills the record") {
  const auto d = make_data(1);
  const auto s = quick_settings(1);
  const ChainTask src{&d.get("A1"), TaskType::SemanticSegmentation};
  const ChainTask tgt{&d.get("A2"), TaskType::SemanticSegmentation};
  const auto a = run_chain(d.pretrain, src, tgt, s);
  const auto b = run_chain(d.pretrain, src, tgt, s);
  CHECK(a == b);
  CHECK(a.source_domain == "alpha");
  CHECK(a.target_domain == "alpha");
  CHECK(a.source_train_size == 40);
  CHECK(a.metric.task == TaskType::SemanticSegmentation);
  CHECK(a.baseline_metric.direction == a.metric.direction);
}

TEST_CASE("the runner cache gives the same result as a fresh chain") {
  const auto d = make_data(2);
  const auto s = quick_settings(2);
  ChainRunner runner(d.pretrain, s);
  const ChainTask src{&d.get("B1"), TaskType::DepthEstimation};
  const ChainTask t1{&d.get("B2"), TaskType::DepthEstimation};
  const ChainTask t2{&d.get("A1"), TaskType::DepthEstimation};
  const auto first = runner.run(src, t1, Regime::SmallTarget);
  runner.run(src, t2, Regime::SmallTarget);
  CHECK(runner.run(src, t1, Regime::SmallTarget) == first);
  CHECK(run_chain(d.pretrain, src, t1, s) == first);
}

TEST_CASE("zero-step target fine-tuning evaluates the fresh head") {
  const auto d = make_data(3);
  auto s = quick_settings(3);
  s.target.steps = 0;
  ChainRunner runner(d.pretrain, s);
  const auto& src = d.get("A1");
  const auto& tgt = d.get("B1");
  const auto r = runner.run({&src, TaskType::SemanticSegmentation}, {&tgt, TaskType::SemanticSegmentation},
                            Regime::SmallTarget);
  const Backbone& bb = runner.source_backbone(src, TaskType::SemanticSegmentation, Regime::SmallTarget);
  TrainConfig cfg = s.target;
  cfg.seed = mix_seed(s.seed, hash_name("target/B1:" + std::string(to_string(TaskType::SemanticSegmentation))));
  const auto zero_shot = with_fresh_head(bb, head_shape(HeadKind::Segmentation, tgt.spec), head_seed(cfg));
  CHECK(r.metric == evaluate(zero_shot, tgt.val, cfg.eval));
}

TEST_CASE("training failures carry the stage") {
  auto d = make_data(4);
  d.pretrain.train.clear();
  const ChainTask src{&d.get("A1"), TaskType::SemanticSegmentation};
  const ChainTask tgt{&d.get("A2"), TaskType::SemanticSegmentation};
  try {
    run_chain(d.pretrain, src, tgt, quick_settings(4));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("stage 'pretrain'") != std::string::npos);
  }
  auto d2 = make_data(4);
  auto s = quick_settings(4);
  s.target.lr_candidates = {1e200};
  s.target.weight_decay = 0.5;
  try {
    run_chain(d2.pretrain, src, {&d2.get("A2"), TaskType::SemanticSegmentation}, s);
    FAIL("expected failure");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("stage 'baseline'") != std::string::npos);
  }
}

TEST_CASE("regimes cap what the stages see") {
  const auto d = make_data(5);
  auto s = quick_settings(5);
  s.small_source = 7;
  ChainRunner runner(d.pretrain, s);
  const auto& a1 = d.get("A1");
  CHECK(runner.source_size(a1, Regime::SmallTarget) == 40);
  CHECK(runner.source_size(a1, Regime::SmallSourceSmallTarget) == 7);
  CHECK(runner.target_size(a1, Regime::SmallTarget) == 10);
  CHECK(runner.target_size(a1, Regime::FullTarget) == 40);
}

TEST_CASE("self-transfer is not significantly negative") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = make_data(seed, 60);
    ChainSettings s;
    s.seed = seed;
    s.small_target = 8;
    const ChainTask t{&d.get("A1"), TaskType::SemanticSegmentation};
    const auto r = run_chain(d.pretrain, t, t, s);
    total += relative_gain(r.metric, r.baseline_metric);
  }
  CHECK(total / 5.0 > -2.0);
}
