#include <doctest.h>

#include <cmath>

#include "xfer/toy/trainer.hpp"
#include "xfer/toy/transfer_chain.hpp"

using namespace xfer;
using namespace xfer::toy;

namespace {

SynthDataset small_dataset(const std::string& id, std::size_t n_train, std::uint64_t seed = 0) {
  for (const auto& s : fixture_suite(seed).datasets)
    if (s.dataset_id == id) return generate_dataset(s, n_train, 4);
  throw Error("missing " + id);
}

double head_distance(const Head& a, const Head& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) d += (a.weights[i] - b.weights[i]) * (a.weights[i] - b.weights[i]);
  return std::sqrt(d);
}

}  // namespace

TEST_CASE("train config validation and schedule") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lr_candidates = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.steps = 100;
  CHECK(cfg.lr_at(1.0, 74) == 1.0);
  CHECK(cfg.lr_at(1.0, 75) == doctest::Approx(0.1));
  cfg.schedule = LrSchedule::Constant;
  CHECK(cfg.lr_at(1.0, 99) == 1.0);
  CHECK(parse_schedule(to_string(LrSchedule::StepDecay)) == LrSchedule::StepDecay);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto ds = small_dataset("A1", 6);
  const auto m = with_fresh_head(init_backbone(ds.spec.channels(), 3, 4, 1),
                                 head_shape(HeadKind::Segmentation, ds.spec), 2);
  TrainConfig cfg;
  cfg.steps = 10;
  const auto out = train_fixed_lr(m, ds, cfg, 0.0);
  CHECK(out.model == m);
  CHECK(out.loss_trace.size() == 10);
}

TEST_CASE("single-image segmentation converges") {
  const auto ds = small_dataset("B1", 1);
  const auto m = with_fresh_head(init_backbone(ds.spec.channels(), 3, 8, 4),
                                 head_shape(HeadKind::Segmentation, ds.spec), 5);
  TrainConfig cfg;
  cfg.steps = 3000;
  cfg.batch_size = 1;
  cfg.schedule = LrSchedule::Constant;
  const auto out = train_fixed_lr(m, ds, cfg, 1.0);
  CHECK(out.loss_trace.back() < 0.01);
  CHECK(image_loss(out.model, ds.train[0]) < 0.01);
}

TEST_CASE("training is deterministic and picks among the candidates") {
  const auto ds = small_dataset("A2", 8);
  const auto m = with_fresh_head(init_backbone(ds.spec.channels(), 3, 4, 1),
                                 head_shape(HeadKind::Depth, ds.spec), 2);
  TrainConfig cfg;
  cfg.steps = 30;
  const auto a = train(m, ds, TaskType::DepthEstimation, cfg);
  const auto b = train(m, ds, TaskType::DepthEstimation, cfg);
  CHECK(a.model == b.model);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(std::find(cfg.lr_candidates.begin(), cfg.lr_candidates.end(), a.learning_rate) !=
        cfg.lr_candidates.end());
  CHECK_THROWS_AS(train(m, ds, TaskType::SemanticSegmentation, cfg), Error);
}

TEST_CASE("divergence reports the step") {
  const auto ds = small_dataset("A1", 4);
  const auto m = with_fresh_head(init_backbone(ds.spec.channels(), 3, 4, 1),
                                 head_shape(HeadKind::Segmentation, ds.spec), 2);
  // bounded loss gradients keep plain SGD finite; weight decay grows geometrically
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.weight_decay = 0.5;
  try {
    train_fixed_lr(m, ds, cfg, 1e200);
    FAIL("expected divergence");
  } catch (const TrainError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 50);
    CHECK(e.learning_rate() == 1e200);
    CHECK(std::string(e.what()).find("step " + std::to_string(e.step())) != std::string::npos);
  }
}

TEST_CASE("multi-source with one dataset equals plain training") {
  const auto ds = small_dataset("B2", 8);
  const auto bb = init_backbone(ds.spec.channels(), 3, 4, 3);
  TrainConfig cfg;
  cfg.steps = 40;
  const std::vector<SynthDataset> one{ds};
  const auto multi = train_multisource(bb, one, HeadKind::Segmentation, cfg);
  const auto plain = train(with_fresh_head(bb, head_shape(HeadKind::Segmentation, ds.spec), head_seed(cfg)),
                           ds, TaskType::SemanticSegmentation, cfg);
  CHECK(multi.backbone == plain.model.backbone);
  REQUIRE(multi.heads.size() == 1);
  CHECK(multi.heads[0] == plain.model.head);
}

TEST_CASE("multi-source heads on identical datasets stay together") {
  const auto ds = small_dataset("A1", 8);
  const auto bb = init_backbone(ds.spec.channels(), 3, 4, 3);
  // weight decay makes each head's objective strongly convex given the features
  TrainConfig cfg;
  cfg.steps = 800;
  cfg.schedule = LrSchedule::Constant;
  cfg.weight_decay = 0.1;
  cfg.lr_candidates = {0.3};
  const std::vector<SynthDataset> two{ds, ds};
  const auto out = train_multisource(bb, two, HeadKind::Segmentation, cfg);
  REQUIRE(out.heads.size() == 2);
  // both heads start from the same seed; the shared backbone moves between the
  // alternating steps, so they agree only up to that drift
  Head zero = out.heads[0];
  std::fill(zero.weights.begin(), zero.weights.end(), 0.0);
  CHECK(head_distance(out.heads[0], out.heads[1]) < 0.01 * head_distance(out.heads[0], zero));
  const auto again = train_multisource(bb, two, HeadKind::Segmentation, cfg);
  CHECK(again.backbone == out.backbone);

  const std::vector<TaskType> mixed{TaskType::SemanticSegmentation, TaskType::DepthEstimation};
  CHECK_THROWS_AS(train_multisource(bb, two, mixed, cfg), Error);
}
