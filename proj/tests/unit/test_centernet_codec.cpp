#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles/grad_cases.hpp"
#include "oracles/oracles.hpp"
#include "oracles/scenes.hpp"
#include "xfer/centernet_codec.hpp"

using namespace xfer;
using namespace xfer::centernet;

TEST_CASE("gaussian_radius agrees with a shift scan") {
  const double r = gaussian_radius(10, 10, 0.7);
  CHECK(std::floor(r) == oracle::scanned_radius(10, 10, 0.7, 1.0));
  CHECK(std::abs(r - oracle::scanned_radius(10, 10, 0.7, 1e-4)) < 1e-4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ext(0.5, 30);
  for (int i = 0; i < 50; ++i) {
    const double w = ext(rng), h = ext(rng);
    const double got = gaussian_radius(w, h);
    CHECK(gaussian_radius(h, w) == doctest::Approx(got).epsilon(1e-12));
    const double scan = oracle::scanned_radius(w, h, 0.7, 1e-3);
    CHECK(got >= scan);
    CHECK(got < scan + 1e-3);
  }
  CHECK(gaussian_radius(10, 10, 0.999999) < 1e-4);
}

TEST_CASE("detection targets: single box round-trips through the offset") {
  const std::vector<Box> boxes{Box(13.0, 6.0, 8.0, 4.0)};  // center (17, 8)
  const auto t = encode_detection_targets(boxes, 1, 8, 8, 4);
  int ones = 0;
  for (double v : t.maps.heatmap) ones += v == 1.0;
  CHECK(ones == 1);
  REQUIRE(t.centers.size() == 1);
  const auto& c = t.centers[0];
  const std::size_t pix = c.row * 8 + c.col;
  CHECK((c.col + t.maps.offset[pix]) * 4 == doctest::Approx(17.0).epsilon(1e-15));
  CHECK((c.row + t.maps.offset[64 + pix]) * 4 == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(t.maps.size[pix] == 2.0);
  CHECK(t.maps.size[64 + pix] == 1.0);
}

TEST_CASE("detection targets combine overlapping gaussians by max") {
  const std::vector<Box> boxes{Box(0, 0, 6, 6), Box(3, 0, 6, 6)};
  const auto t = encode_detection_targets(boxes, 1, 8, 8, 1);
  const double radius = gaussian_radius(6, 6);
  const double s = radius / 3;
  // probe at (row 3, col 4): centers are at (3,3) and (3,6)
  const double g1 = std::exp(-1.0 / (2 * s * s)), g2 = std::exp(-4.0 / (2 * s * s));
  CHECK(t.maps.heatmap[3 * 8 + 4] == doctest::Approx(std::max(g1, g2)).epsilon(1e-12));
  CHECK(encode_detection_targets(std::vector<Box>{}, 2, 4, 4, 1).centers.empty());
}

TEST_CASE("focal_loss examples") {
  const std::vector<double> p{0.5}, y1{1.0};
  CHECK(focal_loss(p, y1) == doctest::Approx(0.17329).epsilon(1e-4));
  const std::vector<double> p2{0.5, 0.5}, y2{1.0, 0.5};
  CHECK(focal_loss(p2, y2) - focal_loss(p, y1) == doctest::Approx(0.010831).epsilon(1e-4));
  const std::vector<double> zeros{0.0, 0.0};
  CHECK_THROWS_WITH_AS(focal_loss(p2, zeros), "focal_loss: no centers", Error);
  const std::vector<double> ideal{1.0, 0.0}, y3{1.0, 0.3};
  CHECK(focal_loss(ideal, y3) < 1e-7);
}

TEST_CASE("masked_l1_loss examples") {
  // 2 x 1 x 2 map, center at pixel 0
  const std::vector<double> pred{0.25, 9.0, 0.75, -9.0}, target{0.5, 0.0, 0.5, 0.0};
  const std::vector<std::uint8_t> mask{1, 0};
  CHECK(masked_l1_loss(pred, target, mask, 2) == doctest::Approx(0.5));
  CHECK(masked_l1_loss(target, target, mask, 2) == 0.0);
  const std::vector<std::uint8_t> none{0, 0};
  CHECK_THROWS_WITH_AS(masked_l1_loss(pred, target, none, 2), "masked_l1: empty mask", Error);
}

TEST_CASE("total detection loss weighting") {
  CHECK(combine_detection_loss(1, 2, 3) == doctest::Approx(3.3));
  const auto t = encode_detection_targets(std::vector<Box>{Box(1, 1, 2, 2)}, 1, 4, 4, 1);
  auto pred = DetectionMaps::zeros(1, 4, 4);
  for (double& v : pred.heatmap) v = 0.3;
  const auto l = total_detection_loss(pred, t, {0.0, 0.0});
  CHECK(l.total == l.cls);
  CHECK(l.total == focal_loss(pred.heatmap, t.maps.heatmap));
}

TEST_CASE("decode: equal peaks with T = 1 keep the lowest index") {
  auto m = DetectionMaps::zeros(2, 5, 5);
  m.heatmap[0 * 25 + 3 * 5 + 3] = 0.8;
  m.heatmap[1 * 25 + 1 * 5 + 1] = 0.8;
  m.heatmap[0 * 25 + 1 * 5 + 3] = 0.8;
  const auto d = decode_detections(m, 1, 1);
  REQUIRE(d.size() == 1);
  CHECK(d[0].class_id() == 0);
  CHECK(d[0].score() == 0.8);
  // the class-0 peak at row 1 comes first
  CHECK(d[0].center().y == doctest::Approx(1.0));
  auto flat = DetectionMaps::zeros(1, 3, 3);
  for (double& v : flat.heatmap) v = 0.2;
  CHECK(decode_detections(flat, 1, 100, 0.5).empty());
}

TEST_CASE("decode respects top_T") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  auto m = DetectionMaps::zeros(2, 9, 9);
  for (double& v : m.heatmap) v = u(rng);
  for (double& v : m.size) v = 1.0;
  for (std::size_t t : {1u, 3u, 7u}) CHECK(decode_detections(m, 1, t).size() <= t);
}

TEST_CASE("nms examples") {
  const Box a(0, 0, 3, 1, 0, 0.9);
  const Box b(1, 0, 3, 1, 0, 0.8);  // IoU 2/4
  CHECK(box_iou(a, b) == doctest::Approx(0.5));
  const std::vector<Detection> same{b, a};
  const auto kept = nms(same);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score() == 0.9);
  const std::vector<Detection> diff{a, Box(1, 0, 3, 1, 1, 0.8)};
  CHECK(nms(diff).size() == 2);
  CHECK(nms(same, 1.0).size() == 2);
}

TEST_CASE("keypoint targets: allocation is the displacement in feature units") {
  KeypointInstance inst;
  inst.box = Box(0, 0, 32, 32);  // center (16, 16), cell (4, 4) at stride 4
  inst.keypoints = {{24, 20, true}, {16, 16, true}, {1, 1, false}};
  const auto t = encode_keypoint_targets(std::vector{inst}, 3, 8, 8, 4);
  const std::size_t plane = 64, pix = 4 * 8 + 4;
  CHECK(t.maps.allocation[0 * plane + pix] == 2.0);
  CHECK(t.maps.allocation[1 * plane + pix] == 1.0);
  CHECK(t.maps.allocation[2 * plane + pix] == 0.0);
  CHECK(t.maps.allocation[3 * plane + pix] == 0.0);
  CHECK(t.allocation_mask[2 * plane + pix] == 0);
  for (std::size_t i = 0; i < plane; ++i) CHECK(t.maps.heatmap[2 * plane + i] == 0.0);
}

TEST_CASE("decode_keypoints: fallback and nearest-inside rule") {
  const std::size_t n = 10, plane = n * n;
  auto boxes = DetectionMaps::zeros(1, n, n);
  boxes.heatmap[5 * n + 5] = 0.9;  // center (5, 5) at stride 1
  boxes.size[5 * n + 5] = 4.0;     // box [3, 7] x [3, 7]
  boxes.size[plane + 5 * n + 5] = 4.0;
  auto kp = KeypointMaps::zeros(1, n, n);
  kp.allocation[5 * n + 5] = 1.0;  // guess (6, 5)
  KeypointDecodeParams p;
  p.stride = 1;

  auto out = decode_keypoints(boxes, kp, p);
  REQUIRE(out.size() == 1);
  CHECK(out[0].keypoints[0].x == 6.0);
  CHECK(out[0].keypoints[0].y == 5.0);

  // outside candidate at (8, 5) is nearer the guess than the inside one at (4, 5)
  kp.heatmap[5 * n + 8] = 0.9;
  kp.heatmap[5 * n + 4] = 0.5;
  out = decode_keypoints(boxes, kp, p);
  CHECK(out[0].keypoints[0].x == 4.0);
  CHECK(out[0].keypoints[0].y == 5.0);
}

TEST_CASE("encode then decode recovers random scenes") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    CHECK(oracle::box_round_trip(oracle::random_box_scene(rng), 1e-9));
    CHECK(oracle::keypoint_round_trip(oracle::random_keypoint_scene(rng), 1e-9));
  }
}

TEST_CASE("codec loss gradients match finite differences") {
  using oracle::LossCase;
  for (LossCase c : {LossCase::Focal, LossCase::CenterOffset, LossCase::BoxSize,
                     LossCase::Detection, LossCase::Keypoint}) {
    CAPTURE(oracle::to_string(c));
    for (std::uint64_t s = 0; s < 10; ++s) CHECK(oracle::gradient_error(c, s) < 1e-4);
  }
}

TEST_CASE("focal gradient is zero where the prediction is clamped") {
  const std::vector<double> p{0.0, 1.0, 0.5}, y{1.0, 0.0, 0.2};
  std::vector<double> g(3);
  focal_loss(p, y, {}, g);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] != 0.0);
}
