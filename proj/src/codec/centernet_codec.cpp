#include "xfer/centernet_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace xfer::centernet {
namespace {

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(std::string(what) + ": expected " + std::to_string(want) +
                " elements, got " + std::to_string(got));
  }
}

struct Cell {
  std::size_t row, col;
  double fx, fy;  // fractional remainders in [0, 1)
};

Cell quantize(Point2 p, int stride, std::size_t height, std::size_t width) {
  const double fx = p.x / stride;
  const double fy = p.y / stride;
  if (!(fx >= 0.0) || !(fy >= 0.0) || fx >= static_cast<double>(width) ||
      fy >= static_cast<double>(height)) {
    throw Error("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                ") falls outside the feature grid");
  }
  const double cx = std::floor(fx);
  const double cy = std::floor(fy);
  return {static_cast<std::size_t>(cy), static_cast<std::size_t>(cx), fx - cx,
          fy - cy};
}

bool strict_local_max(std::span<const double> plane, std::size_t height,
                      std::size_t width, std::size_t row, std::size_t col) {
  const double v = plane[row * width + col];
  const std::size_t r0 = row == 0 ? 0 : row - 1;
  const std::size_t c0 = col == 0 ? 0 : col - 1;
  const std::size_t r1 = std::min(row + 1, height - 1);
  const std::size_t c1 = std::min(col + 1, width - 1);
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      if (r == row && c == col) continue;
      if (!(v > plane[r * width + c])) return false;
    }
  }
  return true;
}

double focal_radius(const Box& box, int stride) {
  return gaussian_radius(box.w() / stride, box.h() / stride);
}

}  // namespace

DetectionMaps DetectionMaps::zeros(std::size_t num_classes, std::size_t height,
                                   std::size_t width) {
  DetectionMaps m;
  m.num_classes = num_classes;
  m.height = height;
  m.width = width;
  m.heatmap.assign(num_classes * height * width, 0.0);
  m.offset.assign(2 * height * width, 0.0);
  m.size.assign(2 * height * width, 0.0);
  return m;
}

KeypointMaps KeypointMaps::zeros(std::size_t num_keypoints, std::size_t height,
                                 std::size_t width) {
  KeypointMaps m;
  m.num_keypoints = num_keypoints;
  m.height = height;
  m.width = width;
  m.heatmap.assign(num_keypoints * height * width, 0.0);
  m.offset.assign(2 * height * width, 0.0);
  m.allocation.assign(2 * num_keypoints * height * width, 0.0);
  return m;
}

double gaussian_radius(double w, double h, double min_iou) {
  if (!(w > 0.0) || !(h > 0.0)) throw Error("gaussian_radius needs w, h > 0");
  if (!(min_iou > 0.0) || min_iou > 1.0) {
    throw Error("gaussian_radius needs min_iou in (0, 1]");
  }
  const double t = min_iou;
  const double s = w + h;
  const double a = w * h;
  // translated by (r, r): r^2 - s r + a (1-t)/(1+t) >= 0
  const double r1 = (s - std::sqrt(std::max(0.0, s * s - 4.0 * a * (1.0 - t) / (1.0 + t)))) / 2.0;
  // shrunk by r at both corners: 4 r^2 - 2 s r + (1-t) a >= 0
  const double r2 = (2.0 * s - std::sqrt(std::max(0.0, 4.0 * s * s - 16.0 * (1.0 - t) * a))) / 8.0;
  // grown by r at both corners: 4 t r^2 + 2 t s r - (1-t) a <= 0
  const double r3 =
      (-2.0 * t * s + std::sqrt(4.0 * t * t * s * s + 16.0 * t * (1.0 - t) * a)) / (8.0 * t);
  return std::max(0.0, std::min({r1, r2, r3}));
}

void draw_gaussian(std::span<double> plane, std::size_t height,
                   std::size_t width, std::size_t row, std::size_t col,
                   double radius) {
  require_size(plane.size(), height * width, "draw_gaussian plane");
  const double sigma = radius / 3.0;
  const auto ext = static_cast<std::ptrdiff_t>(std::ceil(radius));
  const auto r = static_cast<std::ptrdiff_t>(row);
  const auto c = static_cast<std::ptrdiff_t>(col);
  for (std::ptrdiff_t dy = -ext; dy <= ext; ++dy) {
    for (std::ptrdiff_t dx = -ext; dx <= ext; ++dx) {
      const std::ptrdiff_t y = r + dy, x = c + dx;
      if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(height) ||
          x >= static_cast<std::ptrdiff_t>(width)) {
        continue;
      }
      double v;
      if (dx == 0 && dy == 0) {
        v = 1.0;
      } else if (sigma > 0.0) {
        v = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      } else {
        continue;
      }
      double& cell = plane[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
      cell = std::min(1.0, std::max(cell, v));
    }
  }
}

TargetMaps encode_detection_targets(std::span<const Box> boxes,
                                    std::size_t num_classes, std::size_t height,
                                    std::size_t width, int stride) {
  if (stride <= 0) throw Error("stride must be positive");
  TargetMaps t;
  t.maps = DetectionMaps::zeros(num_classes, height, width);
  t.center_mask.assign(height * width, 0);
  t.stride = stride;
  const std::size_t plane = height * width;
  for (const Box& b : boxes) {
    if (b.class_id() < 0 || static_cast<std::size_t>(b.class_id()) >= num_classes) {
      throw Error("box class id out of range");
    }
    const Cell cell = quantize(b.center(), stride, height, width);
    const std::size_t pix = cell.row * width + cell.col;
    const auto cls = static_cast<std::size_t>(b.class_id());
    draw_gaussian(std::span(t.maps.heatmap).subspan(cls * plane, plane), height,
                  width, cell.row, cell.col, focal_radius(b, stride));
    t.maps.offset[pix] = cell.fx;
    t.maps.offset[plane + pix] = cell.fy;
    t.maps.size[pix] = b.w() / stride;
    t.maps.size[plane + pix] = b.h() / stride;
    t.center_mask[pix] = 1;
    const bool seen = std::any_of(t.centers.begin(), t.centers.end(), [&](const CenterCell& c) {
      return c.class_id == b.class_id() && c.row == cell.row && c.col == cell.col;
    });
    if (!seen) t.centers.push_back({b.class_id(), cell.row, cell.col});
  }
  return t;
}

double focal_loss(std::span<const double> pred, std::span<const double> target,
                  const FocalParams& params, std::span<double> grad) {
  require_size(pred.size(), target.size(), "focal_loss prediction");
  if (!grad.empty()) require_size(grad.size(), pred.size(), "focal_loss gradient");
  const auto n = static_cast<std::size_t>(
      std::count(target.begin(), target.end(), 1.0));
  if (n == 0) throw Error("focal_loss: no centers");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double a = params.alpha, b = params.beta;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double raw = pred[i];
    const double p = std::clamp(raw, params.eps, 1.0 - params.eps);
    const bool clamped = p != raw;
    double term, dterm;
    if (target[i] == 1.0) {
      const double q = 1.0 - p;
      term = std::pow(q, a) * std::log(p);
      dterm = -a * std::pow(q, a - 1.0) * std::log(p) + std::pow(q, a) / p;
    } else {
      const double wneg = std::pow(1.0 - target[i], b);
      term = wneg * std::pow(p, a) * std::log(1.0 - p);
      dterm = wneg * (a * std::pow(p, a - 1.0) * std::log(1.0 - p) -
                      std::pow(p, a) / (1.0 - p));
    }
    sum += term;
    if (!grad.empty()) grad[i] = clamped ? 0.0 : -dterm * inv_n;
  }
  return -sum * inv_n;
}

double grouped_masked_l1_loss(std::span<const double> pred,
                              std::span<const double> target,
                              std::span<const std::uint8_t> mask,
                              std::size_t groups, std::span<double> grad) {
  require_size(pred.size(), target.size(), "masked_l1 prediction");
  if (!grad.empty()) require_size(grad.size(), pred.size(), "masked_l1 gradient");
  if (groups == 0 || mask.empty() || mask.size() % groups != 0 ||
      pred.size() % mask.size() != 0) {
    throw Error("masked_l1: map/mask shape mismatch");
  }
  const std::size_t plane = mask.size() / groups;
  const std::size_t group_channels = pred.size() / mask.size();
  const auto n = static_cast<std::size_t>(
      std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  if (n == 0) throw Error("masked_l1: empty mask");
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (!mask[g * plane + p]) continue;
      for (std::size_t j = 0; j < group_channels; ++j) {
        const std::size_t idx = (g * group_channels + j) * plane + p;
        const double d = pred[idx] - target[idx];
        sum += std::abs(d);
        if (!grad.empty()) grad[idx] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
      }
    }
  }
  return sum * inv_n;
}

double masked_l1_loss(std::span<const double> pred,
                      std::span<const double> target,
                      std::span<const std::uint8_t> mask, std::size_t channels,
                      std::span<double> grad) {
  if (channels == 0 || pred.size() != channels * mask.size()) {
    throw Error("masked_l1: map/mask shape mismatch");
  }
  return grouped_masked_l1_loss(pred, target, mask, 1, grad);
}

DetectionLoss total_detection_loss(const DetectionMaps& pred,
                                   const TargetMaps& target,
                                   const DetectionLossWeights& weights,
                                   const FocalParams& focal,
                                   DetectionMaps* grad) {
  const DetectionMaps& t = target.maps;
  if (pred.num_classes != t.num_classes || pred.height != t.height ||
      pred.width != t.width) {
    throw Error("detection maps and targets differ in shape");
  }
  if (grad != nullptr) *grad = DetectionMaps::zeros(t.num_classes, t.height, t.width);
  DetectionLoss out;
  out.cls = focal_loss(pred.heatmap, t.heatmap, focal,
                       grad ? std::span<double>(grad->heatmap) : std::span<double>{});
  out.offset = masked_l1_loss(pred.offset, t.offset, target.center_mask, 2,
                              grad ? std::span<double>(grad->offset) : std::span<double>{});
  out.size = masked_l1_loss(pred.size, t.size, target.center_mask, 2,
                            grad ? std::span<double>(grad->size) : std::span<double>{});
  out.total = combine_detection_loss(out.cls, out.offset, out.size, weights);
  if (grad != nullptr) {
    for (double& g : grad->offset) g *= weights.offset;
    for (double& g : grad->size) g *= weights.size;
  }
  return out;
}

std::vector<Peak> top_peaks(std::span<const double> heatmap,
                            std::size_t channels, std::size_t height,
                            std::size_t width, std::size_t top_t,
                            double score_threshold) {
  const std::size_t plane = height * width;
  require_size(heatmap.size(), channels * plane, "top_peaks heatmap");
  std::vector<Peak> peaks;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto p = heatmap.subspan(c * plane, plane);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t col = 0; col < width; ++col) {
        const double v = p[r * width + col];
        if (v < score_threshold) continue;
        if (!strict_local_max(p, height, width, r, col)) continue;
        peaks.push_back({static_cast<int>(c), r, col, v});
      }
    }
  }
  // candidates are generated in (class, row, col) order already
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  if (peaks.size() > top_t) peaks.resize(top_t);
  return peaks;
}

namespace {

constexpr double kMinDecodedExtent = 1e-6;

Detection box_from_peak(const DetectionMaps& m, const Peak& pk, int stride) {
  const std::size_t plane = m.plane();
  const std::size_t pix = pk.row * m.width + pk.col;
  const double cx = (static_cast<double>(pk.col) + m.offset[pix]) * stride;
  const double cy = (static_cast<double>(pk.row) + m.offset[plane + pix]) * stride;
  const double w = std::max(m.size[pix] * stride, kMinDecodedExtent);
  const double h = std::max(m.size[plane + pix] * stride, kMinDecodedExtent);
  return Detection(cx - w / 2.0, cy - h / 2.0, w, h, pk.class_id, pk.score);
}

}  // namespace

std::vector<Detection> decode_detections(const DetectionMaps& pred, int stride,
                                         std::size_t top_t,
                                         double score_threshold) {
  if (stride <= 0) throw Error("stride must be positive");
  const auto peaks = top_peaks(pred.heatmap, pred.num_classes, pred.height,
                               pred.width, top_t, score_threshold);
  std::vector<Detection> out;
  out.reserve(peaks.size());
  for (const Peak& pk : peaks) out.push_back(box_from_peak(pred, pk, stride));
  return out;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::make_tuple(-dets[a].score(), dets[a].class_id()) <
           std::make_tuple(-dets[b].score(), dets[b].class_id());
  });
  std::vector<bool> keep(dets.size(), false);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return dets[k].class_id() == dets[i].class_id() &&
             box_iou(dets[k], dets[i]) >= iou_threshold;
    });
    if (suppressed) continue;
    kept.push_back(i);
    keep[i] = true;
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (keep[i]) out.push_back(dets[i]);
  }
  return out;
}

KeypointTargets encode_keypoint_targets(std::span<const KeypointInstance> instances,
                                        std::size_t num_keypoints,
                                        std::size_t height, std::size_t width,
                                        int stride) {
  std::vector<Box> boxes;
  boxes.reserve(instances.size());
  for (const auto& inst : instances) {
    if (inst.num_keypoints() != num_keypoints) {
      throw Error("instance keypoint count differs from num_keypoints");
    }
    const Box& b = inst.box;
    boxes.emplace_back(b.x(), b.y(), b.w(), b.h(), 0, b.score());
  }
  KeypointTargets t;
  t.boxes = encode_detection_targets(boxes, 1, height, width, stride);
  t.maps = KeypointMaps::zeros(num_keypoints, height, width);
  const std::size_t plane = height * width;
  t.offset_mask.assign(plane, 0);
  t.allocation_mask.assign(num_keypoints * plane, 0);
  for (const auto& inst : instances) {
    const Point2 c = inst.box.center();
    const Cell cc = quantize(c, stride, height, width);
    const std::size_t center_pix = cc.row * width + cc.col;
    const double radius = focal_radius(inst.box, stride);
    for (std::size_t k = 0; k < num_keypoints; ++k) {
      const Keypoint& kp = inst.keypoints[k];
      if (!kp.visible) continue;
      const Cell kc = quantize({kp.x, kp.y}, stride, height, width);
      const std::size_t pix = kc.row * width + kc.col;
      draw_gaussian(std::span(t.maps.heatmap).subspan(k * plane, plane), height,
                    width, kc.row, kc.col, radius);
      t.maps.offset[pix] = kc.fx;
      t.maps.offset[plane + pix] = kc.fy;
      t.offset_mask[pix] = 1;
      t.maps.allocation[(2 * k) * plane + center_pix] = (kp.x - c.x) / stride;
      t.maps.allocation[(2 * k + 1) * plane + center_pix] = (kp.y - c.y) / stride;
      t.allocation_mask[k * plane + center_pix] = 1;
    }
  }
  return t;
}

KeypointLoss total_keypoint_loss(const DetectionMaps& box_pred,
                                 const KeypointMaps& kp_pred,
                                 const KeypointTargets& target,
                                 const KeypointLossWeights& weights,
                                 const FocalParams& focal,
                                 DetectionMaps* box_grad, KeypointMaps* kp_grad) {
  const KeypointMaps& t = target.maps;
  if (kp_pred.num_keypoints != t.num_keypoints || kp_pred.height != t.height ||
      kp_pred.width != t.width) {
    throw Error("keypoint maps and targets differ in shape");
  }
  KeypointLoss out;
  out.box = total_detection_loss(box_pred, target.boxes, weights.box, focal, box_grad);
  if (kp_grad != nullptr) *kp_grad = KeypointMaps::zeros(t.num_keypoints, t.height, t.width);
  const bool any_visible =
      std::any_of(target.offset_mask.begin(), target.offset_mask.end(),
                  [](auto m) { return m != 0; });
  if (any_visible) {
    std::span<double> gh, go, ga;
    if (kp_grad != nullptr) {
      gh = kp_grad->heatmap;
      go = kp_grad->offset;
      ga = kp_grad->allocation;
    }
    out.kp_heatmap = focal_loss(kp_pred.heatmap, t.heatmap, focal, gh);
    out.kp_offset = masked_l1_loss(kp_pred.offset, t.offset, target.offset_mask, 2, go);
    out.allocation = grouped_masked_l1_loss(kp_pred.allocation, t.allocation,
                                            target.allocation_mask,
                                            t.num_keypoints, ga);
    for (double& v : gh) v *= weights.kp_heatmap;
    for (double& v : go) v *= weights.kp_offset;
    for (double& v : ga) v *= weights.allocation;
  }
  out.total = out.box.total + weights.kp_heatmap * out.kp_heatmap +
              weights.kp_offset * out.kp_offset + weights.allocation * out.allocation;
  return out;
}

std::vector<KeypointInstance> decode_keypoints(const DetectionMaps& box_pred,
                                               const KeypointMaps& kp_pred,
                                               const KeypointDecodeParams& params) {
  if (box_pred.height != kp_pred.height || box_pred.width != kp_pred.width) {
    throw Error("box and keypoint maps differ in grid shape");
  }
  const int stride = params.stride;
  const std::size_t plane = kp_pred.plane();
  const std::size_t width = kp_pred.width;
  const std::size_t num_kp = kp_pred.num_keypoints;

  struct Candidate {
    Point2 pos;
    double score;
  };
  std::vector<std::vector<Candidate>> candidates(num_kp);
  for (std::size_t k = 0; k < num_kp; ++k) {
    const auto peaks = top_peaks(std::span(kp_pred.heatmap).subspan(k * plane, plane),
                                 1, kp_pred.height, width, params.top_t,
                                 params.keypoint_threshold);
    for (const Peak& pk : peaks) {
      const std::size_t pix = pk.row * width + pk.col;
      candidates[k].push_back(
          {{(static_cast<double>(pk.col) + kp_pred.offset[pix]) * stride,
            (static_cast<double>(pk.row) + kp_pred.offset[plane + pix]) * stride},
           pk.score});
    }
  }

  const auto box_peaks = top_peaks(box_pred.heatmap, box_pred.num_classes,
                                   box_pred.height, box_pred.width, params.top_t,
                                   params.box_threshold);
  std::vector<KeypointInstance> out;
  out.reserve(box_peaks.size());
  for (const Peak& bp : box_peaks) {
    KeypointInstance inst;
    inst.box = box_from_peak(box_pred, bp, stride);
    inst.score = bp.score;
    const std::size_t pix = bp.row * width + bp.col;
    const Point2 center{(static_cast<double>(bp.col) + box_pred.offset[pix]) * stride,
                        (static_cast<double>(bp.row) + box_pred.offset[plane + pix]) * stride};
    inst.keypoints.resize(num_kp);
    for (std::size_t k = 0; k < num_kp; ++k) {
      const Point2 guess{center.x + kp_pred.allocation[(2 * k) * plane + pix] * stride,
                         center.y + kp_pred.allocation[(2 * k + 1) * plane + pix] * stride};
      Point2 best = guess;
      double best_d = std::numeric_limits<double>::infinity();
      double best_score = -1.0;
      for (const Candidate& c : candidates[k]) {
        if (!inst.box.contains(c.pos, 1e-6)) continue;
        const double dx = c.pos.x - guess.x, dy = c.pos.y - guess.y;
        const double d = dx * dx + dy * dy;
        if (d < best_d || (d == best_d && c.score > best_score)) {
          best_d = d;
          best_score = c.score;
          best = c.pos;
        }
      }
      inst.keypoints[k] = {best.x, best.y, true};
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace xfer::centernet
