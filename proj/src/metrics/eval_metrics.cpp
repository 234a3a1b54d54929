#include "xfer/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace xfer {
namespace {

struct Flagged {
  double score;
  bool tp;
};

// Greedy matching within one image: predictions in descending score order
// (ties by input index) claim the unmatched ground truth of highest
// similarity at or above the threshold.
template <class Pred, class Gt, class Sim>
void match_image(const std::vector<Pred>& preds, const std::vector<Gt>& gts,
                 double threshold, Sim&& sim, std::vector<Flagged>& out) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score() > preds[b].score();
  });
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t pi : order) {
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double s = sim(preds[pi], gts[g]);
      if (s >= threshold && s > best) {
        best = s;
        best_g = g;
      }
    }
    const bool tp = best_g < gts.size();
    if (tp) taken[best_g] = true;
    out.push_back({preds[pi].score(), tp});
  }
}

std::vector<PRPoint> curve_from_flags(std::vector<Flagged> flags,
                                      std::size_t num_gt) {
  std::sort(flags.begin(), flags.end(),
            [](const Flagged& a, const Flagged& b) { return a.score > b.score; });
  std::vector<PRPoint> curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    (flags[i].tp ? tp : fp) += 1;
    const bool group_end =
        i + 1 == flags.size() || flags[i + 1].score != flags[i].score;
    if (!group_end) continue;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(tp + fp),
                     num_gt == 0 ? 0.0
                                 : static_cast<double>(tp) /
                                       static_cast<double>(num_gt)});
  }
  return curve;
}

// Adapter so keypoint instances expose score() like boxes do.
struct ScoredInstance {
  const KeypointInstance* inst;
  double score() const { return inst->score; }
};

void require_same_count(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error("prediction and ground-truth image counts differ (" +
                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void require_same_shape(std::size_t w1, std::size_t h1, std::size_t w2,
                        std::size_t h2) {
  if (w1 != w2 || h1 != h2) throw Error("grid shape mismatch");
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

void ConfusionMatrix::accumulate(const LabelGrid& pred, const LabelGrid& gt) {
  require_same_shape(pred.width(), pred.height(), gt.width(), gt.height());
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == gt.ignore_id()) continue;
    if (g[i] >= n_) throw Error("ground-truth label out of range");
    if (p[i] >= n_) throw Error("predicted label out of range");
    ++counts_[g[i] * n_ + p[i]];
  }
}

ConfusionMatrix confusion_matrix(const LabelGrid& pred, const LabelGrid& gt,
                                 std::size_t num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.accumulate(pred, gt);
  return cm;
}

MeanIoU mean_iou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("no evaluable pixels");
  const std::size_t n = cm.num_classes();
  MeanIoU out;
  out.per_class.resize(n);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t uni = row + col - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    out.per_class[c] = iou;
    sum += iou;
    ++present;
  }
  out.metric = headline_metric(TaskType::SemanticSegmentation,
                               sum / static_cast<double>(present));
  return out;
}

MeanIoU mean_iou(const LabelGrid& pred, const LabelGrid& gt,
                 std::size_t num_classes) {
  return mean_iou(confusion_matrix(pred, gt, num_classes));
}

MeanIoU mean_iou(std::span<const LabelGrid> preds, std::span<const LabelGrid> gts,
                 std::size_t num_classes) {
  require_same_count(preds.size(), gts.size());
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.accumulate(preds[i], gts[i]);
  return mean_iou(cm);
}

std::vector<PRPoint> precision_recall_curve(std::span<const ImageDetections> dets,
                                            std::span<const ImageBoxes> gts,
                                            double iou_threshold, int class_id) {
  require_same_count(dets.size(), gts.size());
  std::vector<Flagged> flags;
  std::size_t num_gt = 0;
  for (std::size_t img = 0; img < dets.size(); ++img) {
    ImageDetections d;
    ImageBoxes g;
    for (const auto& b : dets[img]) {
      if (b.class_id() == class_id) d.push_back(b);
    }
    for (const auto& b : gts[img]) {
      if (b.class_id() == class_id) g.push_back(b);
    }
    num_gt += g.size();
    match_image(d, g, iou_threshold,
                [](const Box& a, const Box& b) { return box_iou(a, b); }, flags);
  }
  return curve_from_flags(std::move(flags), num_gt);
}

double area_under_envelope(std::span<const PRPoint> curve) {
  double area = 0.0;
  double envelope = 0.0;
  // walk backwards so the running max is the precision envelope
  for (std::size_t k = curve.size(); k-- > 0;) {
    envelope = std::max(envelope, curve[k].precision);
    const double prev_recall = k == 0 ? 0.0 : curve[k - 1].recall;
    area += (curve[k].recall - prev_recall) * envelope;
  }
  return area;
}

std::optional<double> average_precision(std::span<const ImageDetections> dets,
                                        std::span<const ImageBoxes> gts,
                                        double iou_threshold, int class_id) {
  require_same_count(dets.size(), gts.size());
  std::size_t num_gt = 0, num_det = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    num_det += std::count_if(dets[i].begin(), dets[i].end(),
                             [&](const Box& b) { return b.class_id() == class_id; });
    num_gt += std::count_if(gts[i].begin(), gts[i].end(),
                            [&](const Box& b) { return b.class_id() == class_id; });
  }
  if (num_gt == 0 && num_det == 0) return std::nullopt;
  if (num_gt == 0 || num_det == 0) return 0.0;
  const auto curve = precision_recall_curve(dets, gts, iou_threshold, class_id);
  return area_under_envelope(curve);
}

MetricValue coco_map(std::span<const ImageDetections> dets,
                     std::span<const ImageBoxes> gts) {
  require_same_count(dets.size(), gts.size());
  std::set<int> classes;
  for (const auto& img : dets) {
    for (const auto& b : img) classes.insert(b.class_id());
  }
  for (const auto& img : gts) {
    for (const auto& b : img) classes.insert(b.class_id());
  }
  if (classes.empty()) throw Error("no evaluable classes");
  double sum = 0.0;
  std::size_t counted = 0;
  for (int c : classes) {
    double class_sum = 0.0;
    for (double t : kCocoIouThresholds) {
      class_sum += average_precision(dets, gts, t, c).value_or(0.0);
    }
    sum += class_sum / static_cast<double>(kCocoIouThresholds.size());
    ++counted;
  }
  return headline_metric(TaskType::ObjectDetection,
                         sum / static_cast<double>(counted));
}

double oks(const KeypointInstance& pred, const KeypointInstance& gt,
           double object_scale, std::span<const double> k_sigmas) {
  if (pred.num_keypoints() != gt.num_keypoints()) {
    throw Error("keypoint count mismatch");
  }
  if (k_sigmas.size() != gt.num_keypoints()) {
    throw Error("one sigma per keypoint required");
  }
  if (!(object_scale > 0.0)) throw Error("object scale must be positive");
  double sum = 0.0;
  std::size_t visible = 0;
  for (std::size_t i = 0; i < gt.num_keypoints(); ++i) {
    const auto& g = gt.keypoints[i];
    if (!g.visible) continue;
    const auto& p = pred.keypoints[i];
    const double dx = p.x - g.x, dy = p.y - g.y;
    const double denom = 2.0 * object_scale * object_scale * k_sigmas[i] * k_sigmas[i];
    sum += std::exp(-(dx * dx + dy * dy) / denom);
    ++visible;
  }
  if (visible == 0) throw Error("no visible ground-truth keypoints");
  return sum / static_cast<double>(visible);
}

std::vector<double> uniform_sigmas(std::size_t num_keypoints, double sigma) {
  return std::vector<double>(num_keypoints, sigma);
}

MetricValue keypoint_ap50(std::span<const ImageKeypoints> preds,
                          std::span<const ImageKeypoints> gts,
                          std::span<const double> k_sigmas) {
  require_same_count(preds.size(), gts.size());
  std::vector<Flagged> flags;
  std::size_t num_gt = 0, num_pred = 0;
  for (std::size_t img = 0; img < preds.size(); ++img) {
    std::vector<ScoredInstance> p;
    for (const auto& inst : preds[img]) p.push_back({&inst});
    std::vector<const KeypointInstance*> g;
    for (const auto& inst : gts[img]) {
      if (inst.num_visible() > 0) g.push_back(&inst);
    }
    num_gt += g.size();
    num_pred += p.size();
    match_image(p, g, 0.5,
                [&](const ScoredInstance& a, const KeypointInstance* b) {
                  return oks(*a.inst, *b, std::sqrt(b->box.area()), k_sigmas);
                },
                flags);
  }
  if (num_gt == 0 && num_pred == 0) throw Error("no evaluable keypoint instances");
  if (num_gt == 0 || num_pred == 0) {
    return headline_metric(TaskType::KeypointDetection, 0.0);
  }
  const auto curve = curve_from_flags(std::move(flags), num_gt);
  return headline_metric(TaskType::KeypointDetection, area_under_envelope(curve));
}

MetricValue depth_rmse(std::span<const DepthGrid> preds,
                       std::span<const DepthGrid> gts) {
  require_same_count(preds.size(), gts.size());
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto& p = preds[k];
    const auto& g = gts[k];
    require_same_shape(p.width(), p.height(), g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.valid(i)) continue;
      const double d = p.depth()[i] - g.depth()[i];
      sq += d * d;
      ++n;
    }
  }
  if (n == 0) throw Error("no valid depth pixels");
  return {TaskType::DepthEstimation, std::sqrt(sq / static_cast<double>(n)),
          Direction::LowerBetter};
}

MetricValue depth_rmse(const DepthGrid& pred, const DepthGrid& gt) {
  return depth_rmse(std::span(&pred, 1), std::span(&gt, 1));
}

MetricValue depth_delta(std::span<const DepthGrid> preds,
                        std::span<const DepthGrid> gts, double threshold) {
  require_same_count(preds.size(), gts.size());
  std::size_t hit = 0, n = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto& p = preds[k];
    const auto& g = gts[k];
    require_same_shape(p.width(), p.height(), g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.valid(i)) continue;
      const double z = g.depth()[i];
      const double zh = p.depth()[i];
      if (!(z > 0.0) || !(zh > 0.0)) {
        throw Error("depth delta needs strictly positive depths at valid pixels");
      }
      if (std::max(zh / z, z / zh) < threshold) ++hit;
      ++n;
    }
  }
  if (n == 0) throw Error("no valid depth pixels");
  return {TaskType::DepthEstimation,
          static_cast<double>(hit) / static_cast<double>(n),
          Direction::HigherBetter};
}

MetricValue depth_delta(const DepthGrid& pred, const DepthGrid& gt,
                        double threshold) {
  return depth_delta(std::span(&pred, 1), std::span(&gt, 1), threshold);
}

}  // namespace xfer
