#pragma once

// Evaluation metrics for the four task types: mean IoU (segmentation),
// COCO-style mAP (detection), AP at OKS 0.5 (keypoints), RMSE and delta
// accuracy (depth).

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer {

struct MetricValue {
  TaskType task = TaskType::SemanticSegmentation;
  double value = 0.0;
  Direction direction = Direction::HigherBetter;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

/// Headline metric of a task type (direction from headline_direction).
inline MetricValue headline_metric(TaskType t, double value) {
  return {t, value, headline_direction(t)};
}

struct PRPoint {
  double precision = 0.0;
  double recall = 0.0;
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : n_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return n_; }
  /// gt class i predicted as j
  std::int64_t at(std::size_t i, std::size_t j) const {
    return counts_[i * n_ + j];
  }
  std::int64_t& at(std::size_t i, std::size_t j) { return counts_[i * n_ + j]; }
  std::int64_t total() const;

  void accumulate(const LabelGrid& pred, const LabelGrid& gt);

 private:
  std::size_t n_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_matrix(const LabelGrid& pred, const LabelGrid& gt,
                                 std::size_t num_classes);

struct MeanIoU {
  MetricValue metric;
  /// nullopt for classes absent from both prediction and ground truth.
  std::vector<std::optional<double>> per_class;
};

MeanIoU mean_iou(const ConfusionMatrix& cm);
MeanIoU mean_iou(const LabelGrid& pred, const LabelGrid& gt,
                 std::size_t num_classes);
MeanIoU mean_iou(std::span<const LabelGrid> preds, std::span<const LabelGrid> gts,
                 std::size_t num_classes);

/// Per-image detections and ground truth; index i of both spans is image i.
using ImageDetections = std::vector<Detection>;
using ImageBoxes = std::vector<Box>;

/// Precision/recall at every distinct score cutoff (descending). Detections
/// with equal scores enter the curve together.
std::vector<PRPoint> precision_recall_curve(std::span<const ImageDetections> dets,
                                            std::span<const ImageBoxes> gts,
                                            double iou_threshold, int class_id);

/// All-point interpolated area under a PR curve.
double area_under_envelope(std::span<const PRPoint> curve);

/// nullopt when the class has neither ground truth nor detections. A class
/// with detections but no ground truth scores 0.
std::optional<double> average_precision(std::span<const ImageDetections> dets,
                                        std::span<const ImageBoxes> gts,
                                        double iou_threshold, int class_id);

inline constexpr std::array<double, 10> kCocoIouThresholds{
    0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};

/// Mean over IoU thresholds 0.50:0.05:0.95 and over evaluable classes.
MetricValue coco_map(std::span<const ImageDetections> dets,
                     std::span<const ImageBoxes> gts);

inline constexpr double kDefaultKeypointSigma = 0.1;

/// Object keypoint similarity over the visible ground-truth keypoints.
double oks(const KeypointInstance& pred, const KeypointInstance& gt,
           double object_scale, std::span<const double> k_sigmas);

/// Uniform sigma for every keypoint.
std::vector<double> uniform_sigmas(std::size_t num_keypoints,
                                   double sigma = kDefaultKeypointSigma);

using ImageKeypoints = std::vector<KeypointInstance>;

/// AP with OKS >= 0.5 as the match predicate. The object scale of a ground
/// truth instance is sqrt(box area). Instances without visible keypoints are
/// not evaluated.
MetricValue keypoint_ap50(std::span<const ImageKeypoints> preds,
                          std::span<const ImageKeypoints> gts,
                          std::span<const double> k_sigmas);

MetricValue depth_rmse(const DepthGrid& pred, const DepthGrid& gt);
MetricValue depth_rmse(std::span<const DepthGrid> preds,
                       std::span<const DepthGrid> gts);

inline constexpr double kDepthDeltaThreshold = 1.25;

MetricValue depth_delta(const DepthGrid& pred, const DepthGrid& gt,
                        double threshold = kDepthDeltaThreshold);
MetricValue depth_delta(std::span<const DepthGrid> preds,
                        std::span<const DepthGrid> gts,
                        double threshold = kDepthDeltaThreshold);

}  // namespace xfer
