#pragma once

// CenterNet-style encoding of boxes and keypoints into dense training targets,
// the matching losses with analytic gradients, and decoding of predicted maps
// back into detections.
//
// All maps are channel-major: element (c, row, col) lives at
// c * H * W + row * W + col. Two-channel maps store x in channel 0 and y (or
// w, h) in channel 1. Box geometry in the maps is in feature units (image
// coordinates divided by the stride).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer::centernet {

/// Class heatmap, center offsets and box sizes over an H x W feature grid.
struct DetectionMaps {
  std::size_t num_classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> heatmap;  // C x H x W
  std::vector<double> offset;   // 2 x H x W
  std::vector<double> size;     // 2 x H x W

  static DetectionMaps zeros(std::size_t num_classes, std::size_t height,
                             std::size_t width);
  std::size_t plane() const { return height * width; }
};

struct CenterCell {
  int class_id = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

struct TargetMaps {
  DetectionMaps maps;
  std::vector<std::uint8_t> center_mask;  // H x W
  std::vector<CenterCell> centers;
  int stride = 4;
};

/// Keypoint heatmap (M4), keypoint offsets (M5) and the center-to-keypoint
/// allocation map (M6).
struct KeypointMaps {
  std::size_t num_keypoints = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> heatmap;     // K x H x W
  std::vector<double> offset;      // 2 x H x W
  std::vector<double> allocation;  // 2K x H x W, channel 2k = dx, 2k+1 = dy

  static KeypointMaps zeros(std::size_t num_keypoints, std::size_t height,
                            std::size_t width);
  std::size_t plane() const { return height * width; }
};

struct KeypointTargets {
  TargetMaps boxes;  // single class
  KeypointMaps maps;
  std::vector<std::uint8_t> offset_mask;      // H x W
  std::vector<std::uint8_t> allocation_mask;  // K x H x W
};

inline constexpr int kDefaultStride = 4;
inline constexpr double kDefaultMinIou = 0.7;

/// Largest corner shift r keeping IoU >= min_iou with the original box, over
/// the three corner-shift configurations (translate, shrink, grow).
double gaussian_radius(double w, double h, double min_iou = kDefaultMinIou);

/// Max-combines exp(-d^2 / (2 sigma^2)), sigma = radius / 3, around (row, col)
/// into an H x W plane. The center pixel is set to exactly 1.
void draw_gaussian(std::span<double> plane, std::size_t height,
                   std::size_t width, std::size_t row, std::size_t col,
                   double radius);

TargetMaps encode_detection_targets(std::span<const Box> boxes,
                                    std::size_t num_classes, std::size_t height,
                                    std::size_t width, int stride = kDefaultStride);

struct FocalParams {
  double alpha = 2.0;
  double beta = 4.0;
  double eps = 1e-4;  // predictions are clamped into [eps, 1 - eps]
};

/// Penalty-reduced pixel-wise logistic focal loss, normalised by the number
/// of pixels where target == 1. Writes dL/dpred into grad when non-empty.
double focal_loss(std::span<const double> pred, std::span<const double> target,
                  const FocalParams& params = {}, std::span<double> grad = {});

/// (1/N) sum over masked pixels of sum_c |pred - target|. Layout C x plane,
/// mask is one plane; N = number of masked pixels.
double masked_l1_loss(std::span<const double> pred,
                      std::span<const double> target,
                      std::span<const std::uint8_t> mask, std::size_t channels,
                      std::span<double> grad = {});

/// Like masked_l1_loss but with one mask plane per channel group. The mask
/// is groups x plane; each group covers pred.size() / mask.size() consecutive
/// channels. N counts masked (group, pixel) pairs.
double grouped_masked_l1_loss(std::span<const double> pred,
                              std::span<const double> target,
                              std::span<const std::uint8_t> mask,
                              std::size_t groups, std::span<double> grad = {});

struct DetectionLossWeights {
  double offset = 1.0;
  double size = 0.1;
};

struct DetectionLoss {
  double cls = 0.0;
  double offset = 0.0;
  double size = 0.0;
  double total = 0.0;
};

inline double combine_detection_loss(double cls, double offset, double size,
                                     const DetectionLossWeights& w = {}) {
  return cls + w.offset * offset + w.size * size;
}

/// L = L_cls + w_off * L_off + w_size * L_size. pred.heatmap holds
/// probabilities. grad (if given) receives dL/d(pred maps).
DetectionLoss total_detection_loss(const DetectionMaps& pred,
                                   const TargetMaps& target,
                                   const DetectionLossWeights& weights = {},
                                   const FocalParams& focal = {},
                                   DetectionMaps* grad = nullptr);

struct Peak {
  int class_id = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double score = 0.0;
};

/// Strict 3x3 local maxima with score >= threshold, best top_t by score
/// (ties by class, row, col).
std::vector<Peak> top_peaks(std::span<const double> heatmap,
                            std::size_t channels, std::size_t height,
                            std::size_t width, std::size_t top_t,
                            double score_threshold);

inline constexpr std::size_t kDefaultTopT = 100;

std::vector<Detection> decode_detections(const DetectionMaps& pred,
                                         int stride = kDefaultStride,
                                         std::size_t top_t = kDefaultTopT,
                                         double score_threshold = 0.0);

inline constexpr double kDefaultNmsIou = 0.3;

/// Greedy per-class suppression of IoU >= iou_threshold. Survivors keep
/// their input order.
std::vector<Detection> nms(std::span<const Detection> dets,
                           double iou_threshold = kDefaultNmsIou);

KeypointTargets encode_keypoint_targets(std::span<const KeypointInstance> instances,
                                        std::size_t num_keypoints,
                                        std::size_t height, std::size_t width,
                                        int stride = kDefaultStride);

struct KeypointLossWeights {
  DetectionLossWeights box{};
  double kp_heatmap = 1.0;
  double kp_offset = 1.0;
  double allocation = 1.0;
};

struct KeypointLoss {
  DetectionLoss box;
  double kp_heatmap = 0.0;
  double kp_offset = 0.0;
  double allocation = 0.0;
  double total = 0.0;
};

/// Box losses plus keypoint focal, keypoint offset L1 and allocation L1.
/// Keypoint terms are skipped (zero) when no keypoint is visible.
KeypointLoss total_keypoint_loss(const DetectionMaps& box_pred,
                                 const KeypointMaps& kp_pred,
                                 const KeypointTargets& target,
                                 const KeypointLossWeights& weights = {},
                                 const FocalParams& focal = {},
                                 DetectionMaps* box_grad = nullptr,
                                 KeypointMaps* kp_grad = nullptr);

struct KeypointDecodeParams {
  int stride = kDefaultStride;
  std::size_t top_t = kDefaultTopT;
  double box_threshold = 0.0;
  double keypoint_threshold = 0.1;
};

/// Boxes from the detection maps; per keypoint channel the candidate nearest
/// to the allocation-regressed guess among those inside the box, otherwise
/// the guess itself.
std::vector<KeypointInstance> decode_keypoints(const DetectionMaps& box_pred,
                                               const KeypointMaps& kp_pred,
                                               const KeypointDecodeParams& params = {});

}  // namespace xfer::centernet
