#pragma once

// Pixel-wise losses for the segmentation and depth heads.

#include <cstddef>
#include <span>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer {

/// H x W x C logits, pixel-major (the C values of a pixel are contiguous).
class LogitGrid {
 public:
  LogitGrid() = default;
  LogitGrid(std::size_t width, std::size_t height, std::size_t channels,
            double fill = 0.0);
  LogitGrid(std::size_t width, std::size_t height, std::size_t channels,
            std::vector<double> data);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixels() const { return width_ * height_; }

  std::span<const double> pixel(std::size_t idx) const {
    return {data_.data() + idx * channels_, channels_};
  }
  std::span<double> pixel(std::size_t idx) {
    return {data_.data() + idx * channels_, channels_};
  }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

 private:
  std::size_t width_ = 0, height_ = 0, channels_ = 0;
  std::vector<double> data_;
};

/// log(1 + exp(x)) without overflow.
double softplus(double x);
/// Derivative of softplus, i.e. the logistic sigmoid.
double softplus_grad(double x);

/// Per-class argmax of each pixel.
LabelGrid argmax_labels(const LogitGrid& logits);

/// Mean over non-ignore pixels of -log softmax(logits)[gt].
double segmentation_nll(const LogitGrid& logits, const LabelGrid& gt,
                        LogitGrid* grad = nullptr);

/// Mean absolute error over valid pixels.
double depth_l1_loss(const DepthGrid& pred, const DepthGrid& gt,
                     std::span<double> grad = {});

/// Mean over valid pixels of |dx gt - dx pred| + |dy gt - dy pred| with
/// forward differences, zero at the last column/row and wherever a
/// neighbour is invalid.
double depth_smoothness_loss(const DepthGrid& pred, const DepthGrid& gt,
                             std::span<double> grad = {});

struct DepthLoss {
  double l1 = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

inline constexpr double kDefaultSmoothWeight = 1.0;

DepthLoss depth_total_loss(const DepthGrid& pred, const DepthGrid& gt,
                           double smooth_weight = kDefaultSmoothWeight,
                           std::span<double> grad = {});

/// Depth head: depth = softplus(logit). Gradient is w.r.t. the logits.
DepthGrid depth_from_logits(std::span<const double> logits, std::size_t width,
                            std::size_t height);
DepthLoss depth_total_loss_from_logits(std::span<const double> logits,
                                       const DepthGrid& gt,
                                       double smooth_weight = kDefaultSmoothWeight,
                                       std::span<double> grad = {});

}  // namespace xfer
