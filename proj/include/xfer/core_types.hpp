#pragma once

// Shared value types for the transfer-learning harness: task kinds, boxes,
// dense label/depth grids, keypoint instances and embedding feature sets.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xfer {

/// Raised for contract violations on inputs (shape mismatch, empty sets, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskType : std::uint8_t {
  SemanticSegmentation,
  ObjectDetection,
  KeypointDetection,
  DepthEstimation,
};

inline constexpr TaskType kAllTaskTypes[] = {
    TaskType::SemanticSegmentation, TaskType::ObjectDetection,
    TaskType::KeypointDetection, TaskType::DepthEstimation};

enum class Direction : std::uint8_t { HigherBetter, LowerBetter };

/// Direction of the headline metric of a task type (depth RMSE is the only
/// lower-better one).
constexpr Direction headline_direction(TaskType t) {
  return t == TaskType::DepthEstimation ? Direction::LowerBetter
                                        : Direction::HigherBetter;
}

std::string_view to_string(TaskType t);
std::string_view to_string(Direction d);
TaskType parse_task_type(std::string_view s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box, top-left anchored, in continuous image coordinates.
/// Predictions carry a score; ground truth leaves it at 1.
class Box {
 public:
  Box() = default;
  Box(double x, double y, double w, double h, int class_id = 0,
      double score = 1.0);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  int class_id() const { return class_id_; }
  double score() const { return score_; }
  double area() const { return w_ * h_; }
  Point2 center() const { return {x_ + w_ / 2.0, y_ + h_ / 2.0}; }

  Box with_score(double s) const;
  bool contains(Point2 p, double tol = 0.0) const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_ = 0.0, y_ = 0.0, w_ = 1.0, h_ = 1.0;
  int class_id_ = 0;
  double score_ = 1.0;
};

using Detection = Box;

double box_iou(const Box& a, const Box& b);

/// Dense per-pixel class labels, row-major. One id is reserved for
/// ignore/background-to-skip.
class LabelGrid {
 public:
  static constexpr std::uint16_t kDefaultIgnore =
      std::numeric_limits<std::uint16_t>::max();

  LabelGrid() = default;
  LabelGrid(std::size_t width, std::size_t height, std::uint16_t fill = 0,
            std::uint16_t ignore_id = kDefaultIgnore);
  LabelGrid(std::size_t width, std::size_t height,
            std::vector<std::uint16_t> labels,
            std::uint16_t ignore_id = kDefaultIgnore);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return labels_.size(); }
  std::uint16_t ignore_id() const { return ignore_id_; }

  std::uint16_t at(std::size_t row, std::size_t col) const {
    return labels_[row * width_ + col];
  }
  std::uint16_t& at(std::size_t row, std::size_t col) {
    return labels_[row * width_ + col];
  }
  std::span<const std::uint16_t> labels() const { return labels_; }
  std::span<std::uint16_t> labels() { return labels_; }

  /// Throws if any non-ignore label is >= num_classes.
  void validate(std::size_t num_classes) const;

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;

 private:
  std::size_t width_ = 0, height_ = 0;
  std::vector<std::uint16_t> labels_;
  std::uint16_t ignore_id_ = kDefaultIgnore;
};

/// Per-pixel non-negative depth with a validity mask, row-major.
class DepthGrid {
 public:
  DepthGrid() = default;
  DepthGrid(std::size_t width, std::size_t height, double fill = 0.0);
  DepthGrid(std::size_t width, std::size_t height, std::vector<double> depth,
            std::vector<std::uint8_t> valid = {});

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return depth_.size(); }

  double at(std::size_t row, std::size_t col) const {
    return depth_[row * width_ + col];
  }
  double& at(std::size_t row, std::size_t col) {
    return depth_[row * width_ + col];
  }
  bool valid(std::size_t idx) const { return valid_[idx] != 0; }
  void set_valid(std::size_t idx, bool v) { valid_[idx] = v ? 1 : 0; }
  std::size_t valid_count() const;

  std::span<const double> depth() const { return depth_; }
  std::span<double> depth() { return depth_; }
  std::span<const std::uint8_t> mask() const { return valid_; }

  friend bool operator==(const DepthGrid&, const DepthGrid&) = default;

 private:
  std::size_t width_ = 0, height_ = 0;
  std::vector<double> depth_;
  std::vector<std::uint8_t> valid_;
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  bool visible = false;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct KeypointInstance {
  std::vector<Keypoint> keypoints;
  Box box;
  double score = 1.0;

  std::size_t num_keypoints() const { return keypoints.size(); }
  std::size_t num_visible() const;

  friend bool operator==(const KeypointInstance&, const KeypointInstance&) = default;
};

/// A dataset's embedding vectors, stored row-major as float32.
class FeatureSet {
 public:
  static constexpr std::size_t kDefaultDim = 720;

  FeatureSet() = default;
  FeatureSet(std::string dataset_id, std::string domain_label, std::size_t dim,
             std::vector<float> data, std::uint64_t sample_seed = 0);

  const std::string& dataset_id() const { return dataset_id_; }
  const std::string& domain_label() const { return domain_label_; }
  std::size_t dim() const { return dim_; }
  std::size_t count() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::uint64_t sample_seed() const { return sample_seed_; }
  bool empty() const { return data_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const float> data() const { return data_; }

  FeatureSet with_identity(std::string dataset_id,
                           std::string domain_label) const;

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;

 private:
  std::string dataset_id_;
  std::string domain_label_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::uint64_t sample_seed_ = 0;
};

}  // namespace xfer
