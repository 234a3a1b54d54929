#include "xfer/core_types.hpp"

#include <algorithm>
#include <cmath>

namespace xfer {

std::string_view to_string(TaskType t) {
  switch (t) {
    case TaskType::SemanticSegmentation: return "segmentation";
    case TaskType::ObjectDetection: return "detection";
    case TaskType::KeypointDetection: return "keypoints";
    case TaskType::DepthEstimation: return "depth";
  }
  return "unknown";
}

std::string_view to_string(Direction d) {
  return d == Direction::HigherBetter ? "higher-better" : "lower-better";
}

TaskType parse_task_type(std::string_view s) {
  for (TaskType t : kAllTaskTypes) {
    if (to_string(t) == s) return t;
  }
  throw Error("unknown task type '" + std::string(s) + "'");
}

Box::Box(double x, double y, double w, double h, int class_id, double score)
    : x_(x), y_(y), w_(w), h_(h), class_id_(class_id), score_(score) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw Error("box extents must be strictly positive");
  }
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) ||
      !std::isfinite(h)) {
    throw Error("box coordinates must be finite");
  }
}

Box Box::with_score(double s) const {
  Box b = *this;
  b.score_ = s;
  return b;
}

bool Box::contains(Point2 p, double tol) const {
  return p.x >= x_ - tol && p.x <= x_ + w_ + tol && p.y >= y_ - tol &&
         p.y <= y_ + h_ + tol;
}

double box_iou(const Box& a, const Box& b) {
  // extents from corners everywhere, so that box_iou(a, a) is exactly 1
  const double ax2 = a.x() + a.w(), ay2 = a.y() + a.h();
  const double bx2 = b.x() + b.w(), by2 = b.y() + b.h();
  const double ix = std::min(ax2, bx2) - std::max(a.x(), b.x());
  const double iy = std::min(ay2, by2) - std::max(a.y(), b.y());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double area_a = (ax2 - a.x()) * (ay2 - a.y());
  const double area_b = (bx2 - b.x()) * (by2 - b.y());
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

LabelGrid::LabelGrid(std::size_t width, std::size_t height, std::uint16_t fill,
                     std::uint16_t ignore_id)
    : width_(width),
      height_(height),
      labels_(width * height, fill),
      ignore_id_(ignore_id) {
  if (width == 0 || height == 0) throw Error("label grid must be non-empty");
}

LabelGrid::LabelGrid(std::size_t width, std::size_t height,
                     std::vector<std::uint16_t> labels, std::uint16_t ignore_id)
    : width_(width),
      height_(height),
      labels_(std::move(labels)),
      ignore_id_(ignore_id) {
  if (width == 0 || height == 0) throw Error("label grid must be non-empty");
  if (labels_.size() != width * height) {
    throw Error("label grid payload does not match width*height");
  }
}

void LabelGrid::validate(std::size_t num_classes) const {
  for (std::uint16_t l : labels_) {
    if (l != ignore_id_ && l >= num_classes) {
      throw Error("label id " + std::to_string(l) + " >= num_classes " +
                  std::to_string(num_classes));
    }
  }
}

DepthGrid::DepthGrid(std::size_t width, std::size_t height, double fill)
    : width_(width),
      height_(height),
      depth_(width * height, fill),
      valid_(width * height, 1) {
  if (width == 0 || height == 0) throw Error("depth grid must be non-empty");
  if (fill < 0.0) throw Error("depth must be non-negative");
}

DepthGrid::DepthGrid(std::size_t width, std::size_t height,
                     std::vector<double> depth, std::vector<std::uint8_t> valid)
    : width_(width),
      height_(height),
      depth_(std::move(depth)),
      valid_(std::move(valid)) {
  if (width == 0 || height == 0) throw Error("depth grid must be non-empty");
  if (depth_.size() != width * height) {
    throw Error("depth grid payload does not match width*height");
  }
  if (valid_.empty()) valid_.assign(depth_.size(), 1);
  if (valid_.size() != depth_.size()) {
    throw Error("depth validity mask does not match width*height");
  }
  for (std::size_t i = 0; i < depth_.size(); ++i) {
    if (valid_[i] && depth_[i] < 0.0) {
      throw Error("depth must be non-negative at valid pixels");
    }
  }
}

std::size_t DepthGrid::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(valid_.begin(), valid_.end(), [](auto v) { return v; }));
}

std::size_t KeypointInstance::num_visible() const {
  return static_cast<std::size_t>(std::count_if(
      keypoints.begin(), keypoints.end(), [](const Keypoint& k) {
        return k.visible;
      }));
}

FeatureSet::FeatureSet(std::string dataset_id, std::string domain_label,
                       std::size_t dim, std::vector<float> data,
                       std::uint64_t sample_seed)
    : dataset_id_(std::move(dataset_id)),
      domain_label_(std::move(domain_label)),
      dim_(dim),
      data_(std::move(data)),
      sample_seed_(sample_seed) {
  if (dim_ == 0) throw Error("feature dimension must be positive");
  if (data_.empty()) throw Error("feature set needs at least one vector");
  if (data_.size() % dim_ != 0) {
    throw Error("feature payload is not a multiple of the dimension");
  }
}

FeatureSet FeatureSet::with_identity(std::string dataset_id,
                                     std::string domain_label) const {
  FeatureSet f = *this;
  f.dataset_id_ = std::move(dataset_id);
  f.domain_label_ = std::move(domain_label);
  return f;
}

}  // namespace xfer
