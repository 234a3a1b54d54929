#pragma once

// Linear-nonlinear-linear toy network. The backbone maps each pixel's
// zero-padded P x P patch (plus a bias input) through W_b and tanh; a head is
// a linear map from (pooled) hidden activations to the task outputs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "xfer/centernet_codec.hpp"
#include "xfer/dense_losses.hpp"
#include "xfer/eval_metrics.hpp"
#include "xfer/toy/synth_data.hpp"

namespace xfer::toy {

/// ImageClassification is the pretraining objective; it is not a TaskType.
enum class HeadKind : std::uint8_t {
  Segmentation,
  Detection,
  Keypoints,
  Depth,
  ImageClassification,
};

std::string_view to_string(HeadKind k);
HeadKind head_kind(TaskType t);

struct HeadShape {
  HeadKind kind = HeadKind::Segmentation;
  std::size_t num_classes = 2;    // object classes
  std::size_t num_keypoints = 3;

  /// Output channels per feature pixel (per image for classification).
  std::size_t outputs() const;
  friend bool operator==(const HeadShape&, const HeadShape&) = default;
};

HeadShape head_shape(HeadKind kind, const SynthDomainSpec& spec);

struct Backbone {
  std::size_t channels = 0;
  std::size_t patch = 3;
  std::size_t hidden = 0;
  std::vector<double> weights;  // hidden x input_dim, bias in the last column

  std::size_t input_dim() const { return patch * patch * channels + 1; }
  friend bool operator==(const Backbone&, const Backbone&) = default;
};

struct Head {
  HeadShape shape;
  std::size_t hidden = 0;
  std::vector<double> weights;  // outputs x (hidden + 1), bias in the last column

  friend bool operator==(const Head&, const Head&) = default;
};

struct ToyModel {
  Backbone backbone;
  Head head;
  int stride = 1;  // feature stride of the detection and keypoint heads

  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

Backbone init_backbone(std::size_t channels, std::size_t patch, std::size_t hidden,
                       std::uint64_t seed);
Head init_head(const HeadShape& shape, std::size_t hidden, std::uint64_t seed);
/// Copies the backbone and attaches a freshly initialised head.
ToyModel with_fresh_head(const Backbone& backbone, const HeadShape& shape,
                         std::uint64_t seed, int stride = 1);

struct Activations {
  std::size_t height = 0, width = 0;
  std::size_t feat_height = 0, feat_width = 0;
  std::vector<double> patches;   // pixels x input_dim
  std::vector<double> hidden;    // pixels x hidden (post tanh)
  std::vector<double> features;  // feature pixels x hidden
  std::vector<double> outputs;   // feature pixels x outputs, pixel-major
};

/// Throws on channel mismatch or when the stride does not divide the image.
Activations forward(const ToyModel& model, const SynthImage& image);

/// Backbone response of one input patch vector (length input_dim, bias
/// included), before and after the nonlinearity.
void backbone_response(const Backbone& bb, std::span<const double> patch,
                       std::span<double> pre, std::span<double> post);

/// Typed views of the head outputs.
LogitGrid segmentation_logits(const ToyModel& model, const Activations& act);
DepthGrid depth_prediction(const ToyModel& model, const Activations& act);
centernet::DetectionMaps detection_maps(const ToyModel& model, const Activations& act);
centernet::KeypointMaps keypoint_maps(const ToyModel& model, const Activations& act);

struct ModelGrad {
  std::vector<double> backbone;
  std::vector<double> head;

  static ModelGrad zeros_like(const ToyModel& m);
  void scale(double s);
};

struct LossOptions {
  centernet::DetectionLossWeights detection{};
  centernet::KeypointLossWeights keypoints{};
  centernet::FocalParams focal{};
  double smooth_weight = kDefaultSmoothWeight;
};

/// Task loss of one image; accumulates dL/dparams into grad when given.
double image_loss(const ToyModel& model, const SynthImage& image,
                  const LossOptions& opts = {}, ModelGrad* grad = nullptr);

struct EvalOptions {
  bool nms = true;
  double nms_iou = centernet::kDefaultNmsIou;
  std::size_t top_t = centernet::kDefaultTopT;
  double keypoint_threshold = 0.1;
};

/// Headline metric of the model's task over a set of images.
MetricValue evaluate(const ToyModel& model, std::span<const SynthImage> images,
                     const EvalOptions& opts = {});
/// Fraction of images whose image_class is the arg-max logit.
double classification_accuracy(const ToyModel& model, std::span<const SynthImage> images);

/// Per-image average-pooled hidden activations, as float32 rows.
FeatureSet embed_images(const Backbone& bb, std::span<const SynthImage> images,
                        std::string dataset_id, std::string domain_label);

/// Embeds the training split and keeps a seeded sample of at most n images.
FeatureSet embed_features(const Backbone& bb, const SynthDataset& ds, std::size_t n,
                          std::uint64_t seed);

}  // namespace xfer::toy
