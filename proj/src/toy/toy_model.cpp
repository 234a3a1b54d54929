#include "xfer/toy/toy_model.hpp"

#include <algorithm>
#include <cmath>

#include "xfer/domain_distance.hpp"
#include "xfer/simd/kernels.hpp"
#include "xfer/toy/rng.hpp"

namespace xfer::toy {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// logit of the initial heatmap probability
constexpr double kHeatPriorLogit = -2.1972245773362196;  // log(0.1 / 0.9)
// softplus^-1(3)
constexpr double kDepthPriorLogit = 2.9514447812064035;

std::size_t pool_factor(const ToyModel& m) {
  switch (m.head.shape.kind) {
    case HeadKind::Detection:
    case HeadKind::Keypoints: return static_cast<std::size_t>(m.stride);
    default: return 1;
  }
}

void fill_patches(const Backbone& bb, const SynthImage& img, std::vector<double>& out) {
  const std::size_t H = img.height, W = img.width, C = img.channels;
  const std::size_t din = bb.input_dim();
  const auto half = static_cast<std::ptrdiff_t>(bb.patch / 2);
  out.assign(H * W * din, 0.0);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      double* x = out.data() + (r * W + c) * din;
      std::size_t k = 0;
      for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
        for (std::ptrdiff_t dx = -half; dx <= half; ++dx, k += C) {
          const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r) + dy;
          const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c) + dx;
          if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(H) ||
              cc >= static_cast<std::ptrdiff_t>(W)) {
            continue;
          }
          const double* px = img.pixels.data() + (static_cast<std::size_t>(rr) * W +
                                                   static_cast<std::size_t>(cc)) * C;
          std::copy(px, px + C, x + k);
        }
      }
      x[din - 1] = 1.0;
    }
  }
}

void check_image(const Backbone& bb, const SynthImage& img) {
  if (img.channels != bb.channels) {
    throw Error("forward: image has " + std::to_string(img.channels) +
                " channels, backbone expects " + std::to_string(bb.channels));
  }
  if (img.pixels.size() != img.height * img.width * img.channels) {
    throw Error("forward: pixel buffer does not match image shape");
  }
  if (bb.patch % 2 == 0) throw Error("forward: patch size must be odd");
  if (bb.weights.size() != bb.hidden * bb.input_dim()) {
    throw Error("forward: backbone weights have the wrong size");
  }
}

void compute_hidden(const Backbone& bb, const std::vector<double>& patches,
                    std::size_t pixels, std::vector<double>& hidden) {
  const std::size_t din = bb.input_dim(), hid = bb.hidden;
  hidden.assign(pixels * hid, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::span<const double> x(patches.data() + p * din, din);
    for (std::size_t j = 0; j < hid; ++j) {
      hidden[p * hid + j] =
          std::tanh(simd::dot(std::span<const double>(bb.weights.data() + j * din, din), x));
    }
  }
}

}  // namespace

std::string_view to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Segmentation: return "segmentation";
    case HeadKind::Detection: return "detection";
    case HeadKind::Keypoints: return "keypoints";
    case HeadKind::Depth: return "depth";
    case HeadKind::ImageClassification: return "classification";
  }
  return "?";
}

HeadKind head_kind(TaskType t) {
  switch (t) {
    case TaskType::SemanticSegmentation: return HeadKind::Segmentation;
    case TaskType::ObjectDetection: return HeadKind::Detection;
    case TaskType::KeypointDetection: return HeadKind::Keypoints;
    case TaskType::DepthEstimation: return HeadKind::Depth;
  }
  throw Error("head_kind: bad task type");
}

std::size_t HeadShape::outputs() const {
  switch (kind) {
    case HeadKind::Segmentation: return num_classes + 1;
    case HeadKind::Detection: return num_classes + 4;
    case HeadKind::Keypoints: return 5 + 3 * num_keypoints + 2;
    case HeadKind::Depth: return 1;
    case HeadKind::ImageClassification: return num_classes;
  }
  return 0;
}

HeadShape head_shape(HeadKind kind, const SynthDomainSpec& spec) {
  return {kind, spec.num_classes, spec.num_keypoints};
}

Backbone init_backbone(std::size_t channels, std::size_t patch, std::size_t hidden,
                       std::uint64_t seed) {
  if (channels == 0 || hidden == 0 || patch % 2 == 0) {
    throw Error("init_backbone: bad shape");
  }
  Backbone bb;
  bb.channels = channels;
  bb.patch = patch;
  bb.hidden = hidden;
  const std::size_t din = bb.input_dim();
  bb.weights.resize(hidden * din);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(din - 1));
  for (std::size_t j = 0; j < hidden; ++j) {
    for (std::size_t i = 0; i + 1 < din; ++i) bb.weights[j * din + i] = scale * rng.normal();
    bb.weights[j * din + din - 1] = 0.0;
  }
  return bb;
}

Head init_head(const HeadShape& shape, std::size_t hidden, std::uint64_t seed) {
  Head h;
  h.shape = shape;
  h.hidden = hidden;
  const std::size_t out = shape.outputs(), cols = hidden + 1;
  h.weights.assign(out * cols, 0.0);
  Rng rng(seed);
  const double scale = 0.1 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t j = 0; j < hidden; ++j) h.weights[o * cols + j] = scale * rng.normal();
  }
  auto set_bias = [&](std::size_t o, double v) { h.weights[o * cols + hidden] = v; };
  switch (shape.kind) {
    case HeadKind::Detection:
      for (std::size_t c = 0; c < shape.num_classes; ++c) set_bias(c, kHeatPriorLogit);
      break;
    case HeadKind::Keypoints:
      set_bias(0, kHeatPriorLogit);
      for (std::size_t k = 0; k < shape.num_keypoints; ++k) set_bias(5 + k, kHeatPriorLogit);
      break;
    case HeadKind::Depth: set_bias(0, kDepthPriorLogit); break;
    default: break;
  }
  return h;
}

ToyModel with_fresh_head(const Backbone& backbone, const HeadShape& shape,
                         std::uint64_t seed, int stride) {
  if (stride < 1) throw Error("with_fresh_head: stride must be positive");
  return {backbone, init_head(shape, backbone.hidden, seed), stride};
}

void backbone_response(const Backbone& bb, std::span<const double> patch,
                       std::span<double> pre, std::span<double> post) {
  const std::size_t din = bb.input_dim();
  if (patch.size() != din || pre.size() != bb.hidden || post.size() != bb.hidden) {
    throw Error("backbone_response: shape mismatch");
  }
  for (std::size_t j = 0; j < bb.hidden; ++j) {
    pre[j] = simd::dot(std::span<const double>(bb.weights.data() + j * din, din), patch);
    post[j] = std::tanh(pre[j]);
  }
}

Activations forward(const ToyModel& model, const SynthImage& image) {
  const Backbone& bb = model.backbone;
  check_image(bb, image);
  const Head& head = model.head;
  if (head.hidden != bb.hidden || head.weights.size() != head.shape.outputs() * (bb.hidden + 1)) {
    throw Error("forward: head does not match backbone");
  }
  Activations a;
  a.height = image.height;
  a.width = image.width;
  const std::size_t pixels = a.height * a.width, hid = bb.hidden;
  fill_patches(bb, image, a.patches);
  compute_hidden(bb, a.patches, pixels, a.hidden);

  if (head.shape.kind == HeadKind::ImageClassification) {
    a.feat_height = a.feat_width = 1;
    a.features.assign(hid, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t j = 0; j < hid; ++j) a.features[j] += a.hidden[p * hid + j];
    }
    for (double& f : a.features) f /= static_cast<double>(pixels);
  } else {
    const std::size_t R = pool_factor(model);
    if (a.height % R != 0 || a.width % R != 0) {
      throw Error("forward: stride " + std::to_string(R) + " does not divide the image");
    }
    a.feat_height = a.height / R;
    a.feat_width = a.width / R;
    if (R == 1) {
      a.features = a.hidden;
    } else {
      a.features.assign(a.feat_height * a.feat_width * hid, 0.0);
      const double inv = 1.0 / static_cast<double>(R * R);
      for (std::size_t r = 0; r < a.height; ++r) {
        for (std::size_t c = 0; c < a.width; ++c) {
          const std::size_t fp = (r / R) * a.feat_width + c / R;
          for (std::size_t j = 0; j < hid; ++j) {
            a.features[fp * hid + j] += inv * a.hidden[(r * a.width + c) * hid + j];
          }
        }
      }
    }
  }

  const std::size_t fpix = a.feat_height * a.feat_width;
  const std::size_t out = head.shape.outputs(), cols = hid + 1;
  a.outputs.assign(fpix * out, 0.0);
  for (std::size_t fp = 0; fp < fpix; ++fp) {
    const std::span<const double> f(a.features.data() + fp * hid, hid);
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = head.weights.data() + o * cols;
      a.outputs[fp * out + o] = simd::dot(std::span<const double>(w, hid), f) + w[hid];
    }
  }
  return a;
}

LogitGrid segmentation_logits(const ToyModel& model, const Activations& act) {
  if (model.head.shape.kind != HeadKind::Segmentation) throw Error("not a segmentation head");
  return LogitGrid(act.feat_width, act.feat_height, model.head.shape.outputs(), act.outputs);
}

DepthGrid depth_prediction(const ToyModel& model, const Activations& act) {
  if (model.head.shape.kind != HeadKind::Depth) throw Error("not a depth head");
  return depth_from_logits(act.outputs, act.feat_width, act.feat_height);
}

centernet::DetectionMaps detection_maps(const ToyModel& model, const Activations& act) {
  const HeadShape& s = model.head.shape;
  const std::size_t out = s.outputs();
  const std::size_t classes = s.kind == HeadKind::Detection ? s.num_classes
                              : s.kind == HeadKind::Keypoints ? 1
                                                              : 0;
  if (classes == 0) throw Error("not a detection or keypoint head");
  auto m = centernet::DetectionMaps::zeros(classes, act.feat_height, act.feat_width);
  const std::size_t plane = m.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    const double* o = act.outputs.data() + p * out;
    for (std::size_t c = 0; c < classes; ++c) m.heatmap[c * plane + p] = sigmoid(o[c]);
    for (std::size_t k = 0; k < 2; ++k) {
      m.offset[k * plane + p] = o[classes + k];
      m.size[k * plane + p] = o[classes + 2 + k];
    }
  }
  return m;
}

centernet::KeypointMaps keypoint_maps(const ToyModel& model, const Activations& act) {
  const HeadShape& s = model.head.shape;
  if (s.kind != HeadKind::Keypoints) throw Error("not a keypoint head");
  const std::size_t out = s.outputs(), K = s.num_keypoints;
  auto m = centernet::KeypointMaps::zeros(K, act.feat_height, act.feat_width);
  const std::size_t plane = m.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    const double* o = act.outputs.data() + p * out + 5;
    for (std::size_t k = 0; k < K; ++k) m.heatmap[k * plane + p] = sigmoid(o[k]);
    for (std::size_t k = 0; k < 2; ++k) m.offset[k * plane + p] = o[K + k];
    for (std::size_t k = 0; k < 2 * K; ++k) m.allocation[k * plane + p] = o[K + 2 + k];
  }
  return m;
}

ModelGrad ModelGrad::zeros_like(const ToyModel& m) {
  return {std::vector<double>(m.backbone.weights.size(), 0.0),
          std::vector<double>(m.head.weights.size(), 0.0)};
}

void ModelGrad::scale(double s) {
  for (double& v : backbone) v *= s;
  for (double& v : head) v *= s;
}

namespace {

// dL/d(outputs) for the head's task; returns the loss.
double output_gradient(const ToyModel& model, const SynthImage& image,
                       const Activations& act, const LossOptions& opts,
                       std::vector<double>& d_out) {
  const HeadShape& s = model.head.shape;
  const std::size_t out = s.outputs();
  const std::size_t fpix = act.feat_height * act.feat_width;
  d_out.assign(fpix * out, 0.0);

  switch (s.kind) {
    case HeadKind::Segmentation: {
      const LogitGrid logits = segmentation_logits(model, act);
      LogitGrid g(logits.width(), logits.height(), logits.channels());
      const double loss = segmentation_nll(logits, image.segmentation, &g);
      std::copy(g.data().begin(), g.data().end(), d_out.begin());
      return loss;
    }
    case HeadKind::Depth: {
      return depth_total_loss_from_logits(act.outputs, image.depth, opts.smooth_weight, d_out)
          .total;
    }
    case HeadKind::Detection: {
      const auto target = centernet::encode_detection_targets(
          image.boxes, s.num_classes, act.feat_height, act.feat_width, model.stride);
      const auto maps = detection_maps(model, act);
      auto g = centernet::DetectionMaps::zeros(s.num_classes, act.feat_height, act.feat_width);
      const double loss =
          centernet::total_detection_loss(maps, target, opts.detection, opts.focal, &g).total;
      const std::size_t C = s.num_classes;
      for (std::size_t p = 0; p < fpix; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
          const double h = maps.heatmap[c * fpix + p];
          d_out[p * out + c] = g.heatmap[c * fpix + p] * h * (1.0 - h);
        }
        for (std::size_t k = 0; k < 2; ++k) {
          d_out[p * out + C + k] = g.offset[k * fpix + p];
          d_out[p * out + C + 2 + k] = g.size[k * fpix + p];
        }
      }
      return loss;
    }
    case HeadKind::Keypoints: {
      const std::size_t K = s.num_keypoints;
      const auto target = centernet::encode_keypoint_targets(
          image.keypoints, K, act.feat_height, act.feat_width, model.stride);
      const auto box = detection_maps(model, act);
      const auto kp = keypoint_maps(model, act);
      auto gb = centernet::DetectionMaps::zeros(1, act.feat_height, act.feat_width);
      auto gk = centernet::KeypointMaps::zeros(K, act.feat_height, act.feat_width);
      const double loss =
          centernet::total_keypoint_loss(box, kp, target, opts.keypoints, opts.focal, &gb, &gk)
              .total;
      for (std::size_t p = 0; p < fpix; ++p) {
        double* d = d_out.data() + p * out;
        const double h = box.heatmap[p];
        d[0] = gb.heatmap[p] * h * (1.0 - h);
        for (std::size_t k = 0; k < 2; ++k) {
          d[1 + k] = gb.offset[k * fpix + p];
          d[3 + k] = gb.size[k * fpix + p];
        }
        for (std::size_t k = 0; k < K; ++k) {
          const double hk = kp.heatmap[k * fpix + p];
          d[5 + k] = gk.heatmap[k * fpix + p] * hk * (1.0 - hk);
        }
        for (std::size_t k = 0; k < 2; ++k) d[5 + K + k] = gk.offset[k * fpix + p];
        for (std::size_t k = 0; k < 2 * K; ++k) d[7 + K + k] = gk.allocation[k * fpix + p];
      }
      return loss;
    }
    case HeadKind::ImageClassification: {
      const auto label = static_cast<std::size_t>(image.image_class);
      if (label >= out) throw Error("image class out of range for the head");
      const double mx = *std::max_element(act.outputs.begin(), act.outputs.end());
      double z = 0.0;
      for (std::size_t o = 0; o < out; ++o) z += std::exp(act.outputs[o] - mx);
      for (std::size_t o = 0; o < out; ++o) {
        d_out[o] = std::exp(act.outputs[o] - mx) / z - (o == label ? 1.0 : 0.0);
      }
      return std::log(z) + mx - act.outputs[label];
    }
  }
  throw Error("image_loss: bad head kind");
}

}  // namespace

double image_loss(const ToyModel& model, const SynthImage& image, const LossOptions& opts,
                  ModelGrad* grad) {
  const Activations act = forward(model, image);
  std::vector<double> d_out;
  const double loss = output_gradient(model, image, act, opts, d_out);
  if (grad == nullptr) return loss;
  if (grad->backbone.size() != model.backbone.weights.size() ||
      grad->head.size() != model.head.weights.size()) {
    throw Error("image_loss: gradient buffers do not match the model");
  }

  const std::size_t hid = model.backbone.hidden, cols = hid + 1;
  const std::size_t out = model.head.shape.outputs();
  const std::size_t fpix = act.feat_height * act.feat_width;
  std::vector<double> d_feat(fpix * hid, 0.0);
  for (std::size_t fp = 0; fp < fpix; ++fp) {
    const std::span<const double> f(act.features.data() + fp * hid, hid);
    std::span<double> df(d_feat.data() + fp * hid, hid);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = d_out[fp * out + o];
      if (g == 0.0) continue;
      double* gw = grad->head.data() + o * cols;
      simd::axpy(g, f, std::span<double>(gw, hid));
      gw[hid] += g;
      simd::axpy(g, std::span<const double>(model.head.weights.data() + o * cols, hid), df);
    }
  }

  const std::size_t pixels = act.height * act.width;
  const std::size_t din = model.backbone.input_dim();
  std::vector<double> d_pre(hid);
  double pool_scale;
  std::size_t R = 1;
  if (model.head.shape.kind == HeadKind::ImageClassification) {
    pool_scale = 1.0 / static_cast<double>(pixels);
  } else {
    R = pool_factor(model);
    pool_scale = 1.0 / static_cast<double>(R * R);
  }
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t fp = 0;
    if (model.head.shape.kind != HeadKind::ImageClassification) {
      fp = ((p / act.width) / R) * act.feat_width + (p % act.width) / R;
    }
    const std::span<const double> x(act.patches.data() + p * din, din);
    for (std::size_t j = 0; j < hid; ++j) {
      const double h = act.hidden[p * hid + j];
      d_pre[j] = pool_scale * d_feat[fp * hid + j] * (1.0 - h * h);
    }
    for (std::size_t j = 0; j < hid; ++j) {
      if (d_pre[j] == 0.0) continue;
      simd::axpy(d_pre[j], x, std::span<double>(grad->backbone.data() + j * din, din));
    }
  }
  return loss;
}

MetricValue evaluate(const ToyModel& model, std::span<const SynthImage> images,
                     const EvalOptions& opts) {
  if (images.empty()) throw Error("evaluate: no images");
  const HeadShape& s = model.head.shape;
  switch (s.kind) {
    case HeadKind::Segmentation: {
      std::vector<LabelGrid> preds, gts;
      for (const auto& img : images) {
        preds.push_back(argmax_labels(segmentation_logits(model, forward(model, img))));
        gts.push_back(img.segmentation);
      }
      return mean_iou(preds, gts, s.outputs()).metric;
    }
    case HeadKind::Depth: {
      std::vector<DepthGrid> preds, gts;
      for (const auto& img : images) {
        preds.push_back(depth_prediction(model, forward(model, img)));
        gts.push_back(img.depth);
      }
      return depth_rmse(preds, gts);
    }
    case HeadKind::Detection: {
      std::vector<ImageDetections> dets;
      std::vector<ImageBoxes> gts;
      for (const auto& img : images) {
        auto d = centernet::decode_detections(detection_maps(model, forward(model, img)),
                                              model.stride, opts.top_t, 0.0);
        if (opts.nms) d = centernet::nms(d, opts.nms_iou);
        dets.push_back(std::move(d));
        gts.push_back(img.boxes);
      }
      return coco_map(dets, gts);
    }
    case HeadKind::Keypoints: {
      std::vector<ImageKeypoints> preds, gts;
      centernet::KeypointDecodeParams params;
      params.stride = model.stride;
      params.top_t = opts.top_t;
      params.keypoint_threshold = opts.keypoint_threshold;
      for (const auto& img : images) {
        const Activations act = forward(model, img);
        preds.push_back(centernet::decode_keypoints(detection_maps(model, act),
                                                    keypoint_maps(model, act), params));
        gts.push_back(img.keypoints);
      }
      return keypoint_ap50(preds, gts, uniform_sigmas(s.num_keypoints));
    }
    case HeadKind::ImageClassification:
      throw Error("evaluate: classification heads have no task metric");
  }
  throw Error("evaluate: bad head kind");
}

double classification_accuracy(const ToyModel& model, std::span<const SynthImage> images) {
  if (model.head.shape.kind != HeadKind::ImageClassification) {
    throw Error("classification_accuracy: not a classification head");
  }
  if (images.empty()) throw Error("classification_accuracy: no images");
  std::size_t hits = 0;
  for (const auto& img : images) {
    const Activations act = forward(model, img);
    const auto best = static_cast<int>(
        std::max_element(act.outputs.begin(), act.outputs.end()) - act.outputs.begin());
    if (best == img.image_class) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

FeatureSet embed_images(const Backbone& bb, std::span<const SynthImage> images,
                        std::string dataset_id, std::string domain_label) {
  if (images.empty()) throw Error("embed_images: no images");
  const std::size_t hid = bb.hidden;
  std::vector<float> data;
  data.reserve(images.size() * hid);
  std::vector<double> patches, hidden, pooled(hid);
  for (const auto& img : images) {
    check_image(bb, img);
    const std::size_t pixels = img.height * img.width;
    fill_patches(bb, img, patches);
    compute_hidden(bb, patches, pixels, hidden);
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t j = 0; j < hid; ++j) pooled[j] += hidden[p * hid + j];
    }
    for (double v : pooled) data.push_back(static_cast<float>(v / static_cast<double>(pixels)));
  }
  return FeatureSet(std::move(dataset_id), std::move(domain_label), hid, std::move(data));
}

FeatureSet embed_features(const Backbone& bb, const SynthDataset& ds, std::size_t n,
                          std::uint64_t seed) {
  const FeatureSet all = embed_images(bb, ds.train, ds.spec.dataset_id, ds.spec.domain_label);
  return sample_features(all, n, seed);
}

}  // namespace xfer::toy
