#include "xfer/dense_losses.hpp"

#include <algorithm>
#include <cmath>

namespace xfer {
namespace {

void require_same_shape(const DepthGrid& a, const DepthGrid& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error("depth grid shape mismatch");
  }
}

double sign(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

}  // namespace

LogitGrid::LogitGrid(std::size_t width, std::size_t height,
                     std::size_t channels, double fill)
    : width_(width),
      height_(height),
      channels_(channels),
      data_(width * height * channels, fill) {}

LogitGrid::LogitGrid(std::size_t width, std::size_t height,
                     std::size_t channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (data_.size() != width * height * channels) {
    throw Error("logit payload does not match width*height*channels");
  }
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_grad(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LabelGrid argmax_labels(const LogitGrid& logits) {
  LabelGrid out(logits.width(), logits.height());
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    const auto px = logits.pixel(i);
    out.labels()[i] = static_cast<std::uint16_t>(
        std::max_element(px.begin(), px.end()) - px.begin());
  }
  return out;
}

double segmentation_nll(const LogitGrid& logits, const LabelGrid& gt,
                        LogitGrid* grad) {
  if (logits.width() != gt.width() || logits.height() != gt.height()) {
    throw Error("logit/label grid shape mismatch");
  }
  const std::size_t c = logits.channels();
  if (c < 2) throw Error("segmentation needs at least two classes");
  std::size_t n = 0;
  for (std::uint16_t l : gt.labels()) {
    if (l == gt.ignore_id()) continue;
    if (l >= c) throw Error("label id out of range for the logit channels");
    ++n;
  }
  if (n == 0) throw Error("segmentation_nll: all pixels ignored");
  if (grad != nullptr) *grad = LogitGrid(logits.width(), logits.height(), c, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.pixels(); ++i) {
    const std::uint16_t l = gt.labels()[i];
    if (l == gt.ignore_id()) continue;
    const auto z = logits.pixel(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    const double lse = zmax + std::log(denom);
    sum += lse - z[l];
    if (grad != nullptr) {
      auto g = grad->pixel(i);
      for (std::size_t k = 0; k < c; ++k) {
        g[k] = (std::exp(z[k] - lse) - (k == l ? 1.0 : 0.0)) * inv_n;
      }
    }
  }
  return sum * inv_n;
}

double depth_l1_loss(const DepthGrid& pred, const DepthGrid& gt,
                     std::span<double> grad) {
  require_same_shape(pred, gt);
  const std::size_t n = gt.valid_count();
  if (n == 0) throw Error("depth loss: no valid pixels");
  if (!grad.empty()) {
    if (grad.size() != gt.size()) throw Error("depth gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid(i)) continue;
    const double d = pred.depth()[i] - gt.depth()[i];
    sum += std::abs(d);
    if (!grad.empty()) grad[i] = sign(d) * inv_n;
  }
  return sum * inv_n;
}

double depth_smoothness_loss(const DepthGrid& pred, const DepthGrid& gt,
                             std::span<double> grad) {
  require_same_shape(pred, gt);
  const std::size_t w = gt.width(), h = gt.height();
  if (w * h < 2) throw Error("depth smoothness needs at least two pixels");
  const std::size_t n = gt.valid_count();
  if (n == 0) throw Error("depth loss: no valid pixels");
  if (!grad.empty()) {
    if (grad.size() != gt.size()) throw Error("depth gradient size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto y = gt.depth();
  const auto yh = pred.depth();
  double sum = 0.0;
  // one forward-difference pair (i -> j): |(y_j - y_i) - (yh_j - yh_i)|
  auto term = [&](std::size_t i, std::size_t j) {
    if (!gt.valid(i) || !gt.valid(j)) return;
    const double d = (y[j] - y[i]) - (yh[j] - yh[i]);
    sum += std::abs(d);
    if (!grad.empty()) {
      const double s = sign(d) * inv_n;
      grad[j] -= s;
      grad[i] += s;
    }
  };
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      if (c + 1 < w) term(i, i + 1);
      if (r + 1 < h) term(i, i + w);
    }
  }
  return sum * inv_n;
}

DepthLoss depth_total_loss(const DepthGrid& pred, const DepthGrid& gt,
                           double smooth_weight, std::span<double> grad) {
  DepthLoss out;
  if (grad.empty()) {
    out.l1 = depth_l1_loss(pred, gt);
    out.smooth = depth_smoothness_loss(pred, gt);
  } else {
    std::vector<double> gs(grad.size());
    out.l1 = depth_l1_loss(pred, gt, grad);
    out.smooth = depth_smoothness_loss(pred, gt, gs);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += smooth_weight * gs[i];
  }
  out.total = out.l1 + smooth_weight * out.smooth;
  return out;
}

DepthGrid depth_from_logits(std::span<const double> logits, std::size_t width,
                            std::size_t height) {
  if (logits.size() != width * height) throw Error("depth logit size mismatch");
  std::vector<double> d(logits.size());
  std::transform(logits.begin(), logits.end(), d.begin(), softplus);
  return DepthGrid(width, height, std::move(d));
}

DepthLoss depth_total_loss_from_logits(std::span<const double> logits,
                                       const DepthGrid& gt, double smooth_weight,
                                       std::span<double> grad) {
  const DepthGrid pred = depth_from_logits(logits, gt.width(), gt.height());
  const DepthLoss out = depth_total_loss(pred, gt, smooth_weight, grad);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= softplus_grad(logits[i]);
  return out;
}

}  // namespace xfer
