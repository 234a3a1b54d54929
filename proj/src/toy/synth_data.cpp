#include "xfer/toy/synth_data.hpp"

#include <algorithm>
#include <cmath>

#include "xfer/toy/rng.hpp"

namespace xfer::toy {

std::size_t SynthDomainSpec::channels() const {
  return components.empty() ? 0 : components.front().background_mean.size();
}

void SynthDomainSpec::validate() const {
  if (components.empty()) throw Error("domain '" + dataset_id + "': no components");
  const std::size_t c = channels();
  if (c == 0) throw Error("domain '" + dataset_id + "': zero channels");
  if (num_classes == 0) throw Error("domain '" + dataset_id + "': zero classes");
  for (const auto& comp : components) {
    if (comp.background_mean.size() != c || comp.noise_std.size() != c) {
      throw Error("domain '" + dataset_id + "': component '" + comp.name +
                  "' has inconsistent channel count");
    }
    if (comp.class_signature.size() != num_classes) {
      throw Error("domain '" + dataset_id + "': component '" + comp.name +
                  "' needs one signature per class");
    }
    for (const auto& s : comp.class_signature) {
      if (s.size() != c) throw Error("domain '" + dataset_id + "': bad signature length");
    }
  }
  if (min_blobs == 0 || max_blobs < min_blobs) {
    throw Error("domain '" + dataset_id + "': bad blob count range");
  }
  if (min_extent == 0 || max_extent < min_extent || max_extent > height ||
      max_extent > width) {
    throw Error("domain '" + dataset_id + "': bad blob extent range");
  }
  if (breadth < 0.0 || !std::isfinite(breadth)) {
    throw Error("domain '" + dataset_id + "': bad breadth");
  }
}

SynthDomainSpec make_mixture(std::string dataset_id, std::string domain_label,
                             std::span<const SynthDomainSpec> parts,
                             std::uint64_t seed) {
  if (parts.empty()) throw Error("make_mixture: no parts");
  SynthDomainSpec out = parts.front();
  out.dataset_id = std::move(dataset_id);
  out.domain_label = std::move(domain_label);
  out.seed = seed;
  out.components.clear();
  for (const auto& p : parts) {
    if (p.height != out.height || p.width != out.width ||
        p.num_classes != out.num_classes || p.channels() != parts.front().channels() ||
        p.breadth != out.breadth) {
      throw Error("make_mixture: parts have different geometry");
    }
    for (const auto& comp : p.components) {
      if (std::find(out.components.begin(), out.components.end(), comp) ==
          out.components.end()) {
        out.components.push_back(comp);
      }
    }
  }
  return out;
}

SynthDataset SynthDataset::capped(std::size_t n_train) const {
  SynthDataset out;
  out.spec = spec;
  const std::size_t n = std::min(n_train, train.size());
  out.train.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n));
  out.val = val;
  return out;
}

double object_depth(int class_id) { return 1.0 + 0.5 * class_id; }

SynthImage generate_image(const SynthDomainSpec& spec, std::size_t component,
                          std::uint64_t seed) {
  spec.validate();
  if (component >= spec.components.size()) throw Error("generate_image: bad component");
  const auto& comp = spec.components[component];
  const std::size_t H = spec.height, W = spec.width, C = spec.channels();
  Rng rng(seed);

  SynthImage img;
  img.height = H;
  img.width = W;
  img.channels = C;
  img.component = component;

  const std::size_t n_blobs =
      spec.min_blobs + rng.below(spec.max_blobs - spec.min_blobs + 1);
  const std::size_t extents = spec.max_extent - spec.min_extent + 1;
  for (std::size_t b = 0; b < n_blobs; ++b) {
    Blob blob;
    blob.h = spec.min_extent + rng.below(extents);
    blob.w = spec.min_extent + rng.below(extents);
    blob.row = rng.below(H - blob.h + 1);
    blob.col = rng.below(W - blob.w + 1);
    blob.class_id = static_cast<int>(rng.below(spec.num_classes));
    img.blobs.push_back(blob);
  }

  std::vector<int> owner(H * W, -1);
  for (std::size_t b = 0; b < n_blobs; ++b) {
    const Blob& bl = img.blobs[b];
    for (std::size_t r = bl.row; r < bl.row + bl.h; ++r) {
      for (std::size_t c = bl.col; c < bl.col + bl.w; ++c) owner[r * W + c] = static_cast<int>(b);
    }
  }

  img.pixels.resize(H * W * C);
  std::vector<std::uint16_t> labels(H * W, 0);
  std::vector<double> depth(H * W, comp.background_depth);
  for (std::size_t p = 0; p < H * W; ++p) {
    const int o = owner[p];
    for (std::size_t ch = 0; ch < C; ++ch) {
      double v = comp.background_mean[ch] + comp.noise_std[ch] * spec.breadth * rng.normal();
      if (o >= 0) v += comp.class_signature[static_cast<std::size_t>(img.blobs[o].class_id)][ch];
      img.pixels[p * C + ch] = v;
    }
    if (o >= 0) {
      labels[p] = static_cast<std::uint16_t>(img.blobs[o].class_id + 1);
      depth[p] = object_depth(img.blobs[o].class_id);
    }
  }
  img.segmentation = LabelGrid(W, H, std::move(labels));
  img.depth = DepthGrid(W, H, std::move(depth));

  const std::size_t K = spec.num_keypoints;
  std::size_t largest = 0;
  for (std::size_t b = 0; b < n_blobs; ++b) {
    const Blob& bl = img.blobs[b];
    const Box box(static_cast<double>(bl.col), static_cast<double>(bl.row),
                  static_cast<double>(bl.w), static_cast<double>(bl.h), bl.class_id);
    img.boxes.push_back(box);

    KeypointInstance inst;
    inst.box = box;
    for (std::size_t k = 0; k < K; ++k) {
      // spread along the main diagonal, first and last at the corner pixel centres
      const double t = K == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(K - 1);
      Keypoint kp;
      kp.x = static_cast<double>(bl.col) + 0.5 + t * static_cast<double>(bl.w - 1);
      kp.y = static_cast<double>(bl.row) + 0.5 + t * static_cast<double>(bl.h - 1);
      const auto pr = static_cast<std::size_t>(kp.y);
      const auto pc = static_cast<std::size_t>(kp.x);
      kp.visible = owner[pr * W + pc] == static_cast<int>(b);
      inst.keypoints.push_back(kp);
    }
    img.keypoints.push_back(std::move(inst));

    if (bl.h * bl.w > img.blobs[largest].h * img.blobs[largest].w) largest = b;
  }
  img.image_class = img.blobs[largest].class_id;
  return img;
}

std::uint64_t image_seed(const SynthDomainSpec& spec, int split, std::size_t index) {
  return mix_seed(mix_seed(spec.seed, static_cast<std::uint64_t>(split) + 1), index);
}

std::size_t image_component(const SynthDomainSpec& spec, int split, std::size_t index) {
  const std::size_t n = spec.components.size();
  if (n <= 1) return 0;
  Rng rng(mix_seed(image_seed(spec, split, index), 0xc0ffeeULL));
  return static_cast<std::size_t>(rng.below(n));
}

SynthDataset generate_dataset(const SynthDomainSpec& spec, std::size_t n_train,
                              std::size_t n_val) {
  spec.validate();
  if (n_train == 0 || n_val == 0) throw Error("generate_dataset: need n >= 1 per split");
  SynthDataset ds;
  ds.spec = spec;
  ds.train.reserve(n_train);
  ds.val.reserve(n_val);
  for (std::size_t i = 0; i < n_train; ++i) {
    ds.train.push_back(generate_image(spec, image_component(spec, 0, i), image_seed(spec, 0, i)));
  }
  for (std::size_t i = 0; i < n_val; ++i) {
    ds.val.push_back(generate_image(spec, image_component(spec, 1, i), image_seed(spec, 1, i)));
  }
  return ds;
}

}  // namespace xfer::toy
