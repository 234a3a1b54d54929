#pragma once

// Deterministic synthetic multi-domain image datasets. Each image is a small
// multi-channel grid with rectangular objects ("blobs"); all four task
// labels are derived from the blob layout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer::toy {

/// One narrow appearance distribution. Pixel value per channel is
/// background_mean + noise_std * breadth * N(0,1), plus class_signature
/// inside objects of that class.
struct AppearanceComponent {
  std::string name;
  std::vector<double> background_mean;
  std::vector<double> noise_std;
  std::vector<std::vector<double>> class_signature;  // num_classes x channels
  double background_depth = 4.0;

  friend bool operator==(const AppearanceComponent&, const AppearanceComponent&) = default;
};

struct SynthDomainSpec {
  std::string dataset_id;
  std::string domain_label;
  /// Images are drawn from a uniform mixture over these components. A broad
  /// domain lists the components of the narrow domains it includes.
  std::vector<AppearanceComponent> components;
  double breadth = 1.0;
  std::size_t height = 10;
  std::size_t width = 10;
  std::size_t num_classes = 2;  // object classes; segmentation adds background 0
  std::size_t num_keypoints = 3;
  std::size_t min_blobs = 1;
  std::size_t max_blobs = 2;
  std::size_t min_extent = 3;
  std::size_t max_extent = 5;
  std::uint64_t seed = 0;

  std::size_t channels() const;
  void validate() const;
};

/// Mixture over the components of all parts (duplicates removed, order kept).
SynthDomainSpec make_mixture(std::string dataset_id, std::string domain_label,
                             std::span<const SynthDomainSpec> parts,
                             std::uint64_t seed);

struct Blob {
  std::size_t row = 0, col = 0;  // top-left pixel
  std::size_t h = 1, w = 1;
  int class_id = 0;  // 0-based object class

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct SynthImage {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<double> pixels;  // H x W x C, pixel-major
  std::size_t component = 0;
  std::vector<Blob> blobs;     // painting order; later blobs occlude earlier
  LabelGrid segmentation;      // 0 background, 1 + class_id inside blobs
  std::vector<Box> boxes;      // one per blob, class_id 0-based
  std::vector<KeypointInstance> keypoints;
  DepthGrid depth;
  int image_class = 0;         // class of the largest blob

  friend bool operator==(const SynthImage&, const SynthImage&) = default;
};

struct SynthDataset {
  SynthDomainSpec spec;
  std::vector<SynthImage> train;
  std::vector<SynthImage> val;

  const std::string& id() const { return spec.dataset_id; }
  /// Copy keeping only the first n training images.
  SynthDataset capped(std::size_t n_train) const;
};

/// Depth of an object of the given class.
double object_depth(int class_id);

/// Renders one image of a given mixture component from its own seed.
SynthImage generate_image(const SynthDomainSpec& spec, std::size_t component,
                          std::uint64_t image_seed);

/// Seed of image `index` of a split (0 = train, 1 = val).
std::uint64_t image_seed(const SynthDomainSpec& spec, int split, std::size_t index);
/// Mixture component of image `index` of a split.
std::size_t image_component(const SynthDomainSpec& spec, int split,
                            std::size_t index);

SynthDataset generate_dataset(const SynthDomainSpec& spec, std::size_t n_train,
                              std::size_t n_val);

}  // namespace xfer::toy
