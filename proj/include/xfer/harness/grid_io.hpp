#pragma once

// Grid files: a concatenation of records, each
//   magic "XFRG1", u32 height, u32 width, u32 channels, u32 dtype,
//   payload channel-major (c, row, col), little-endian f32 or u16.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xfer/toy/synth_data.hpp"

namespace xfer::io {

inline constexpr char kGridMagic[] = "XFRG1";

enum class GridDType : std::uint32_t { F32 = 0, U16 = 1 };

struct GridRecord {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  GridDType dtype = GridDType::F32;
  std::vector<float> f32;
  std::vector<std::uint16_t> u16;

  std::size_t values() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  friend bool operator==(const GridRecord&, const GridRecord&) = default;
};

std::vector<std::uint8_t> encode_grids(std::span<const GridRecord> records);
std::vector<GridRecord> decode_grids(const std::vector<std::uint8_t>& bytes);

void save_grids(std::span<const GridRecord> records, const std::filesystem::path& path);
std::vector<GridRecord> load_grids(const std::filesystem::path& path);

/// Image pixels (f32, C channels), segmentation labels (u16) and depth (f32).
GridRecord image_record(const toy::SynthImage& img);
GridRecord label_record(const toy::SynthImage& img);
GridRecord depth_record(const toy::SynthImage& img);

/// Writes <dir>/<id>.<split>.grid (three records per image) and
/// <dir>/<id>.<split>.json (boxes, keypoints, components) for both splits.
void dump_dataset(const toy::SynthDataset& ds, const std::filesystem::path& dir);

}  // namespace xfer::io
