#pragma once

// Feature files. Binary layout: magic "XFRF1", u32 count, u32 dim, then
// count * dim little-endian float32 values, row-major. CSV layout: one
// vector per line. Either encoding has a JSON sidecar at <path>.json
// carrying dataset_id, domain_label, dim, count and sample_seed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer::io {

inline constexpr char kFeatureMagic[] = "XFRF1";  // 5 bytes on disk

std::vector<std::uint8_t> encode_features(const FeatureSet& fs);
/// Parses the binary payload. `dataset_id` etc. are left empty.
/// Errors: "bad magic", "truncated payload at offset k".
FeatureSet decode_features(const std::vector<std::uint8_t>& bytes);

std::string features_to_csv(const FeatureSet& fs);
FeatureSet features_from_csv(const std::string& text);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Binary unless the extension is ".csv". Writes the sidecar as well.
void save_features(const FeatureSet& fs, const std::filesystem::path& path);
/// Reads the payload and its sidecar; throws on dimension or count
/// mismatch between the two.
FeatureSet load_features(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace xfer::io
