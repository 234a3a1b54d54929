#pragma once

// Append-only JSON-lines store of transfer results. Every line is a
// self-contained record with a schema_version field; the experiment key
// identifies a record, and appending an existing key is a no-op.

#include <filesystem>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xfer/gains_meta.hpp"

namespace xfer::io {

inline constexpr int kSchemaVersion = 1;

std::string result_to_json_line(const TransferResult& r);
/// Throws on malformed JSON, missing fields or a schema_version mismatch.
TransferResult result_from_json_line(const std::string& line);

/// Reads every record; a missing file is an empty store.
std::vector<TransferResult> load_results(const std::filesystem::path& path);
/// Overwrites `path` with the given records, one per line.
void store_results(const std::filesystem::path& path, std::span<const TransferResult> results);

enum class AppendStatus { Appended, Duplicate };

class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  std::vector<TransferResult> records() const;
  bool contains(const std::string& experiment_key) const;

  /// Appends and flushes one line. Duplicated keys are skipped with a
  /// warning on stderr. Serialised across threads.
  AppendStatus append(const TransferResult& r);

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<TransferResult> records_;
  std::set<std::string> keys_;
};

}  // namespace xfer::io
