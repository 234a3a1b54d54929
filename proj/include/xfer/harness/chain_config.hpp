#pragma once

// Experiment configuration (TOML syntax). Every key has a default; unknown
// keys are rejected so that typos do not silently fall back to defaults.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xfer/domain_distance.hpp"
#include "xfer/gains_meta.hpp"
#include "xfer/toy/transfer_chain.hpp"

namespace xfer::harness {

struct ChainConfig {
  std::string experiment_id = "toy-suite";
  Regime regime = Regime::SmallTarget;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t jobs = 1;

  std::string suite = "fixture";
  std::size_t n_train = 60;  // per mixture component
  std::size_t n_val = 30;    // per mixture component
  std::size_t pretrain_n_train = 120;
  std::size_t pretrain_n_val = 30;
  std::vector<std::string> datasets;              // empty: the whole suite
  std::map<std::string, std::size_t> train_size;  // per-dataset override

  std::vector<TaskType> source_tasks{TaskType::SemanticSegmentation};
  std::vector<TaskType> target_tasks{TaskType::SemanticSegmentation};

  std::size_t small_target = 150;
  std::size_t small_source = 1500;

  std::size_t hidden = 4;
  std::size_t patch = 3;
  int stride = 1;

  toy::TrainConfig pretrain{};
  toy::TrainConfig source = toy::default_source_config();
  toy::TrainConfig target{};
  toy::TrainConfig embed{};  // multi-source segmentation backbone for embeddings
  double source_epochs = 16.0;

  bool nms = true;
  std::map<std::string, bool> nms_by_dataset;

  std::size_t distance_samples = kDefaultSampleCount;
  std::size_t emd_cap = 300;
  std::vector<AssignmentStrategy> strategies{std::begin(kAllStrategies),
                                             std::end(kAllStrategies)};

  /// Positive caps and counts, known suite, at least one seed and task.
  void validate() const;
};

ChainConfig parse_config(std::string_view toml_text);
ChainConfig load_config(const std::filesystem::path& path);
/// Full configuration as TOML; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const ChainConfig& cfg);

/// Hex digest of to_toml(cfg), used to key caches.
std::string config_fingerprint(const ChainConfig& cfg);

toy::ChainSettings chain_settings(const ChainConfig& cfg, std::uint64_t seed);

}  // namespace xfer::harness
