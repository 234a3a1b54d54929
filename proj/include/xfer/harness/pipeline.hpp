#pragma once

// Orchestration of one experiment: dataset generation, source-backbone
// caching, chain fan-out over seeds and per-seed distance matrices.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xfer/harness/chain_config.hpp"
#include "xfer/harness/result_store.hpp"

namespace xfer::harness {

struct Suite {
  toy::SynthDataset pretrain;
  std::vector<toy::SynthDataset> datasets;  // config order (suite order when unset)

  /// Throws "unknown dataset id" when absent.
  const toy::SynthDataset& find(std::string_view id) const;
};

/// Datasets of one seed: n_train / n_val images per mixture component, then
/// the per-dataset train_size overrides.
Suite build_suite(const ChainConfig& cfg, std::uint64_t seed);

/// Every (source, target) task pair except a task transferring to itself.
/// Target-major order.
std::vector<std::pair<TaskRef, TaskRef>> chain_pairs(const ChainConfig& cfg, const Suite& suite);

/// Runs every chain of one seed in order, skipping keys in `done`. Uses
/// backbones cached by train_sources when `cache_dir` is non-empty.
std::vector<TransferResult> run_seed(const ChainConfig& cfg, std::uint64_t seed,
                                     const std::set<std::string>& done = {},
                                     const std::filesystem::path& cache_dir = {});

/// Fans seeds out over up to `jobs` threads and appends results to the store
/// in seed order, so the file does not depend on `jobs`. Returns the number
/// of appended records.
std::size_t run_chains(const ChainConfig& cfg, io::ResultStore& store, std::size_t jobs = 1,
                       const std::filesystem::path& cache_dir = {});

/// Trains and caches the pretrained and source backbones of every seed as
/// JSON under cache_dir/<config fingerprint>/seed-<n>/. Existing files are
/// kept. Returns the number of backbones written.
std::size_t train_sources(const ChainConfig& cfg, const std::filesystem::path& cache_dir,
                          std::size_t jobs = 1);

std::string backbone_to_json(const toy::Backbone& bb);
toy::Backbone backbone_from_json(const std::string& text);

/// Embeddings of every dataset's training split under a multi-source
/// segmentation backbone trained on the whole suite.
std::vector<FeatureSet> embed_suite(const ChainConfig& cfg, const Suite& suite,
                                    std::uint64_t seed);

/// One matrix per configured strategy. EMD uses min(samples, emd_cap,
/// smallest training split) so that every pair has equal counts.
std::vector<DistanceMatrix> distance_matrices(const ChainConfig& cfg,
                                              std::span<const FeatureSet> features,
                                              std::uint64_t seed, std::size_t jobs = 1);

}  // namespace xfer::harness
