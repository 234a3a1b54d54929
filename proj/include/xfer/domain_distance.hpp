#pragma once

// Appearance-based distance between datasets, computed from per-image
// embedding vectors, plus the exact assignment solver backing the
// Earth Mover's variant.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer {

/// Dense row-major matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

enum class AssignmentStrategy {
  EmdOneToOne,            // optimal one-to-one matching
  TargetToClosestSource,  // each target image to its nearest source image
  SourceToClosestTarget,  // each source image to its nearest target image
  SymmetricAverage,       // mean of the two nearest-neighbour directions
};

inline constexpr AssignmentStrategy kAllStrategies[] = {
    AssignmentStrategy::EmdOneToOne, AssignmentStrategy::TargetToClosestSource,
    AssignmentStrategy::SourceToClosestTarget,
    AssignmentStrategy::SymmetricAverage};

std::string_view to_string(AssignmentStrategy s);
AssignmentStrategy parse_strategy(std::string_view s);

inline constexpr std::size_t kDefaultSampleCount = 1000;

/// Uniform sample of n vectors without replacement (selection sampling over
/// a seeded mt19937_64), kept in original order. n >= count returns the
/// full set unchanged.
FeatureSet sample_features(const FeatureSet& features,
                           std::size_t n = kDefaultSampleCount,
                           std::uint64_t seed = 0);

/// |a| x |b| Euclidean distances.
DenseMatrix pairwise_distances(const FeatureSet& a, const FeatureSet& b);

struct Assignment {
  std::vector<std::size_t> col_of_row;
  double total = 0.0;  // summed in row order
};

/// Exact minimum-cost perfect matching of a square cost matrix, O(n^3).
Assignment hungarian(const DenseMatrix& cost);

/// D(target | source) under the given strategy.
double domain_distance(const FeatureSet& target, const FeatureSet& source,
                       AssignmentStrategy strategy);

/// D[t][s], rows are targets, columns are sources.
struct DistanceMatrix {
  AssignmentStrategy strategy = AssignmentStrategy::TargetToClosestSource;
  std::vector<std::string> ids;
  DenseMatrix values;

  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Throws when either id is missing.
  double at(std::string_view target, std::string_view source) const;
};

/// Samples every dataset once (same n and seed for all) and evaluates every
/// ordered pair. Rows may be computed on up to `jobs` threads; the result
/// does not depend on the thread count.
DistanceMatrix distance_matrix(std::span<const FeatureSet> all,
                               AssignmentStrategy strategy,
                               std::size_t n = kDefaultSampleCount,
                               std::uint64_t seed = 0, std::size_t jobs = 1);

}  // namespace xfer
