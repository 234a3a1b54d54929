#include "xfer/domain_distance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "xfer/simd/kernels.hpp"

namespace xfer {
namespace {

void require_same_dim(const FeatureSet& a, const FeatureSet& b) {
  if (a.dim() != b.dim()) {
    throw Error("feature dimension mismatch (" + std::to_string(a.dim()) +
                " vs " + std::to_string(b.dim()) + ")");
  }
}

// Mean over rows of `from` of the distance to the nearest row of `to`.
double mean_nearest(const FeatureSet& from, const FeatureSet& to) {
  require_same_dim(from, to);
  const auto& k = simd::active();
  double sum = 0.0;
  for (std::size_t i = 0; i < from.count(); ++i) {
    const float* a = from.row(i).data();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.count(); ++j) {
      best = std::min(best, k.squared_l2_f32(a, to.row(j).data(), from.dim()));
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.count());
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw Error("matrix payload size mismatch");
}

std::string_view to_string(AssignmentStrategy s) {
  switch (s) {
    case AssignmentStrategy::EmdOneToOne: return "emd";
    case AssignmentStrategy::TargetToClosestSource: return "target-to-source";
    case AssignmentStrategy::SourceToClosestTarget: return "source-to-target";
    case AssignmentStrategy::SymmetricAverage: return "symmetric";
  }
  return "unknown";
}

AssignmentStrategy parse_strategy(std::string_view s) {
  for (auto st : kAllStrategies) {
    if (to_string(st) == s) return st;
  }
  throw Error("unknown assignment strategy '" + std::string(s) +
              "' (expected emd, target-to-source, source-to-target, symmetric)");
}

FeatureSet sample_features(const FeatureSet& features, std::size_t n,
                           std::uint64_t seed) {
  if (features.empty()) throw Error("cannot sample from an empty feature set");
  const std::size_t total = features.count();
  if (n >= total) {
    return FeatureSet(features.dataset_id(), features.domain_label(),
                      features.dim(),
                      std::vector<float>(features.data().begin(), features.data().end()),
                      seed);
  }
  if (n == 0) throw Error("sample size must be positive");
  // Knuth's selection sampling: record t is kept with probability
  // (n - picked) / (total - t).
  std::mt19937_64 rng(seed);
  std::vector<float> out;
  out.reserve(n * features.dim());
  std::size_t picked = 0;
  for (std::size_t t = 0; t < total && picked < n; ++t) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (static_cast<double>(total - t) * u < static_cast<double>(n - picked)) {
      const auto r = features.row(t);
      out.insert(out.end(), r.begin(), r.end());
      ++picked;
    }
  }
  return FeatureSet(features.dataset_id(), features.domain_label(),
                    features.dim(), std::move(out), seed);
}

DenseMatrix pairwise_distances(const FeatureSet& a, const FeatureSet& b) {
  require_same_dim(a, b);
  const auto& k = simd::active();
  DenseMatrix d(a.count(), b.count());
  for (std::size_t i = 0; i < a.count(); ++i) {
    for (std::size_t j = 0; j < b.count(); ++j) {
      d.at(i, j) = std::sqrt(k.squared_l2_f32(a.row(i).data(), b.row(j).data(), a.dim()));
    }
  }
  return d;
}

double domain_distance(const FeatureSet& target, const FeatureSet& source,
                       AssignmentStrategy strategy) {
  require_same_dim(target, source);
  if (target.empty() || source.empty()) throw Error("empty feature set");
  switch (strategy) {
    case AssignmentStrategy::TargetToClosestSource:
      return mean_nearest(target, source);
    case AssignmentStrategy::SourceToClosestTarget:
      return mean_nearest(source, target);
    case AssignmentStrategy::SymmetricAverage:
      return (mean_nearest(target, source) + mean_nearest(source, target)) / 2.0;
    case AssignmentStrategy::EmdOneToOne: {
      if (target.count() != source.count()) {
        throw Error("EMD requires equal sample counts (" +
                    std::to_string(target.count()) + " vs " +
                    std::to_string(source.count()) + ")");
      }
      const Assignment a = hungarian(pairwise_distances(target, source));
      return a.total / static_cast<double>(target.count());
    }
  }
  throw Error("unknown assignment strategy");
}

std::optional<std::size_t> DistanceMatrix::index_of(std::string_view id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

double DistanceMatrix::at(std::string_view target, std::string_view source) const {
  const auto t = index_of(target);
  const auto s = index_of(source);
  if (!t || !s) {
    throw Error("distance matrix has no entry for target '" + std::string(target) +
                "' / source '" + std::string(source) + "'");
  }
  return values.at(*t, *s);
}

DistanceMatrix distance_matrix(std::span<const FeatureSet> all,
                               AssignmentStrategy strategy, std::size_t n,
                               std::uint64_t seed, std::size_t jobs) {
  if (all.empty()) throw Error("distance_matrix needs at least one dataset");
  std::vector<FeatureSet> sampled;
  sampled.reserve(all.size());
  for (const auto& f : all) sampled.push_back(sample_features(f, n, seed));

  DistanceMatrix out;
  out.strategy = strategy;
  for (const auto& f : all) out.ids.push_back(f.dataset_id());
  out.values = DenseMatrix(all.size(), all.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(sampled.size());
  auto worker = [&] {
    for (std::size_t t = next++; t < sampled.size(); t = next++) {
      try {
        for (std::size_t s = 0; s < sampled.size(); ++s) {
          out.values.at(t, s) = domain_distance(sampled[t], sampled[s], strategy);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, sampled.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace xfer
