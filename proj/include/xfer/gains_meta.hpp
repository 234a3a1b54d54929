#pragma once

// Relative transfer gain, significance levels and the meta-analysis that
// turns raw transfer results into aggregate tables and rank correlations.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xfer/domain_distance.hpp"
#include "xfer/eval_metrics.hpp"

namespace xfer {

enum class Regime { SmallTarget, FullTarget, SmallSourceSmallTarget };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

/// A task is a dataset plus a task type. The baseline sentinel stands for
/// the generic pre-trained starting point.
struct TaskRef {
  static constexpr std::string_view kBaselineId = "BASELINE";

  std::string dataset_id;
  TaskType task = TaskType::SemanticSegmentation;

  static TaskRef baseline(TaskType t) { return {std::string(kBaselineId), t}; }
  bool is_baseline() const { return dataset_id == kBaselineId; }

  friend bool operator==(const TaskRef&, const TaskRef&) = default;
};

struct TransferResult {
  std::string experiment_key;
  TaskRef source;
  TaskRef target;
  MetricValue metric;           // m(T|S)
  MetricValue baseline_metric;  // m(T|baseline)
  Regime regime = Regime::SmallTarget;
  std::string source_domain;
  std::string target_domain;
  std::uint64_t source_train_size = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const TransferResult&, const TransferResult&) = default;
};

enum class GainLevel { VeryPositive, Positive, Insignificant, Negative };

std::string_view to_string(GainLevel l);  // "VP", "P", "I", "N"

/// r = (m / baseline - 1) * 100, negated for lower-better metrics.
double relative_gain(const MetricValue& m, const MetricValue& baseline);

/// VP: r > 10, P: 2 < r <= 10, N: r < -2, I: -2 <= r <= 2.
GainLevel classify_level(double r);

struct GainRecord {
  TransferResult result;
  double r = 0.0;
  GainLevel level = GainLevel::Insignificant;
  bool within_domain = false;
  bool within_task_type = false;
};

GainRecord make_gain_record(const TransferResult& result);
/// Baseline-sourced results are skipped.
std::vector<GainRecord> make_gain_records(std::span<const TransferResult> results);

enum class TransferFilter { All, Within, Cross };

std::string_view to_string(TransferFilter f);

struct AggregateRow {
  TransferFilter domain = TransferFilter::All;
  TransferFilter task = TransferFilter::All;
  double pct_p = 0.0;   // r > 2 (includes VP)
  double pct_vp = 0.0;  // r > 10
  double pct_n = 0.0;   // r < -2
  std::size_t count = 0;
};

AggregateRow aggregate_levels(std::span<const GainRecord> records,
                              TransferFilter domain, TransferFilter task);

/// For each target (regime, dataset, task type, seed) the record of maximal
/// r; ties keep the first in input order. Output follows first appearance.
std::vector<GainRecord> best_source_per_target(std::span<const GainRecord> records);

/// Kendall tau-b with tie correction. Throws when either input is all-tied.
double kendall_tau(std::span<const double> x, std::span<const double> y);

struct FactorCorrelation {
  std::string factor;  // "distance:<strategy>" or "source_size"
  std::optional<double> tau;
  std::size_t n = 0;
  std::string error;  // set when tau is undefined
};

/// tau between r and -distance for every supplied matrix, then between r
/// and the source training-set size. Throws when a (target, source) pair is
/// missing from a matrix.
std::vector<FactorCorrelation> factor_correlations(
    std::span<const GainRecord> records, std::span<const DistanceMatrix> distances);

}  // namespace xfer
