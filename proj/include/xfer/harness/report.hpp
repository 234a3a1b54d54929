#pragma once

// Pure views over a result store: gain records, aggregate level tables,
// best sources, factor correlations and the target x source gain matrix,
// rendered as CSV or aligned text.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xfer/gains_meta.hpp"

namespace xfer::report {

/// Distance matrices of each seed (one per strategy).
using SeedDistances = std::map<std::uint64_t, std::vector<DistanceMatrix>>;

struct Analysis {
  std::vector<GainRecord> gains;
  std::vector<AggregateRow> aggregates;  // non-empty (domain, task) filter rows
  std::vector<GainRecord> best;
  std::vector<FactorCorrelation> correlations;
};

/// Throws "no records" when nothing but baseline-sourced results remain.
Analysis analyze(std::span<const TransferResult> results, const SeedDistances& distances = {});

/// tau between r and -distance per strategy, pooled over seeds (each record
/// looks up the matrix of its own seed), then tau against source size.
std::vector<FactorCorrelation> pooled_correlations(std::span<const GainRecord> gains,
                                                   const SeedDistances& distances);

/// Mean r over seeds per (target, source) cell, for one regime.
struct GainMatrix {
  Regime regime = Regime::SmallTarget;
  std::vector<std::string> targets;  // "<dataset>:<task>"
  std::vector<std::string> sources;
  std::vector<std::vector<std::optional<double>>> mean_r;  // [target][source]
};

std::vector<GainMatrix> gain_matrices(std::span<const GainRecord> gains);

std::string gains_csv(std::span<const GainRecord> gains);
std::string aggregates_csv(std::span<const AggregateRow> rows);
std::string correlations_csv(std::span<const FactorCorrelation> rows);
std::string gain_matrix_csv(const GainMatrix& m);

std::string aggregates_text(std::span<const AggregateRow> rows);
std::string best_text(std::span<const GainRecord> best, bool ansi = false);
std::string correlations_text(std::span<const FactorCorrelation> rows);
/// Cells read "+12.3 VP"; empty cells are "-".
std::string gain_matrix_text(const GainMatrix& m, bool ansi = false);

/// First header cell is the strategy name, then the dataset ids; one row per
/// target. Values are written in shortest round-trip form.
std::string distance_matrix_csv(const DistanceMatrix& m);
DistanceMatrix distance_matrix_from_csv(const std::string& text);

}  // namespace xfer::report
