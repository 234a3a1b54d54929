#pragma once

// A hand-built 24-record result set. Four targets, six sources each, two
// appearance domains (alpha: A1, A2; beta: B1, B2) and two task types. Every
// expected count below was tallied by hand from the table, not computed.

#include <cstddef>
#include <string>
#include <vector>

#include "xfer/gains_meta.hpp"

namespace oracle {

struct FixtureRow {
  const char* target;
  xfer::TaskType target_task;
  const char* source;
  xfer::TaskType source_task;
  double r;
};

inline std::string fixture_domain(const std::string& id) { return id[0] == 'A' ? "alpha" : "beta"; }

inline std::vector<xfer::TransferResult> fixture_results() {
  using xfer::TaskType;
  constexpr auto S = TaskType::SemanticSegmentation;
  constexpr auto D = TaskType::ObjectDetection;
  const FixtureRow rows[] = {
      // target A1 seg
      {"A1", S, "A2", S, 25.0}, {"A1", S, "A2", D, 5.0}, {"A1", S, "B1", S, -1.0},
      {"A1", S, "B1", D, -8.0}, {"A1", S, "B2", S, 3.0}, {"A1", S, "B2", D, 0.0},
      // target A2 seg
      {"A2", S, "A1", S, 1.8}, {"A2", S, "A1", D, 1.0}, {"A2", S, "B1", S, -3.0},
      {"A2", S, "B1", D, -12.0}, {"A2", S, "B2", S, 4.0}, {"A2", S, "B2", D, -2.5},
      // target B1 seg
      {"B1", S, "B2", S, 15.0}, {"B1", S, "B2", D, 8.0}, {"B1", S, "A1", S, -6.0},
      {"B1", S, "A1", D, 0.5}, {"B1", S, "A2", S, 11.0}, {"B1", S, "A2", D, -4.0},
      // target B1 det
      {"B1", D, "B2", D, 9.0}, {"B1", D, "B2", S, 6.0}, {"B1", D, "A1", D, -7.0},
      {"B1", D, "A1", S, 2.5}, {"B1", D, "A2", D, 9.0}, {"B1", D, "B1", S, 1.5},
  };
  std::vector<xfer::TransferResult> out;
  for (const auto& row : rows) {
    xfer::TransferResult t;
    t.experiment_key = "fixture";
    t.source = {row.source, row.source_task};
    t.target = {row.target, row.target_task};
    t.metric = {row.target_task, 1.0 + row.r / 100.0, xfer::Direction::HigherBetter};
    t.baseline_metric = {row.target_task, 1.0, xfer::Direction::HigherBetter};
    t.regime = xfer::Regime::SmallTarget;
    t.source_domain = fixture_domain(row.source);
    t.target_domain = fixture_domain(row.target);
    t.source_train_size = 100;
    out.push_back(t);
  }
  return out;
}

struct ExpectedRow {
  xfer::TransferFilter domain, task;
  std::size_t count, p, vp, n;
};

inline std::vector<ExpectedRow> fixture_expected_rows() {
  using F = xfer::TransferFilter;
  return {
      {F::All, F::All, 24, 11, 3, 7},       {F::Within, F::All, 9, 6, 2, 0},
      {F::Cross, F::All, 15, 5, 1, 7},      {F::All, F::Within, 12, 7, 3, 3},
      {F::All, F::Cross, 12, 4, 0, 4},      {F::Within, F::Within, 4, 3, 2, 0},
      {F::Within, F::Cross, 5, 3, 0, 0},    {F::Cross, F::Within, 8, 4, 1, 3},
      {F::Cross, F::Cross, 7, 1, 0, 4},
  };
}

struct ExpectedBest {
  const char* target;
  xfer::TaskType task;
  const char* source;
  xfer::TaskType source_task;
  xfer::GainLevel level;
};

/// The B1 det target has a tie at r = 9; the first source listed wins.
inline std::vector<ExpectedBest> fixture_expected_best() {
  using xfer::GainLevel;
  using xfer::TaskType;
  constexpr auto S = TaskType::SemanticSegmentation;
  constexpr auto D = TaskType::ObjectDetection;
  return {
      {"A1", S, "A2", S, GainLevel::VeryPositive},
      {"A2", S, "B2", S, GainLevel::Positive},
      {"B1", S, "B2", S, GainLevel::VeryPositive},
      {"B1", D, "B2", D, GainLevel::Positive},
  };
}

}  // namespace oracle
