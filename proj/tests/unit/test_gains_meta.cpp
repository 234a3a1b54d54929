#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles/fixture_store.hpp"
#include "oracles/oracles.hpp"
#include "xfer/gains_meta.hpp"

using namespace xfer;

namespace {

MetricValue hb(double v) { return {TaskType::SemanticSegmentation, v, Direction::HigherBetter}; }
MetricValue lb(double v) { return {TaskType::DepthEstimation, v, Direction::LowerBetter}; }

}  // namespace

TEST_CASE("relative_gain examples") {
  CHECK(relative_gain(hb(0.5), hb(0.5)) == 0.0);
  CHECK(relative_gain(hb(0.55), hb(0.50)) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(relative_gain(lb(0.45), lb(0.50)) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(relative_gain(hb(0.5), hb(0.0)), "relative_gain: undefined gain (zero baseline)", Error);
  CHECK_THROWS_AS(relative_gain(hb(0.5), lb(0.5)), Error);
}

TEST_CASE("classify_level boundaries") {
  CHECK(classify_level(15) == GainLevel::VeryPositive);
  CHECK(classify_level(0) == GainLevel::Insignificant);
  CHECK(classify_level(-3) == GainLevel::Negative);
  const double r[] = {-2.01, -2, 2, 2.01, 10, 10.01};
  const GainLevel want[] = {GainLevel::Negative,    GainLevel::Insignificant, GainLevel::Insignificant,
                            GainLevel::Positive,    GainLevel::Positive,      GainLevel::VeryPositive};
  for (int i = 0; i < 6; ++i) CHECK(classify_level(r[i]) == want[i]);
  CHECK(to_string(GainLevel::VeryPositive) == "VP");
}

TEST_CASE("relative_gain properties") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 10), k(0.1, 100);
  for (int i = 0; i < 500; ++i) {
    const double m = u(rng), b = u(rng), s = k(rng);
    CHECK(classify_level(relative_gain(hb(m), hb(m))) == GainLevel::Insignificant);
    CHECK(relative_gain(hb(m * s), hb(b * s)) == doctest::Approx(relative_gain(hb(m), hb(b))).epsilon(1e-9));
  }
}

TEST_CASE("aggregate_levels example") {
  std::vector<GainRecord> recs;
  for (double r : {12.0, 5.0, 0.0, -5.0}) {
    GainRecord g;
    g.r = r;
    recs.push_back(g);
  }
  const auto row = aggregate_levels(recs, TransferFilter::All, TransferFilter::All);
  CHECK(row.pct_p == 50.0);
  CHECK(row.pct_vp == 25.0);
  CHECK(row.pct_n == 25.0);
  CHECK(row.count == 4);
  CHECK_THROWS_AS(aggregate_levels(recs, TransferFilter::Within, TransferFilter::All), Error);
  for (auto& g : recs) g.r = 0;
  const auto zero = aggregate_levels(recs, TransferFilter::All, TransferFilter::All);
  CHECK(zero.pct_p + zero.pct_vp + zero.pct_n == 0.0);
}

TEST_CASE("fixture store: aggregate rows match hand counts") {
  const auto results = oracle::fixture_results();
  const auto recs = make_gain_records(results);
  REQUIRE(recs.size() == 24);
  for (const auto& e : oracle::fixture_expected_rows()) {
    CAPTURE(to_string(e.domain));
    CAPTURE(to_string(e.task));
    const auto row = aggregate_levels(recs, e.domain, e.task);
    const double n = static_cast<double>(e.count);
    CHECK(row.count == e.count);
    CHECK(row.pct_p == doctest::Approx(100.0 * e.p / n).epsilon(1e-14));
    CHECK(row.pct_vp == doctest::Approx(100.0 * e.vp / n).epsilon(1e-14));
    CHECK(row.pct_n == doctest::Approx(100.0 * e.n / n).epsilon(1e-14));
    CHECK(row.pct_vp <= row.pct_p);
    CHECK(row.pct_p + row.pct_n <= 100.0);
  }
}

TEST_CASE("fixture store: best source per target") {
  const auto recs = make_gain_records(oracle::fixture_results());
  const auto best = best_source_per_target(recs);
  const auto want = oracle::fixture_expected_best();
  REQUIRE(best.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(best[i].result.target.dataset_id == want[i].target);
    CHECK(best[i].result.target.task == want[i].task);
    CHECK(best[i].result.source.dataset_id == want[i].source);
    CHECK(best[i].result.source.task == want[i].source_task);
    CHECK(best[i].level == want[i].level);
  }
  const auto row = aggregate_levels(best, TransferFilter::All, TransferFilter::All);
  CHECK(row.pct_p == 100.0);
  CHECK(row.pct_vp == 50.0);
  CHECK(row.pct_n == 0.0);
}

TEST_CASE("best source is unchanged by rescaling one target's metrics") {
  auto results = oracle::fixture_results();
  const auto before = best_source_per_target(make_gain_records(results));
  for (auto& t : results) {
    if (t.target.dataset_id != "B1") continue;
    t.metric.value *= 7.5;
    t.baseline_metric.value *= 7.5;
  }
  const auto after = best_source_per_target(make_gain_records(results));
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i].result.source == before[i].result.source);
}

TEST_CASE("baseline-sourced results are skipped") {
  auto results = oracle::fixture_results();
  results[0].source = TaskRef::baseline(TaskType::SemanticSegmentation);
  CHECK(make_gain_records(results).size() == 23);
}

TEST_CASE("kendall_tau examples") {
  const std::vector<double> x{1, 2, 3}, rev{3, 2, 1}, y{1, 3, 2};
  CHECK(kendall_tau(x, x) == 1.0);
  CHECK(kendall_tau(x, rev) == -1.0);
  CHECK(kendall_tau(x, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const std::vector<double> flat{4, 4, 4};
  CHECK_THROWS_AS(kendall_tau(x, flat), Error);
  CHECK_THROWS_AS(kendall_tau(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("kendall_tau matches pair counting, with ties") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    const int levels = 2 + static_cast<int>(rng() % 8);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng() % levels);
    for (auto& v : y) v = static_cast<double>(rng() % levels);
    x[0] = 0;
    x[1] = 1;
    y[0] = 1;
    y[1] = 0;
    CHECK(kendall_tau(x, y) == oracle::kendall_tau_pairs(x, y));
    CHECK(kendall_tau(y, x) == kendall_tau(x, y));
    // strictly monotone transform
    std::vector<double> ex(n);
    for (std::size_t i = 0; i < n; ++i) ex[i] = std::exp(x[i]) * 3 - 1;
    CHECK(kendall_tau(ex, y) == doctest::Approx(kendall_tau(x, y)).epsilon(1e-14));
  }
}

TEST_CASE("factor_correlations") {
  const auto recs = make_gain_records(oracle::fixture_results());
  std::vector<std::string> ids{"A1", "A2", "B1", "B2"};
  DistanceMatrix constant{AssignmentStrategy::TargetToClosestSource, ids, DenseMatrix(4, 4, 1.0)};
  const std::vector<DistanceMatrix> mats{constant};
  const auto out = factor_correlations(recs, mats);
  REQUIRE(out.size() == 2);
  CHECK(out[0].factor == "distance:" + std::string(to_string(constant.strategy)));
  CHECK_FALSE(out[0].tau.has_value());
  CHECK_FALSE(out[0].error.empty());
  CHECK(out[1].factor == "source_size");
  CHECK_FALSE(out[1].tau.has_value());

  // one record per (target, source) pair so that distance can mirror r exactly
  std::vector<GainRecord> sub;
  DenseMatrix d(4, 4, 0.0);
  for (const auto& g : recs) {
    if (g.result.target.task != TaskType::SemanticSegmentation ||
        g.result.source.task != TaskType::SemanticSegmentation)
      continue;
    const auto ti = std::find(ids.begin(), ids.end(), g.result.target.dataset_id) - ids.begin();
    const auto si = std::find(ids.begin(), ids.end(), g.result.source.dataset_id) - ids.begin();
    d.at(ti, si) = 100.0 - g.r;
    sub.push_back(g);
  }
  const std::vector<DistanceMatrix> mono{{AssignmentStrategy::SymmetricAverage, ids, d}};
  const auto res = factor_correlations(sub, mono);
  REQUIRE(res[0].tau.has_value());
  CHECK(*res[0].tau == 1.0);
  CHECK(res[0].n == sub.size());

  DistanceMatrix missing{AssignmentStrategy::EmdOneToOne, {"A1"}, DenseMatrix(1, 1)};
  const std::vector<DistanceMatrix> bad{missing};
  CHECK_THROWS_AS(factor_correlations(recs, bad), Error);
}

TEST_CASE("regime names round-trip") {
  for (Regime r : {Regime::SmallTarget, Regime::FullTarget, Regime::SmallSourceSmallTarget})
    CHECK(parse_regime(to_string(r)) == r);
  CHECK_THROWS_AS(parse_regime("tiny"), Error);
}
