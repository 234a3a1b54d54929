#include "xfer/gains_meta.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace xfer {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::SmallTarget: return "small-target";
    case Regime::FullTarget: return "full-target";
    case Regime::SmallSourceSmallTarget: return "small-source-small-target";
  }
  return "unknown";
}

Regime parse_regime(std::string_view s) {
  for (Regime r : {Regime::SmallTarget, Regime::FullTarget,
                   Regime::SmallSourceSmallTarget}) {
    if (to_string(r) == s) return r;
  }
  throw Error("unknown regime '" + std::string(s) + "'");
}

std::string_view to_string(GainLevel l) {
  switch (l) {
    case GainLevel::VeryPositive: return "VP";
    case GainLevel::Positive: return "P";
    case GainLevel::Insignificant: return "I";
    case GainLevel::Negative: return "N";
  }
  return "?";
}

std::string_view to_string(TransferFilter f) {
  switch (f) {
    case TransferFilter::All: return "all";
    case TransferFilter::Within: return "within";
    case TransferFilter::Cross: return "cross";
  }
  return "?";
}

double relative_gain(const MetricValue& m, const MetricValue& baseline) {
  if (m.task != baseline.task) throw Error("relative_gain: task types differ");
  if (m.direction != baseline.direction) {
    throw Error("relative_gain: metric directions differ");
  }
  if (baseline.value == 0.0) throw Error("relative_gain: undefined gain (zero baseline)");
  const double r = (m.value / baseline.value - 1.0) * 100.0;
  return m.direction == Direction::LowerBetter ? -r : r;
}

GainLevel classify_level(double r) {
  if (!std::isfinite(r)) throw Error("classify_level: non-finite gain");
  if (r > 10.0) return GainLevel::VeryPositive;
  if (r > 2.0) return GainLevel::Positive;
  if (r < -2.0) return GainLevel::Negative;
  return GainLevel::Insignificant;
}

GainRecord make_gain_record(const TransferResult& result) {
  GainRecord g;
  g.result = result;
  g.r = relative_gain(result.metric, result.baseline_metric);
  g.level = classify_level(g.r);
  g.within_domain = result.source_domain == result.target_domain;
  g.within_task_type = result.source.task == result.target.task;
  return g;
}

std::vector<GainRecord> make_gain_records(std::span<const TransferResult> results) {
  std::vector<GainRecord> out;
  for (const auto& r : results) {
    if (r.source.is_baseline()) continue;
    out.push_back(make_gain_record(r));
  }
  return out;
}

namespace {

bool passes(TransferFilter f, bool within) {
  switch (f) {
    case TransferFilter::All: return true;
    case TransferFilter::Within: return within;
    case TransferFilter::Cross: return !within;
  }
  return false;
}

}  // namespace

AggregateRow aggregate_levels(std::span<const GainRecord> records,
                              TransferFilter domain, TransferFilter task) {
  AggregateRow row;
  row.domain = domain;
  row.task = task;
  std::size_t p = 0, vp = 0, neg = 0;
  for (const auto& g : records) {
    if (!passes(domain, g.within_domain) || !passes(task, g.within_task_type)) continue;
    ++row.count;
    if (g.r > 2.0) ++p;
    if (g.r > 10.0) ++vp;
    if (g.r < -2.0) ++neg;
  }
  if (row.count == 0) {
    throw Error("aggregate_levels: no records for domain=" +
                std::string(to_string(domain)) + " task=" + std::string(to_string(task)));
  }
  const double scale = 100.0 / static_cast<double>(row.count);
  row.pct_p = static_cast<double>(p) * scale;
  row.pct_vp = static_cast<double>(vp) * scale;
  row.pct_n = static_cast<double>(neg) * scale;
  return row;
}

std::vector<GainRecord> best_source_per_target(std::span<const GainRecord> records) {
  using Key = std::tuple<Regime, std::string, TaskType, std::uint64_t>;
  std::map<Key, std::size_t> slot;
  std::vector<GainRecord> out;
  for (const auto& g : records) {
    const auto& t = g.result;
    const Key key{t.regime, t.target.dataset_id, t.target.task, t.seed};
    const auto it = slot.find(key);
    if (it == slot.end()) {
      slot.emplace(key, out.size());
      out.push_back(g);
    } else if (g.r > out[it->second].r) {
      out[it->second] = g;
    }
  }
  return out;
}

std::vector<FactorCorrelation> factor_correlations(
    std::span<const GainRecord> records, std::span<const DistanceMatrix> distances) {
  std::vector<double> gains;
  gains.reserve(records.size());
  for (const auto& g : records) gains.push_back(g.r);

  auto correlate = [&](std::string name, const std::vector<double>& factor) {
    FactorCorrelation fc;
    fc.factor = std::move(name);
    fc.n = gains.size();
    try {
      fc.tau = kendall_tau(gains, factor);
    } catch (const Error& e) {
      fc.error = e.what();
    }
    return fc;
  };

  std::vector<FactorCorrelation> out;
  for (const auto& dm : distances) {
    std::vector<double> neg_dist;
    neg_dist.reserve(records.size());
    for (const auto& g : records) {
      neg_dist.push_back(-dm.at(g.result.target.dataset_id, g.result.source.dataset_id));
    }
    out.push_back(correlate("distance:" + std::string(to_string(dm.strategy)), neg_dist));
  }
  std::vector<double> sizes;
  sizes.reserve(records.size());
  for (const auto& g : records) {
    sizes.push_back(static_cast<double>(g.result.source_train_size));
  }
  out.push_back(correlate("source_size", sizes));
  return out;
}

}  // namespace xfer
