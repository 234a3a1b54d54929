#include "xfer/harness/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace xfer::report {
namespace {

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits, bool sign = false) {
  char buf[48];
  std::snprintf(buf, sizeof buf, sign ? "%+.*f" : "%.*f", digits, v);
  return buf;
}

std::string label(const TaskRef& t) {
  return t.dataset_id + ":" + std::string(to_string(t.task));
}

const char* level_color(GainLevel l) {
  switch (l) {
    case GainLevel::VeryPositive: return "\x1b[1;32m";
    case GainLevel::Positive: return "\x1b[32m";
    case GainLevel::Negative: return "\x1b[35m";
    case GainLevel::Insignificant: return "";
  }
  return "";
}

struct Cell {
  std::string text;
  const char* color = "";
};

// Left-aligned first column, right-aligned others, two spaces between.
std::string render(const std::vector<std::vector<Cell>>& rows, bool ansi) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].text.size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].text.size(), ' ');
      const bool colored = ansi && *r[c].color != '\0';
      if (c > 0) line += "  ";
      if (c > 0) line += pad;
      if (colored) line += r[c].color;
      line += r[c].text;
      if (colored) line += "\x1b[0m";
      if (c == 0 && r.size() > 1) line += pad;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string filter_name(TransferFilter f) { return std::string(to_string(f)); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<FactorCorrelation> pooled_correlations(std::span<const GainRecord> gains,
                                                   const SeedDistances& distances) {
  std::vector<double> r;
  r.reserve(gains.size());
  for (const auto& g : gains) r.push_back(g.r);

  auto correlate = [&](std::string name, const std::vector<double>& factor) {
    FactorCorrelation fc;
    fc.factor = std::move(name);
    fc.n = r.size();
    try {
      fc.tau = kendall_tau(r, factor);
    } catch (const Error& e) {
      fc.error = e.what();
    }
    return fc;
  };

  std::vector<FactorCorrelation> out;
  if (!distances.empty()) {
    std::vector<AssignmentStrategy> strategies;
    for (const auto& dm : distances.begin()->second) strategies.push_back(dm.strategy);
    for (AssignmentStrategy s : strategies) {
      std::vector<double> neg;
      neg.reserve(gains.size());
      for (const auto& g : gains) {
        auto it = distances.find(g.result.seed);
        if (it == distances.end()) {
          throw Error("no distance matrices for seed " + std::to_string(g.result.seed));
        }
        auto dm = std::find_if(it->second.begin(), it->second.end(),
                               [&](const DistanceMatrix& m) { return m.strategy == s; });
        if (dm == it->second.end()) {
          throw Error("no " + std::string(to_string(s)) + " distances for seed " +
                      std::to_string(g.result.seed));
        }
        neg.push_back(-dm->at(g.result.target.dataset_id, g.result.source.dataset_id));
      }
      out.push_back(correlate("distance:" + std::string(to_string(s)), neg));
    }
  }
  std::vector<double> sizes;
  for (const auto& g : gains) sizes.push_back(static_cast<double>(g.result.source_train_size));
  out.push_back(correlate("source_size", sizes));
  return out;
}

Analysis analyze(std::span<const TransferResult> results, const SeedDistances& distances) {
  Analysis a;
  a.gains = make_gain_records(results);
  if (a.gains.empty()) throw Error("no records");
  const TransferFilter filters[] = {TransferFilter::All, TransferFilter::Within,
                                    TransferFilter::Cross};
  for (TransferFilter d : filters) {
    for (TransferFilter t : filters) {
      try {
        a.aggregates.push_back(aggregate_levels(a.gains, d, t));
      } catch (const Error&) {
        // no records under this filter pair
      }
    }
  }
  a.best = best_source_per_target(a.gains);
  a.correlations = pooled_correlations(a.gains, distances);
  return a;
}

std::vector<GainMatrix> gain_matrices(std::span<const GainRecord> gains) {
  std::vector<GainMatrix> out;
  for (Regime regime : {Regime::SmallTarget, Regime::FullTarget, Regime::SmallSourceSmallTarget}) {
    GainMatrix m;
    m.regime = regime;
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
    for (const auto& g : gains) {
      if (g.result.regime != regime) continue;
      const std::string t = label(g.result.target), s = label(g.result.source);
      if (std::find(m.targets.begin(), m.targets.end(), t) == m.targets.end()) m.targets.push_back(t);
      if (std::find(m.sources.begin(), m.sources.end(), s) == m.sources.end()) m.sources.push_back(s);
      auto& [sum, n] = acc[{t, s}];
      sum += g.r;
      ++n;
    }
    if (m.targets.empty()) continue;
    // sources that are also targets follow the target order
    auto rank = [&](const std::string& s) {
      return std::find(m.targets.begin(), m.targets.end(), s) - m.targets.begin();
    };
    std::stable_sort(m.sources.begin(), m.sources.end(),
                     [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    for (const auto& t : m.targets) {
      std::vector<std::optional<double>> row;
      for (const auto& s : m.sources) {
        auto it = acc.find({t, s});
        if (it == acc.end()) {
          row.push_back(std::nullopt);
        } else {
          row.push_back(it->second.first / static_cast<double>(it->second.second));
        }
      }
      m.mean_r.push_back(std::move(row));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string gains_csv(std::span<const GainRecord> gains) {
  std::string out =
      "experiment_key,regime,source,source_task,target,target_task,seed,metric,baseline,"
      "r,level,within_domain,within_task\n";
  for (const auto& g : gains) {
    const auto& x = g.result;
    out += x.experiment_key + "," + std::string(to_string(x.regime)) + "," +
           x.source.dataset_id + "," + std::string(to_string(x.source.task)) + "," +
           x.target.dataset_id + "," + std::string(to_string(x.target.task)) + "," +
           std::to_string(x.seed) + "," + num(x.metric.value) + "," +
           num(x.baseline_metric.value) + "," + num(g.r) + "," +
           std::string(to_string(g.level)) + "," + (g.within_domain ? "1" : "0") + "," +
           (g.within_task_type ? "1" : "0") + "\n";
  }
  return out;
}

std::string aggregates_csv(std::span<const AggregateRow> rows) {
  std::string out = "domain,task,count,pct_p,pct_vp,pct_n\n";
  for (const auto& r : rows) {
    out += filter_name(r.domain) + "," + filter_name(r.task) + "," + std::to_string(r.count) +
           "," + num(r.pct_p) + "," + num(r.pct_vp) + "," + num(r.pct_n) + "\n";
  }
  return out;
}

std::string correlations_csv(std::span<const FactorCorrelation> rows) {
  std::string out = "factor,n,tau,error\n";
  for (const auto& r : rows) {
    out += r.factor + "," + std::to_string(r.n) + "," + (r.tau ? num(*r.tau) : "") + "," +
           r.error + "\n";
  }
  return out;
}

std::string gain_matrix_csv(const GainMatrix& m) {
  std::string out = "target\\source";
  for (const auto& s : m.sources) out += "," + s;
  out += "\n";
  for (std::size_t t = 0; t < m.targets.size(); ++t) {
    out += m.targets[t];
    for (const auto& cell : m.mean_r[t]) out += "," + (cell ? num(*cell) : std::string());
    out += "\n";
  }
  return out;
}

std::string aggregates_text(std::span<const AggregateRow> rows) {
  std::vector<std::vector<Cell>> t{{{"domain"}, {"task"}, {"n"}, {"%P"}, {"%VP"}, {"%N"}}};
  for (const auto& r : rows) {
    t.push_back({{filter_name(r.domain)}, {filter_name(r.task)}, {std::to_string(r.count)},
                 {fixed(r.pct_p, 1)}, {fixed(r.pct_vp, 1)}, {fixed(r.pct_n, 1)}});
  }
  return render(t, false);
}

std::string best_text(std::span<const GainRecord> best, bool ansi) {
  std::vector<std::vector<Cell>> t{{{"target"}, {"regime"}, {"seed"}, {"best source"}, {"r"}, {"level"}}};
  for (const auto& g : best) {
    const char* color = level_color(g.level);
    t.push_back({{label(g.result.target)}, {std::string(to_string(g.result.regime))},
                 {std::to_string(g.result.seed)}, {label(g.result.source)},
                 {fixed(g.r, 2, true), color}, {std::string(to_string(g.level)), color}});
  }
  return render(t, ansi);
}

std::string correlations_text(std::span<const FactorCorrelation> rows) {
  std::vector<std::vector<Cell>> t{{{"factor"}, {"n"}, {"tau"}}};
  for (const auto& r : rows) {
    t.push_back({{r.factor}, {std::to_string(r.n)},
                 {r.tau ? fixed(*r.tau, 3, true) : "undefined (" + r.error + ")"}});
  }
  return render(t, false);
}

std::string gain_matrix_text(const GainMatrix& m, bool ansi) {
  std::vector<std::vector<Cell>> t;
  std::vector<Cell> header{{std::string(to_string(m.regime)) + " target\\source"}};
  for (const auto& s : m.sources) header.push_back({s});
  t.push_back(std::move(header));
  for (std::size_t i = 0; i < m.targets.size(); ++i) {
    std::vector<Cell> row{{m.targets[i]}};
    for (const auto& cell : m.mean_r[i]) {
      if (!cell) {
        row.push_back({"-"});
        continue;
      }
      const GainLevel l = classify_level(*cell);
      row.push_back({fixed(*cell, 1, true) + " " + std::string(to_string(l)), level_color(l)});
    }
    t.push_back(std::move(row));
  }
  return render(t, ansi);
}

std::string distance_matrix_csv(const DistanceMatrix& m) {
  std::string out(to_string(m.strategy));
  for (const auto& id : m.ids) out += "," + id;
  out += "\n";
  for (std::size_t t = 0; t < m.ids.size(); ++t) {
    out += m.ids[t];
    for (std::size_t s = 0; s < m.ids.size(); ++s) out += "," + num(m.values.at(t, s));
    out += "\n";
  }
  return out;
}

DistanceMatrix distance_matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("distance csv: empty input");
  const auto header = split(line, ',');
  DistanceMatrix m;
  m.strategy = parse_strategy(header.front());
  m.ids.assign(header.begin() + 1, header.end());
  const std::size_t n = m.ids.size();
  m.values = DenseMatrix(n, n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    if (row >= n) throw Error("distance csv: more rows than ids");
    if (cells.size() != n + 1 || cells.front() != m.ids[row]) {
      throw Error("distance csv: row " + std::to_string(row + 2) + " does not match the header");
    }
    for (std::size_t s = 0; s < n; ++s) {
      const std::string& c = cells[s + 1];
      double v = 0.0;
      auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw Error("distance csv: bad number '" + c + "' on row " + std::to_string(row + 2));
      }
      m.values.at(row, s) = v;
    }
    ++row;
  }
  if (row != n) throw Error("distance csv: expected " + std::to_string(n) + " rows");
  return m;
}

}  // namespace xfer::report
