#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "oracles/fixture_store.hpp"
#include "xfer/harness/feature_io.hpp"
#include "xfer/harness/pipeline.hpp"
#include "xfer/harness/report.hpp"

using namespace xfer;
namespace fs = std::filesystem;

namespace {

std::string cell_text(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", r);
  return std::string(buf) + " " + std::string(to_string(classify_level(r)));
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("xfer-" + tag + "-" + std::to_string(std::random_device{}()));
  fs::create_directories(p);
  return p;
}

harness::ChainConfig tiny_config() {
  harness::ChainConfig c;
  c.seeds = {0, 1};
  c.datasets = {"A1", "B1"};
  c.n_train = 8;
  c.n_val = 4;
  c.pretrain_n_train = 8;
  c.pretrain_n_val = 4;
  c.small_target = 4;
  c.source_epochs = 0;
  for (auto* t : {&c.pretrain, &c.source, &c.target, &c.embed}) {
    t->steps = 5;
    t->lr_candidates = {0.3};
  }
  return c;
}

}  // namespace

TEST_CASE("gain matrix cells carry the level of their mean gain") {
  const auto results = oracle::fixture_results();
  const auto gains = make_gain_records(results);
  const auto mats = report::gain_matrices(gains);
  REQUIRE(mats.size() == 1);
  const auto& m = mats[0];
  CHECK(m.targets.size() == 4);
  const auto text = report::gain_matrix_text(m);
  std::size_t filled = 0;
  for (std::size_t t = 0; t < m.targets.size(); ++t) {
    for (std::size_t s = 0; s < m.sources.size(); ++s) {
      if (!m.mean_r[t][s]) continue;
      ++filled;
      CHECK(text.find(cell_text(*m.mean_r[t][s])) != std::string::npos);
    }
  }
  CHECK(filled == results.size());
  for (const auto& g : gains) {
    const auto ti = std::find(m.targets.begin(), m.targets.end(),
                              g.result.target.dataset_id + ":" + std::string(to_string(g.result.target.task)));
    const auto si = std::find(m.sources.begin(), m.sources.end(),
                              g.result.source.dataset_id + ":" + std::string(to_string(g.result.source.task)));
    REQUIRE(ti != m.targets.end());
    REQUIRE(si != m.sources.end());
    CHECK(*m.mean_r[ti - m.targets.begin()][si - m.sources.begin()] == doctest::Approx(g.r));
  }
}

TEST_CASE("analyze matches the hand-tallied fixture") {
  const auto results = oracle::fixture_results();
  const auto a = report::analyze(results);
  CHECK(a.gains.size() == 24);
  const auto rows = oracle::fixture_expected_rows();
  CHECK(a.aggregates.size() == rows.size());
  CHECK(a.best.size() == 4);
  CHECK_FALSE(report::aggregates_text(a.aggregates).empty());
  CHECK(report::gains_csv(a.gains).find('\n') != std::string::npos);
  CHECK_THROWS_WITH_AS(report::analyze(std::vector<TransferResult>{}), "no records", Error);
}

TEST_CASE("distance matrices round-trip through CSV") {
  DistanceMatrix m;
  m.strategy = AssignmentStrategy::SymmetricAverage;
  m.ids = {"A1", "B1", "D1"};
  m.values = DenseMatrix(3, 3, std::vector<double>{0.0, 0.1, 1.0 / 3.0, 2.5e-17, 0.0, 7.0, 1e10, 3.14159, 0.0});
  const auto back = report::distance_matrix_from_csv(report::distance_matrix_csv(m));
  CHECK(back.strategy == m.strategy);
  CHECK(back.ids == m.ids);
  CHECK(std::equal(back.values.data().begin(), back.values.data().end(), m.values.data().begin()));
}

TEST_CASE("run_chains resumes and does not depend on the thread count") {
  const auto dir = temp_dir("chains");
  const auto cfg = tiny_config();
  std::size_t first = 0;
  {
    io::ResultStore store(dir / "a.jsonl");
    first = harness::run_chains(cfg, store, 1);
    CHECK(first > 0);
    CHECK(harness::run_chains(cfg, store, 1) == 0);
  }
  {
    io::ResultStore store(dir / "b.jsonl");
    CHECK(harness::run_chains(cfg, store, 2) == first);
  }
  CHECK(io::read_file_bytes(dir / "a.jsonl") == io::read_file_bytes(dir / "b.jsonl"));
  fs::remove_all(dir);
}
