#include <doctest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "xfer/domain_distance.hpp"

using namespace xfer;

namespace {

FeatureSet points(std::string id, std::vector<float> xs, std::size_t dim = 1) {
  return FeatureSet(std::move(id), "d", dim, std::move(xs));
}

FeatureSet cluster(std::string id, float cx, float cy, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 0.5f);
  std::vector<float> v;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(cx + nd(rng));
    v.push_back(cy + nd(rng));
  }
  return FeatureSet(std::move(id), "d", 2, std::move(v));
}

}  // namespace

TEST_CASE("sample_features matches an independent selection sampler") {
  std::vector<float> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  const auto fs = points("a", v);
  for (std::uint64_t seed : {0ull, 1ull, 42ull, 9999ull}) {
    const auto got = sample_features(fs, 10, seed);
    const auto want = oracle::selection_sample(1000, 10, seed);
    REQUIRE(got.count() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got.row(i)[0] == static_cast<float>(want[i]));
  }
  const auto full = sample_features(fs, 5000, 3);
  CHECK(full.count() == 1000);
  CHECK(full.row(999)[0] == 999.0f);
  const auto a = sample_features(fs, 37, 8), b = sample_features(fs, 37, 8);
  for (std::size_t i = 0; i < 37; ++i) CHECK(a.row(i)[0] == b.row(i)[0]);
}

TEST_CASE("pairwise_distances examples") {
  const auto a = points("a", {0, 0}, 2), b = points("b", {3, 4}, 2);
  CHECK(pairwise_distances(a, b).at(0, 0) == 5.0);
  CHECK(pairwise_distances(points("x", {0}), points("y", {3})).at(0, 0) == 3.0);
  const auto c = points("c", {1, 2, 3, 4, 5, 6}, 2);
  const auto d = pairwise_distances(c, c);
  for (std::size_t i = 0; i < 3; ++i) CHECK(d.at(i, i) == 0.0);
  CHECK_THROWS_AS(pairwise_distances(a, points("z", {1})), Error);
}

TEST_CASE("hungarian examples and brute force") {
  const auto h = hungarian(DenseMatrix(2, 2, {1, 2, 3, 1}));
  CHECK(h.total == 2.0);
  CHECK(h.col_of_row == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(hungarian(DenseMatrix(2, 3)), Error);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 6;
    DenseMatrix m(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) m.at(r, c) = rng() % 3 == 0 ? std::floor(u(rng)) : u(rng);
    const auto got = hungarian(m);
    CHECK(got.total == oracle::brute_force_assignment(m));
    std::vector<bool> seen(n, false);
    for (auto c : got.col_of_row) seen[c] = true;
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("domain_distance on the 1-D example") {
  const auto t = points("t", {0, 10}), s = points("s", {1, 10});
  CHECK(domain_distance(t, s, AssignmentStrategy::TargetToClosestSource) == 0.5);
  CHECK(domain_distance(t, s, AssignmentStrategy::SourceToClosestTarget) == 0.5);
  CHECK(domain_distance(t, s, AssignmentStrategy::EmdOneToOne) == 0.5);
  CHECK(domain_distance(t, s, AssignmentStrategy::SymmetricAverage) == 0.5);
  CHECK_THROWS_WITH_AS(domain_distance(t, points("u", {1, 2, 3}), AssignmentStrategy::EmdOneToOne),
                       doctest::Contains("EMD requires equal sample counts"), Error);
}

TEST_CASE("domain_distance properties on random sets") {
  std::mt19937_64 rng(23);
  std::normal_distribution<float> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng() % 4, nt = 1 + rng() % 8, extra = 1 + rng() % 5;
    std::vector<float> tv(nt * dim), sv;
    for (auto& x : tv) x = nd(rng);
    // the source holds every target vector plus some others, interleaved
    for (std::size_t i = 0; i < nt; ++i) {
      sv.insert(sv.end(), tv.begin() + i * dim, tv.begin() + (i + 1) * dim);
      if (i < extra) for (std::size_t d = 0; d < dim; ++d) sv.push_back(nd(rng) + 5.0f);
    }
    const FeatureSet t("t", "d", dim, tv), s("s", "d", dim, sv);
    CHECK(domain_distance(t, s, AssignmentStrategy::TargetToClosestSource) == 0.0);
    CHECK(domain_distance(t, s, AssignmentStrategy::SourceToClosestTarget) > 0.0);
    for (AssignmentStrategy st : kAllStrategies) CHECK(domain_distance(t, t, st) == 0.0);
    CHECK(domain_distance(t, s, AssignmentStrategy::SymmetricAverage) ==
          domain_distance(s, t, AssignmentStrategy::SymmetricAverage));

    std::vector<float> uv(nt * dim);
    for (auto& x : uv) x = nd(rng);
    const FeatureSet u("u", "d", dim, uv);
    CHECK(domain_distance(t, u, AssignmentStrategy::TargetToClosestSource) <=
          domain_distance(t, u, AssignmentStrategy::EmdOneToOne) + 1e-12);
  }
}

TEST_CASE("distance_matrix examples") {
  const auto a = cluster("A", 20, 20, 60, 1);
  const auto b = cluster("B", 0, 0, 60, 2);
  const auto c = cluster("C", 0.5f, 0, 30, 3);
  const std::vector<FeatureSet> one{a};
  const auto m1 = distance_matrix(one, AssignmentStrategy::TargetToClosestSource);
  CHECK(m1.values.rows() == 1);
  CHECK(m1.values.at(0, 0) == 0.0);

  const std::vector<FeatureSet> dup{a, FeatureSet("A2", "d", 2, std::vector<float>(a.data().begin(), a.data().end()))};
  const auto m2 = distance_matrix(dup, AssignmentStrategy::SymmetricAverage, 1000, 4);
  CHECK(m2.at("A", "A2") == 0.0);
  CHECK(m2.at("A2", "A") == 0.0);

  const std::vector<FeatureSet> all{a, b, c};
  const auto m = distance_matrix(all, AssignmentStrategy::TargetToClosestSource, 1000, 5);
  CHECK(m.at("C", "B") < m.at("A", "B"));
  CHECK(m.ids == std::vector<std::string>{"A", "B", "C"});
  CHECK_THROWS_AS(m.at("Z", "A"), Error);
}

TEST_CASE("distance_matrix does not depend on the thread count") {
  std::vector<FeatureSet> all;
  for (int i = 0; i < 5; ++i) all.push_back(cluster("d" + std::to_string(i), float(i), 0, 40, i));
  for (AssignmentStrategy st : kAllStrategies) {
    const auto m1 = distance_matrix(all, st, 30, 7, 1);
    const auto m4 = distance_matrix(all, st, 30, 7, 4);
    CHECK(std::equal(m1.values.data().begin(), m1.values.data().end(), m4.values.data().begin()));
  }
}

TEST_CASE("strategy names round-trip") {
  for (AssignmentStrategy st : kAllStrategies) CHECK(parse_strategy(to_string(st)) == st);
  CHECK_THROWS_AS(parse_strategy("nearest"), Error);
}
