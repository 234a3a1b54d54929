#include <doctest.h>

#include <filesystem>
#include <random>

#include "xfer/harness/feature_io.hpp"
#include "xfer/harness/grid_io.hpp"
#include "xfer/harness/result_store.hpp"
#include "xfer/toy/transfer_chain.hpp"

using namespace xfer;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("xfer-io-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

FeatureSet random_features(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  std::vector<float> v(count * dim);
  for (auto& x : v) x = nd(rng);
  return FeatureSet("ds", "dom", dim, std::move(v));
}

TransferResult sample_result(const std::string& src, std::uint64_t seed) {
  TransferResult r;
  r.source = {src, TaskType::SemanticSegmentation};
  r.target = {"T", TaskType::DepthEstimation};
  r.experiment_key = toy::experiment_key(r.source, r.target, Regime::SmallTarget, seed);
  r.metric = {TaskType::DepthEstimation, 0.123456789012345678, Direction::LowerBetter};
  r.baseline_metric = {TaskType::DepthEstimation, 0.2, Direction::LowerBetter};
  r.source_domain = "a";
  r.target_domain = "b";
  r.source_train_size = 60;
  r.seed = seed;
  return r;
}

}  // namespace

TEST_CASE("feature files round-trip byte for byte") {
  const auto f = random_features(17, 5, 1);
  const auto bytes = io::encode_features(f);
  CHECK(bytes.size() == 5 + 8 + 17 * 5 * 4);
  const auto back = io::decode_features(bytes);
  CHECK(back.dim() == 5);
  CHECK(io::encode_features(back) == bytes);

  TempDir tmp;
  io::save_features(f, tmp.path / "f.xfrf");
  const auto loaded = io::load_features(tmp.path / "f.xfrf");
  CHECK(loaded.dataset_id() == "ds");
  CHECK(loaded.domain_label() == "dom");
  CHECK(io::read_file_bytes(tmp.path / "f.xfrf") == bytes);
}

TEST_CASE("feature decoding errors") {
  const auto bytes = io::encode_features(random_features(3, 2, 2));
  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  CHECK_THROWS_WITH_AS(io::decode_features(cut), doctest::Contains("truncated payload at offset"), Error);
  auto bad = bytes;
  bad[0] = 'Y';
  CHECK_THROWS_WITH_AS(io::decode_features(bad), doctest::Contains("bad magic"), Error);
}

TEST_CASE("CSV and binary encodings agree") {
  const auto f = random_features(9, 4, 3);
  const auto csv = io::features_from_csv(io::features_to_csv(f));
  const auto bin = io::decode_features(io::encode_features(f));
  REQUIRE(csv.count() == bin.count());
  for (std::size_t i = 0; i < csv.data().size(); ++i) {
    CHECK(std::abs(csv.data()[i] - bin.data()[i]) <= 1.2e-7f * std::max(1.0f, std::abs(bin.data()[i])));
  }
}

TEST_CASE("sidecar mismatch is rejected") {
  TempDir tmp;
  io::save_features(random_features(4, 3, 4), tmp.path / "a.xfrf");
  io::write_file_bytes(tmp.path / "a.xfrf", io::encode_features(random_features(4, 2, 5)));
  CHECK_THROWS_WITH_AS(io::load_features(tmp.path / "a.xfrf"), doctest::Contains("dimension mismatch"), Error);
  fs::remove(io::sidecar_path(tmp.path / "a.xfrf"));
  CHECK_THROWS_WITH_AS(io::load_features(tmp.path / "a.xfrf"), doctest::Contains("missing sidecar"), Error);
}

TEST_CASE("grid records round-trip") {
  const auto suite = toy::fixture_suite(0);
  const auto img = toy::generate_image(suite.datasets[0], 0, 11);
  const std::vector<io::GridRecord> recs{io::image_record(img), io::label_record(img), io::depth_record(img)};
  CHECK(recs[1].dtype == io::GridDType::U16);
  const auto bytes = io::encode_grids(recs);
  CHECK(io::decode_grids(bytes) == recs);
  auto cut = bytes;
  cut.resize(cut.size() - 1);
  CHECK_THROWS_WITH_AS(io::decode_grids(cut), doctest::Contains("truncated payload"), Error);
}

TEST_CASE("result records: JSON round trip and schema check") {
  const auto r = sample_result("S", 0);
  const auto line = io::result_to_json_line(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(io::result_from_json_line(line) == r);
  auto bumped = line;
  const auto pos = bumped.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  bumped.replace(pos, 18, "\"schema_version\":2");
  CHECK_THROWS_WITH_AS(io::result_from_json_line(bumped), doctest::Contains("schema version mismatch"), Error);
  CHECK_THROWS_AS(io::result_from_json_line("{not json"), Error);
}

TEST_CASE("result store appends once per key") {
  TempDir tmp;
  const auto path = tmp.path / "results.jsonl";
  {
    io::ResultStore store(path);
    CHECK(store.records().empty());
    CHECK(store.append(sample_result("S", 0)) == io::AppendStatus::Appended);
    CHECK(store.append(sample_result("S", 1)) == io::AppendStatus::Appended);
    CHECK(store.append(sample_result("S", 0)) == io::AppendStatus::Duplicate);
  }
  io::ResultStore reopened(path);
  CHECK(reopened.records().size() == 2);
  CHECK(reopened.contains(sample_result("S", 1).experiment_key));
  CHECK(reopened.append(sample_result("S", 1)) == io::AppendStatus::Duplicate);
  CHECK(io::load_results(path).size() == 2);

  const std::vector<TransferResult> rs{sample_result("X", 0), sample_result("Y", 0)};
  io::store_results(tmp.path / "copy.jsonl", rs);
  CHECK(io::load_results(tmp.path / "copy.jsonl") == rs);
}
