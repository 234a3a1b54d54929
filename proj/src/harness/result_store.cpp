#include "xfer/harness/result_store.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "xfer/harness/feature_io.hpp"

namespace xfer::io {
namespace {

using json = nlohmann::ordered_json;

Direction parse_direction(const std::string& s) {
  if (s == to_string(Direction::HigherBetter)) return Direction::HigherBetter;
  if (s == to_string(Direction::LowerBetter)) return Direction::LowerBetter;
  throw Error("unknown metric direction '" + s + "'");
}

json task_json(const TaskRef& t) {
  return {{"dataset", t.dataset_id}, {"task", std::string(to_string(t.task))}};
}

TaskRef task_from(const json& j) {
  return {j.at("dataset").get<std::string>(), parse_task_type(j.at("task").get<std::string>())};
}

json metric_json(const MetricValue& m) {
  return {{"task", std::string(to_string(m.task))},
          {"value", m.value},
          {"direction", std::string(to_string(m.direction))}};
}

MetricValue metric_from(const json& j) {
  return {parse_task_type(j.at("task").get<std::string>()), j.at("value").get<double>(),
          parse_direction(j.at("direction").get<std::string>())};
}

}  // namespace

std::string result_to_json_line(const TransferResult& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment_key"] = r.experiment_key;
  j["source"] = task_json(r.source);
  j["target"] = task_json(r.target);
  j["metric"] = metric_json(r.metric);
  j["baseline_metric"] = metric_json(r.baseline_metric);
  j["regime"] = std::string(to_string(r.regime));
  j["source_domain"] = r.source_domain;
  j["target_domain"] = r.target_domain;
  j["source_train_size"] = r.source_train_size;
  j["seed"] = r.seed;
  return j.dump();
}

TransferResult result_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("result record: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw Error("result record: schema version mismatch (found " + std::to_string(version) +
                  ", expected " + std::to_string(kSchemaVersion) + ")");
    }
    TransferResult r;
    r.experiment_key = j.at("experiment_key").get<std::string>();
    r.source = task_from(j.at("source"));
    r.target = task_from(j.at("target"));
    r.metric = metric_from(j.at("metric"));
    r.baseline_metric = metric_from(j.at("baseline_metric"));
    r.regime = parse_regime(j.at("regime").get<std::string>());
    r.source_domain = j.at("source_domain").get<std::string>();
    r.target_domain = j.at("target_domain").get<std::string>();
    r.source_train_size = j.at("source_train_size").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("result record: ") + e.what());
  }
}

std::vector<TransferResult> load_results(const std::filesystem::path& path) {
  std::vector<TransferResult> out;
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(result_from_json_line(line));
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void store_results(const std::filesystem::path& path, std::span<const TransferResult> results) {
  std::string text;
  for (const auto& r : results) text += result_to_json_line(r) + "\n";
  write_text_file(path, text);
}

ResultStore::ResultStore(std::filesystem::path path) : path_(std::move(path)) {
  records_ = load_results(path_);
  for (const auto& r : records_) keys_.insert(r.experiment_key);
}

std::vector<TransferResult> ResultStore::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

bool ResultStore::contains(const std::string& key) const {
  std::lock_guard lock(mu_);
  return keys_.count(key) != 0;
}

AppendStatus ResultStore::append(const TransferResult& r) {
  std::lock_guard lock(mu_);
  if (keys_.count(r.experiment_key) != 0) {
    std::cerr << "warning: duplicate experiment key '" << r.experiment_key << "', skipped\n";
    return AppendStatus::Duplicate;
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + path_.string());
  out << result_to_json_line(r) << '\n';
  out.flush();
  if (!out) throw Error("append failed: " + path_.string());
  keys_.insert(r.experiment_key);
  records_.push_back(r);
  return AppendStatus::Appended;
}

}  // namespace xfer::io
