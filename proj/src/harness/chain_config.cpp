#include "xfer/harness/chain_config.hpp"

#include <algorithm>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "xfer/harness/feature_io.hpp"
#include "xfer/toy/rng.hpp"

namespace xfer::harness {
namespace {

std::string join(const std::string& where, std::string_view key) {
  return where.empty() ? std::string(key) : where + "." + std::string(key);
}

void check_keys(const toml::table& t, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  for (auto&& [k, v] : t) {
    if (std::find(allowed.begin(), allowed.end(), k.str()) == allowed.end()) {
      throw Error("config: unknown key '" + join(where, k.str()) + "'");
    }
  }
}

const toml::table* table_at(const toml::table& t, std::string_view key,
                            const std::string& where) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) throw Error("config: '" + join(where, key) + "' must be a table");
  return n->as_table();
}

[[noreturn]] void type_error(const std::string& where, std::string_view key, const char* what) {
  throw Error("config: '" + join(where, key) + "' must be " + what);
}

std::int64_t to_int(const toml::node& n, const std::string& where, std::string_view key) {
  if (auto v = n.value_exact<std::int64_t>()) return *v;
  type_error(where, key, "an integer");
}

void read(const toml::table& t, std::string_view key, const std::string& where,
          std::size_t& out) {
  if (const toml::node* n = t.get(key)) {
    const std::int64_t v = to_int(*n, where, key);
    if (v < 0) type_error(where, key, "non-negative");
    out = static_cast<std::size_t>(v);
  }
}

void read(const toml::table& t, std::string_view key, const std::string& where, int& out) {
  if (const toml::node* n = t.get(key)) {
    const std::int64_t v = to_int(*n, where, key);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      type_error(where, key, "a 32-bit integer");
    }
    out = static_cast<int>(v);
  }
}

void read(const toml::table& t, std::string_view key, const std::string& where, double& out) {
  if (const toml::node* n = t.get(key)) {
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
      out = *v;
    } else {
      type_error(where, key, "a number");
    }
  }
}

void read(const toml::table& t, std::string_view key, const std::string& where, bool& out) {
  if (const toml::node* n = t.get(key)) {
    if (auto v = n->value_exact<bool>()) {
      out = *v;
    } else {
      type_error(where, key, "a boolean");
    }
  }
}

void read(const toml::table& t, std::string_view key, const std::string& where,
          std::string& out) {
  if (const toml::node* n = t.get(key)) {
    if (auto v = n->value_exact<std::string>()) {
      out = *v;
    } else {
      type_error(where, key, "a string");
    }
  }
}

template <class T, class F>
void read_list(const toml::table& t, std::string_view key, const std::string& where,
               std::vector<T>& out, F&& convert) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return;
  const toml::array* arr = n->as_array();
  if (arr == nullptr) type_error(where, key, "an array");
  out.clear();
  for (const toml::node& e : *arr) out.push_back(convert(e));
}

std::vector<std::string> string_list(const toml::table& t, std::string_view key,
                                     const std::string& where) {
  std::vector<std::string> out;
  read_list(t, key, where, out, [&](const toml::node& e) {
    if (auto v = e.value_exact<std::string>()) return *v;
    type_error(where, key, "an array of strings");
  });
  return out;
}

void read_tasks(const toml::table& t, std::string_view key, const std::string& where,
                std::vector<TaskType>& out) {
  if (t.get(key) == nullptr) return;
  out.clear();
  for (const auto& s : string_list(t, key, where)) out.push_back(parse_task_type(s));
}

void read_stage(const toml::table& t, const std::string& where, toy::TrainConfig& cfg,
                double* epochs) {
  if (epochs != nullptr) {
    check_keys(t, where,
               {"steps", "batch_size", "schedule", "lr_candidates", "decay_factor",
                "decay_fraction", "weight_decay", "freeze_backbone", "epochs"});
    read(t, "epochs", where, *epochs);
  } else {
    check_keys(t, where,
               {"steps", "batch_size", "schedule", "lr_candidates", "decay_factor",
                "decay_fraction", "weight_decay", "freeze_backbone"});
  }
  read(t, "steps", where, cfg.steps);
  read(t, "batch_size", where, cfg.batch_size);
  std::string schedule(toy::to_string(cfg.schedule));
  read(t, "schedule", where, schedule);
  cfg.schedule = toy::parse_schedule(schedule);
  read_list(t, "lr_candidates", where, cfg.lr_candidates, [&](const toml::node& e) {
    if (auto v = e.value<double>(); v && (e.is_floating_point() || e.is_integer())) return *v;
    type_error(where, "lr_candidates", "an array of numbers");
  });
  read(t, "decay_factor", where, cfg.decay_factor);
  read(t, "decay_fraction", where, cfg.decay_fraction);
  read(t, "weight_decay", where, cfg.weight_decay);
  read(t, "freeze_backbone", where, cfg.freeze_backbone);
}

std::set<std::string> suite_ids(const std::string& suite) {
  if (suite != "fixture") throw Error("config: unknown dataset suite '" + suite + "'");
  std::set<std::string> ids;
  for (const auto& s : toy::fixture_suite(0).datasets) ids.insert(s.dataset_id);
  return ids;
}

void require_known(const std::set<std::string>& ids, const std::string& id,
                   const char* where) {
  if (ids.count(id) == 0) throw Error(std::string("config: unknown dataset id '") + id +
                                      "' in " + where);
}

toml::array number_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

template <class T>
toml::array name_array(const std::vector<T>& v) {
  toml::array a;
  for (const auto& x : v) a.push_back(std::string(to_string(x)));
  return a;
}

toml::table stage_table(const toy::TrainConfig& c) {
  return toml::table{
      {"steps", static_cast<std::int64_t>(c.steps)},
      {"batch_size", static_cast<std::int64_t>(c.batch_size)},
      {"schedule", std::string(toy::to_string(c.schedule))},
      {"lr_candidates", number_array(c.lr_candidates)},
      {"decay_factor", c.decay_factor},
      {"decay_fraction", c.decay_fraction},
      {"weight_decay", c.weight_decay},
      {"freeze_backbone", c.freeze_backbone},
  };
}

}  // namespace

void ChainConfig::validate() const {
  if (seeds.empty()) throw Error("config: no seeds");
  if (jobs == 0) throw Error("config: jobs must be positive");
  if (small_target == 0 || small_source == 0) {
    throw Error("config: regime caps must be positive");
  }
  if (n_train == 0 || n_val == 0 || pretrain_n_train == 0 || pretrain_n_val == 0) {
    throw Error("config: dataset sizes must be positive");
  }
  if (source_tasks.empty() || target_tasks.empty()) throw Error("config: empty task list");
  if (hidden == 0 || patch == 0 || patch % 2 == 0) {
    throw Error("config: hidden must be positive and patch odd");
  }
  if (stride <= 0) throw Error("config: stride must be positive");
  if (distance_samples == 0 || emd_cap == 0) {
    throw Error("config: distance sample counts must be positive");
  }
  if (strategies.empty()) throw Error("config: no distance strategies");
  if (source_epochs < 0.0) throw Error("config: source epochs must be non-negative");
  for (const auto* c : {&pretrain, &source, &target, &embed}) c->validate();

  const auto ids = suite_ids(suite);
  for (const auto& id : datasets) require_known(ids, id, "data.datasets");
  for (const auto& [id, n] : train_size) {
    require_known(ids, id, "data.train_size");
    if (n == 0) throw Error("config: train_size of '" + id + "' must be positive");
  }
  for (const auto& [id, on] : nms_by_dataset) require_known(ids, id, "eval.nms_by_dataset");
}

ChainConfig parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw Error("config: line " + std::to_string(e.source().begin.line) + ": " +
                std::string(e.description()));
  }
  ChainConfig c;
  check_keys(root, "", {"experiment", "data", "tasks", "caps", "model", "train", "eval",
                        "distance"});

  if (const auto* t = table_at(root, "experiment", "")) {
    const std::string w = "experiment";
    check_keys(*t, w, {"id", "regime", "seeds", "jobs"});
    read(*t, "id", w, c.experiment_id);
    std::string regime(to_string(c.regime));
    read(*t, "regime", w, regime);
    c.regime = parse_regime(regime);
    read_list(*t, "seeds", w, c.seeds, [&](const toml::node& e) {
      const std::int64_t v = to_int(e, w, "seeds");
      if (v < 0) type_error(w, "seeds", "non-negative");
      return static_cast<std::uint64_t>(v);
    });
    read(*t, "jobs", w, c.jobs);
  }
  if (const auto* t = table_at(root, "data", "")) {
    const std::string w = "data";
    check_keys(*t, w, {"suite", "n_train", "n_val", "pretrain_n_train", "pretrain_n_val",
                       "datasets", "train_size"});
    read(*t, "suite", w, c.suite);
    read(*t, "n_train", w, c.n_train);
    read(*t, "n_val", w, c.n_val);
    read(*t, "pretrain_n_train", w, c.pretrain_n_train);
    read(*t, "pretrain_n_val", w, c.pretrain_n_val);
    if (t->get("datasets") != nullptr) c.datasets = string_list(*t, "datasets", w);
    if (const auto* sizes = table_at(*t, "train_size", w)) {
      for (auto&& [k, v] : *sizes) {
        std::size_t n = 0;
        read(*sizes, k.str(), w + ".train_size", n);
        c.train_size[std::string(k.str())] = n;
      }
    }
  }
  if (const auto* t = table_at(root, "tasks", "")) {
    check_keys(*t, "tasks", {"source", "target"});
    read_tasks(*t, "source", "tasks", c.source_tasks);
    read_tasks(*t, "target", "tasks", c.target_tasks);
  }
  if (const auto* t = table_at(root, "caps", "")) {
    check_keys(*t, "caps", {"small_target", "small_source"});
    read(*t, "small_target", "caps", c.small_target);
    read(*t, "small_source", "caps", c.small_source);
  }
  if (const auto* t = table_at(root, "model", "")) {
    check_keys(*t, "model", {"hidden", "patch", "stride"});
    read(*t, "hidden", "model", c.hidden);
    read(*t, "patch", "model", c.patch);
    read(*t, "stride", "model", c.stride);
  }
  if (const auto* t = table_at(root, "train", "")) {
    // keys directly under [train] apply to every stage before the per-stage tables
    const std::string w = "train";
    toml::table common;
    for (auto&& [k, v] : *t) {
      if (!v.is_table()) common.insert(k, v);
    }
    for (auto* stage : {&c.pretrain, &c.source, &c.target, &c.embed}) {
      read_stage(common, w, *stage, nullptr);
    }
    const std::pair<const char*, toy::TrainConfig*> stages[] = {
        {"pretrain", &c.pretrain}, {"source", &c.source}, {"target", &c.target},
        {"embed", &c.embed}};
    for (auto&& [k, v] : *t) {
      if (!v.is_table()) continue;
      auto it = std::find_if(std::begin(stages), std::end(stages),
                             [&](const auto& s) { return k.str() == s.first; });
      if (it == std::end(stages)) throw Error("config: unknown key '" + join(w, k.str()) + "'");
      read_stage(*v.as_table(), join(w, k.str()), *it->second,
                 it->second == &c.source ? &c.source_epochs : nullptr);
    }
  }
  if (const auto* t = table_at(root, "eval", "")) {
    const std::string w = "eval";
    check_keys(*t, w, {"nms", "nms_iou", "top_t", "keypoint_threshold", "nms_by_dataset"});
    read(*t, "nms", w, c.nms);
    for (auto* stage : {&c.pretrain, &c.source, &c.target, &c.embed}) {
      stage->eval.nms = c.nms;
      read(*t, "nms_iou", w, stage->eval.nms_iou);
      read(*t, "top_t", w, stage->eval.top_t);
      read(*t, "keypoint_threshold", w, stage->eval.keypoint_threshold);
    }
    if (const auto* per = table_at(*t, "nms_by_dataset", w)) {
      for (auto&& [k, v] : *per) {
        bool on = true;
        read(*per, k.str(), w + ".nms_by_dataset", on);
        c.nms_by_dataset[std::string(k.str())] = on;
      }
    }
  }
  if (const auto* t = table_at(root, "distance", "")) {
    const std::string w = "distance";
    check_keys(*t, w, {"samples", "emd_cap", "strategies"});
    read(*t, "samples", w, c.distance_samples);
    read(*t, "emd_cap", w, c.emd_cap);
    if (t->get("strategies") != nullptr) {
      c.strategies.clear();
      for (const auto& s : string_list(*t, "strategies", w)) {
        c.strategies.push_back(parse_strategy(s));
      }
    }
  }
  c.validate();
  return c;
}

ChainConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(io::read_text_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string to_toml(const ChainConfig& c) {
  toml::array seeds;
  for (auto s : c.seeds) seeds.push_back(static_cast<std::int64_t>(s));
  toml::array datasets;
  for (const auto& d : c.datasets) datasets.push_back(d);
  toml::table sizes;
  for (const auto& [id, n] : c.train_size) sizes.insert(id, static_cast<std::int64_t>(n));
  toml::table nms;
  for (const auto& [id, on] : c.nms_by_dataset) nms.insert(id, on);

  toml::table source = stage_table(c.source);
  source.insert("epochs", c.source_epochs);
  const toy::EvalOptions& ev = c.target.eval;

  toml::table root{
      {"experiment", toml::table{{"id", c.experiment_id},
                                 {"regime", std::string(to_string(c.regime))},
                                 {"seeds", seeds},
                                 {"jobs", static_cast<std::int64_t>(c.jobs)}}},
      {"data", toml::table{{"suite", c.suite},
                           {"n_train", static_cast<std::int64_t>(c.n_train)},
                           {"n_val", static_cast<std::int64_t>(c.n_val)},
                           {"pretrain_n_train", static_cast<std::int64_t>(c.pretrain_n_train)},
                           {"pretrain_n_val", static_cast<std::int64_t>(c.pretrain_n_val)},
                           {"datasets", datasets},
                           {"train_size", sizes}}},
      {"tasks", toml::table{{"source", name_array(c.source_tasks)},
                            {"target", name_array(c.target_tasks)}}},
      {"caps", toml::table{{"small_target", static_cast<std::int64_t>(c.small_target)},
                           {"small_source", static_cast<std::int64_t>(c.small_source)}}},
      {"model", toml::table{{"hidden", static_cast<std::int64_t>(c.hidden)},
                            {"patch", static_cast<std::int64_t>(c.patch)},
                            {"stride", static_cast<std::int64_t>(c.stride)}}},
      {"train", toml::table{{"pretrain", stage_table(c.pretrain)},
                            {"source", source},
                            {"target", stage_table(c.target)},
                            {"embed", stage_table(c.embed)}}},
      {"eval", toml::table{{"nms", c.nms},
                           {"nms_iou", ev.nms_iou},
                           {"top_t", static_cast<std::int64_t>(ev.top_t)},
                           {"keypoint_threshold", ev.keypoint_threshold},
                           {"nms_by_dataset", nms}}},
      {"distance", toml::table{{"samples", static_cast<std::int64_t>(c.distance_samples)},
                               {"emd_cap", static_cast<std::int64_t>(c.emd_cap)},
                               {"strategies", name_array(c.strategies)}}},
  };
  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

std::string config_fingerprint(const ChainConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(toy::hash_name(to_toml(cfg))));
  return buf;
}

toy::ChainSettings chain_settings(const ChainConfig& cfg, std::uint64_t seed) {
  toy::ChainSettings s;
  s.pretrain = cfg.pretrain;
  s.source = cfg.source;
  s.target = cfg.target;
  s.small_target = cfg.small_target;
  s.small_source = cfg.small_source;
  s.source_epochs = cfg.source_epochs;
  s.hidden = cfg.hidden;
  s.patch = cfg.patch;
  s.stride = cfg.stride;
  s.seed = seed;
  s.nms_by_dataset = cfg.nms_by_dataset;
  return s;
}

}  // namespace xfer::harness
