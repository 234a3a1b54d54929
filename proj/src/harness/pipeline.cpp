#include "xfer/harness/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <json.hpp>

#include "xfer/harness/feature_io.hpp"
#include "xfer/toy/rng.hpp"

namespace xfer::harness {
namespace {

std::filesystem::path seed_cache(const ChainConfig& cfg, const std::filesystem::path& dir,
                                 std::uint64_t seed) {
  return dir / config_fingerprint(cfg) / ("seed-" + std::to_string(seed));
}

std::filesystem::path source_file(const std::filesystem::path& dir, const std::string& id,
                                  TaskType task, Regime regime) {
  const char* stage = regime == Regime::SmallSourceSmallTarget ? "small-source" : "full";
  return dir / ("source-" + id + "-" + std::string(to_string(task)) + "-" + stage + ".json");
}

// Runs f(seed_index) for every seed on up to `jobs` threads; the first
// failure (in seed order) is rethrown after all threads finish.
template <class F>
void for_each_seed(std::size_t count, std::size_t jobs, F&& f) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(std::max<std::size_t>(jobs, 1), count);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

const toy::SynthDataset& Suite::find(std::string_view id) const {
  for (const auto& d : datasets) {
    if (d.id() == id) return d;
  }
  throw Error("unknown dataset id '" + std::string(id) + "'");
}

Suite build_suite(const ChainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const toy::DomainSuite specs = toy::fixture_suite(seed);
  std::vector<const toy::SynthDomainSpec*> chosen;
  if (cfg.datasets.empty()) {
    for (const auto& s : specs.datasets) chosen.push_back(&s);
  } else {
    for (const auto& id : cfg.datasets) {
      auto it = std::find_if(specs.datasets.begin(), specs.datasets.end(),
                             [&](const auto& s) { return s.dataset_id == id; });
      if (it == specs.datasets.end()) throw Error("unknown dataset id '" + id + "'");
      chosen.push_back(&*it);
    }
  }
  Suite suite;
  suite.pretrain = toy::generate_dataset(specs.pretrain, cfg.pretrain_n_train, cfg.pretrain_n_val);
  for (const auto* s : chosen) {
    const std::size_t k = s->components.size();
    std::size_t n_train = cfg.n_train * k;
    if (auto it = cfg.train_size.find(s->dataset_id); it != cfg.train_size.end()) {
      n_train = it->second;
    }
    suite.datasets.push_back(toy::generate_dataset(*s, n_train, cfg.n_val * k));
  }
  return suite;
}

std::vector<std::pair<TaskRef, TaskRef>> chain_pairs(const ChainConfig& cfg, const Suite& suite) {
  std::vector<std::pair<TaskRef, TaskRef>> out;
  for (const auto& tgt : suite.datasets) {
    for (TaskType tt : cfg.target_tasks) {
      for (const auto& src : suite.datasets) {
        for (TaskType st : cfg.source_tasks) {
          if (src.id() == tgt.id() && st == tt) continue;
          out.push_back({{src.id(), st}, {tgt.id(), tt}});
        }
      }
    }
  }
  return out;
}

std::string backbone_to_json(const toy::Backbone& bb) {
  nlohmann::ordered_json j;
  j["channels"] = bb.channels;
  j["patch"] = bb.patch;
  j["hidden"] = bb.hidden;
  j["weights"] = bb.weights;
  return j.dump() + "\n";
}

toy::Backbone backbone_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    toy::Backbone bb;
    bb.channels = j.at("channels").get<std::size_t>();
    bb.patch = j.at("patch").get<std::size_t>();
    bb.hidden = j.at("hidden").get<std::size_t>();
    bb.weights = j.at("weights").get<std::vector<double>>();
    if (bb.weights.size() != bb.hidden * bb.input_dim()) {
      throw Error("backbone: weight count does not match its shape");
    }
    return bb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("backbone: ") + e.what());
  }
}

std::vector<TransferResult> run_seed(const ChainConfig& cfg, std::uint64_t seed,
                                     const std::set<std::string>& done,
                                     const std::filesystem::path& cache_dir) {
  const Suite suite = build_suite(cfg, seed);
  const auto pairs = chain_pairs(cfg, suite);
  std::vector<std::pair<TaskRef, TaskRef>> todo;
  for (const auto& [s, t] : pairs) {
    if (done.count(toy::experiment_key(s, t, cfg.regime, seed)) == 0) todo.push_back({s, t});
  }
  std::vector<TransferResult> out;
  if (todo.empty()) return out;

  toy::ChainRunner runner(suite.pretrain, chain_settings(cfg, seed));
  if (!cache_dir.empty()) {
    const auto dir = seed_cache(cfg, cache_dir, seed);
    if (std::filesystem::exists(dir / "pretrain.json")) {
      runner.preload_pretrained(backbone_from_json(io::read_text_file(dir / "pretrain.json")));
    }
    for (const auto& src : suite.datasets) {
      for (TaskType task : cfg.source_tasks) {
        const auto file = source_file(dir, src.id(), task, cfg.regime);
        if (std::filesystem::exists(file)) {
          runner.preload_source(src.id(), task, cfg.regime,
                                backbone_from_json(io::read_text_file(file)));
        }
      }
    }
  }
  for (const auto& [s, t] : todo) {
    out.push_back(runner.run({&suite.find(s.dataset_id), s.task},
                             {&suite.find(t.dataset_id), t.task}, cfg.regime));
  }
  return out;
}

std::size_t run_chains(const ChainConfig& cfg, io::ResultStore& store, std::size_t jobs,
                       const std::filesystem::path& cache_dir) {
  std::set<std::string> done;
  for (const auto& r : store.records()) done.insert(r.experiment_key);
  std::vector<std::vector<TransferResult>> per_seed(cfg.seeds.size());
  for_each_seed(cfg.seeds.size(), jobs, [&](std::size_t i) {
    per_seed[i] = run_seed(cfg, cfg.seeds[i], done, cache_dir);
  });
  std::size_t appended = 0;
  for (const auto& results : per_seed) {
    for (const auto& r : results) {
      if (store.append(r) == io::AppendStatus::Appended) ++appended;
    }
  }
  return appended;
}

std::size_t train_sources(const ChainConfig& cfg, const std::filesystem::path& cache_dir,
                          std::size_t jobs) {
  std::atomic<std::size_t> written{0};
  for_each_seed(cfg.seeds.size(), jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const Suite suite = build_suite(cfg, seed);
    const auto dir = seed_cache(cfg, cache_dir, seed);
    toy::ChainRunner runner(suite.pretrain, chain_settings(cfg, seed));
    if (std::filesystem::exists(dir / "pretrain.json")) {
      runner.preload_pretrained(backbone_from_json(io::read_text_file(dir / "pretrain.json")));
    } else {
      io::write_text_file(dir / "pretrain.json", backbone_to_json(runner.pretrained()));
      ++written;
    }
    for (const auto& src : suite.datasets) {
      for (TaskType task : cfg.source_tasks) {
        const auto file = source_file(dir, src.id(), task, cfg.regime);
        if (std::filesystem::exists(file)) continue;
        io::write_text_file(file, backbone_to_json(runner.source_backbone(src, task, cfg.regime)));
        ++written;
      }
    }
  });
  return written;
}

std::vector<FeatureSet> embed_suite(const ChainConfig& cfg, const Suite& suite,
                                    std::uint64_t seed) {
  if (suite.datasets.empty()) throw Error("embed_suite: no datasets");
  const toy::Backbone init =
      toy::init_backbone(suite.pretrain.spec.channels(), cfg.patch, cfg.hidden,
                         toy::mix_seed(seed, toy::hash_name("embed-backbone")));
  toy::TrainConfig tc = cfg.embed;
  tc.seed = toy::mix_seed(seed, toy::hash_name("embed"));
  const toy::Backbone bb =
      toy::train_multisource(init, suite.datasets, toy::HeadKind::Segmentation, tc, cfg.stride)
          .backbone;
  std::vector<FeatureSet> out;
  for (const auto& ds : suite.datasets) {
    out.push_back(toy::embed_features(bb, ds, cfg.distance_samples, seed));
  }
  return out;
}

std::vector<DistanceMatrix> distance_matrices(const ChainConfig& cfg,
                                              std::span<const FeatureSet> features,
                                              std::uint64_t seed, std::size_t jobs) {
  std::vector<DistanceMatrix> out;
  for (AssignmentStrategy s : cfg.strategies) {
    std::size_t n = cfg.distance_samples;
    if (s == AssignmentStrategy::EmdOneToOne) {
      n = std::min(n, cfg.emd_cap);
      for (const auto& f : features) n = std::min(n, f.count());
    }
    out.push_back(distance_matrix(features, s, n, seed, jobs));
  }
  return out;
}

}  // namespace xfer::harness
