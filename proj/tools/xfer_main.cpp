// xfer: command-line driver for the toy transfer benchmark.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xfer/harness/chain_config.hpp"
#include "xfer/harness/feature_io.hpp"
#include "xfer/harness/grid_io.hpp"
#include "xfer/harness/pipeline.hpp"
#include "xfer/harness/report.hpp"
#include "xfer/harness/result_store.hpp"

namespace fs = std::filesystem;
using namespace xfer;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> regime;
  std::optional<std::string> strategy;
  std::optional<std::size_t> emd_cap;
  std::string out;
};

// Config file first, then flags on top.
harness::ChainConfig resolve(const Common& c) {
  harness::ChainConfig cfg = c.config.empty() ? harness::ChainConfig{} : harness::load_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.regime) cfg.regime = parse_regime(*c.regime);
  if (c.strategy) cfg.strategies = {parse_strategy(*c.strategy)};
  if (c.emd_cap) cfg.emd_cap = *c.emd_cap;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c, const std::string& out_help) {
  app->add_option("--config", c.config, "Experiment config (TOML)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Run this seed only");
  app->add_option("--jobs", c.jobs, "Parallel seeds")->check(CLI::PositiveNumber);
  app->add_option("--regime", c.regime,
                  "small-target | full-target | small-source-small-target");
  app->add_option("--strategy", c.strategy,
                  "emd | target-to-source | source-to-target | symmetric");
  app->add_option("--emd-cap", c.emd_cap, "Sample cap for the EMD strategy")
      ->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, out_help)->required();
}

void write_report_files(const report::Analysis& a, const fs::path& dir) {
  io::write_text_file(dir / "gains.csv", report::gains_csv(a.gains));
  io::write_text_file(dir / "aggregates.csv", report::aggregates_csv(a.aggregates));
  io::write_text_file(dir / "best.csv", report::gains_csv(a.best));
  io::write_text_file(dir / "correlations.csv", report::correlations_csv(a.correlations));
}

report::SeedDistances load_distances(const fs::path& dir) {
  report::SeedDistances out;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> seed_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && name.rfind("seed-", 0) == 0) seed_dirs.push_back(e.path());
  }
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const auto& sd : seed_dirs) {
    const std::uint64_t seed = std::stoull(sd.filename().string().substr(5));
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(sd)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("distance-", 0) == 0 && e.path().extension() == ".csv") {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out[seed].push_back(report::distance_matrix_from_csv(io::read_text_file(f)));
    }
  }
  if (out.empty()) throw Error("no distance matrices under " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy transfer-learning benchmark"};
  app.require_subcommand(1);

  Common gen, train_src, chains, dist;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write every dataset of the suite as grid files");
  add_common(gen_cmd, gen, "Output directory");

  auto* train_cmd = app.add_subcommand("train-source", "Train and cache source backbones");
  add_common(train_cmd, train_src, "Cache directory");

  std::string chain_cache;
  auto* chains_cmd = app.add_subcommand("run-chains", "Run transfer chains into a result store");
  add_common(chains_cmd, chains, "Result store (JSON lines)");
  chains_cmd->add_option("--cache", chain_cache, "Backbone cache written by train-source");

  auto* dist_cmd = app.add_subcommand("distance", "Embed the suite and write distance matrices");
  add_common(dist_cmd, dist, "Output directory");

  std::string store_path, distances_dir, analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Gain records, aggregates and correlations");
  analyze_cmd->add_option("--store", store_path, "Result store")->required();
  analyze_cmd->add_option("--distances", distances_dir, "Output directory of `distance`");
  analyze_cmd->add_option("--out", analyze_out, "Directory for the CSV tables")->required();

  std::string report_store, report_out;
  bool ansi = false;
  auto* report_cmd = app.add_subcommand("report", "Render level-tagged tables");
  report_cmd->add_option("--store", report_store, "Result store")->required();
  report_cmd->add_option("--out", report_out, "Also write CSV tables here");
  report_cmd->add_flag("--ansi", ansi, "Color level tags");

  std::string config_path;
  auto* config_cmd = app.add_subcommand("config", "Configuration helpers");
  config_cmd->require_subcommand(1);
  auto* defaults_cmd = config_cmd->add_subcommand("show-defaults", "Print the default config");
  auto* check_cmd = config_cmd->add_subcommand("show", "Print a config with defaults filled in");
  check_cmd->add_option("path", config_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      const auto cfg = resolve(gen);
      for (auto seed : cfg.seeds) {
        const auto suite = harness::build_suite(cfg, seed);
        const fs::path dir = fs::path(gen.out) / ("seed-" + std::to_string(seed));
        io::dump_dataset(suite.pretrain, dir);
        for (const auto& ds : suite.datasets) io::dump_dataset(ds, dir);
        std::cout << "seed " << seed << ": " << suite.datasets.size() + 1 << " datasets -> "
                  << dir.string() << "\n";
      }
    } else if (*train_cmd) {
      const auto cfg = resolve(train_src);
      const std::size_t n = harness::train_sources(cfg, train_src.out, cfg.jobs);
      std::cout << n << " backbones written\n";
    } else if (*chains_cmd) {
      const auto cfg = resolve(chains);
      io::ResultStore store(chains.out);
      const std::size_t n = harness::run_chains(cfg, store, cfg.jobs, chain_cache);
      std::cout << n << " records appended to " << chains.out << "\n";
    } else if (*dist_cmd) {
      const auto cfg = resolve(dist);
      for (auto seed : cfg.seeds) {
        const auto suite = harness::build_suite(cfg, seed);
        const auto features = harness::embed_suite(cfg, suite, seed);
        const fs::path dir = fs::path(dist.out) / ("seed-" + std::to_string(seed));
        for (const auto& f : features) io::save_features(f, dir / (f.dataset_id() + ".xfrf"));
        for (const auto& m : harness::distance_matrices(cfg, features, seed, cfg.jobs)) {
          io::write_text_file(dir / ("distance-" + std::string(to_string(m.strategy)) + ".csv"),
                              report::distance_matrix_csv(m));
        }
        std::cout << "seed " << seed << " -> " << dir.string() << "\n";
      }
    } else if (*analyze_cmd) {
      const auto results = io::load_results(store_path);
      const auto distances =
          distances_dir.empty() ? report::SeedDistances{} : load_distances(distances_dir);
      const auto a = report::analyze(results, distances);
      write_report_files(a, analyze_out);
      std::cout << report::aggregates_text(a.aggregates) << "\n"
                << report::correlations_text(a.correlations);
    } else if (*report_cmd) {
      const auto results = io::load_results(report_store);
      const auto a = report::analyze(results);
      const auto matrices = report::gain_matrices(a.gains);
      for (const auto& m : matrices) std::cout << report::gain_matrix_text(m, ansi) << "\n";
      std::cout << report::aggregates_text(a.aggregates) << "\n"
                << report::best_text(a.best, ansi);
      if (!report_out.empty()) {
        write_report_files(a, report_out);
        for (const auto& m : matrices) {
          io::write_text_file(fs::path(report_out) /
                                  ("gain-matrix-" + std::string(to_string(m.regime)) + ".csv"),
                              report::gain_matrix_csv(m));
        }
      }
    } else if (*defaults_cmd) {
      std::cout << harness::to_toml(harness::ChainConfig{});
    } else if (*check_cmd) {
      std::cout << harness::to_toml(harness::load_config(config_path));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
