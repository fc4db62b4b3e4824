// trge: run, ablate and report continual-learning experiments.
//
// Any config key can be overridden from the environment as TRGE_<KEY>, for
// example TRGE_THETA=0.5 or TRGE_NUM_EXPERTS=4. Precedence, lowest first:
// built-in defaults, the config file, the environment, command-line flags.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trge/artifact.hpp"
#include "trge/config.hpp"
#include "trge/error.hpp"
#include "trge/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

trge::RunConfig configure(const std::string& path, std::optional<std::uint64_t> seed,
                          const std::optional<std::string>& out) {
  trge::RunConfig cfg = trge::load_config(path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_dir = *out;
  trge::validate(cfg);
  return cfg;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::optional<std::string>& out) {
  const trge::RunConfig cfg = configure(config_path, seed, out);
  trge::RunResult result;
  try {
    trge::run_experiment_into(cfg, result);
  } catch (const trge::ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    trge::save_partial_run(result, cfg.out_dir, e.what());
    std::cerr << "run failed: " << e.what() << "\npartial artifact written to "
              << cfg.out_dir << '\n';
    return kExitRuntime;
  }
  trge::save_run(result, cfg.out_dir);
  std::cout << trge::render_metrics_table(result.metrics);
  std::cout << "artifact written to " << cfg.out_dir << '\n';
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& axis_name,
               const std::string& values, std::size_t seeds, std::optional<std::uint64_t> seed,
               const std::optional<std::string>& out) {
  const trge::RunConfig cfg = configure(config_path, seed, out);
  const trge::AblationAxis axis = trge::parse_axis(axis_name);
  const std::vector<std::string> list = split_values(values);
  // Reject bad values before spending time on any run.
  for (const std::string& v : list) {
    trge::RunConfig probe = cfg;
    trge::apply_axis(probe, axis, v);
  }
  const trge::AblationTable table = trge::run_ablation(cfg, axis, list, seeds);
  std::cout << table.render();
  std::filesystem::create_directories(cfg.out_dir);
  const auto csv = std::filesystem::path(cfg.out_dir) / ("ablation_" + trge::to_string(axis) + ".csv");
  std::ofstream(csv) << table.to_csv();
  std::cout << "table written to " << csv.string() << '\n';
  return 0;
}

int cmd_report(const std::string& artifact) {
  const trge::RunResult result = trge::load_run(artifact);
  std::cout << trge::render_metrics_table(result.metrics);
  const std::filesystem::path dir = std::filesystem::is_directory(artifact)
                                        ? std::filesystem::path(artifact)
                                        : std::filesystem::path(artifact).parent_path();
  const auto acc = dir / trge::files::kAccuracyCsv;
  std::ofstream(acc) << result.accuracy.to_csv();
  std::cout << "accuracy matrix: " << acc.string() << '\n';
  if (!result.frequency.empty()) {
    const auto freq = dir / trge::files::kFrequencyCsv;
    std::ofstream(freq) << result.frequency.back().to_csv();
    std::cout << "selection frequency: " << freq.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level routed expert groups for continual learning"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  auto* run = app.add_subcommand("run", "Run the full task stream and write an artifact");
  run->add_option("--config", config_path, "config file (key = value lines)")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out, "output directory");

  std::string axis;
  std::string values;
  std::size_t seeds = 1;
  auto* ablate = app.add_subcommand("ablate", "Compare runs along one axis");
  ablate->add_option("--config", config_path, "config file")->required();
  ablate->add_option("--axis", axis,
                     "grouping, inter_router, recognizer, fusion, N_e, theta or alpha")
      ->required();
  ablate->add_option("--values", values, "comma-separated values")->required();
  ablate->add_option("--seeds", seeds, "seeds per value, starting at the config seed")
      ->check(CLI::PositiveNumber);
  ablate->add_option("--seed", seed, "override the base seed");
  ablate->add_option("--out", out, "output directory");

  std::string artifact;
  auto* report = app.add_subcommand("report", "Print metrics and export CSVs from an artifact");
  report->add_option("artifact", artifact, "artifact file or run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out);
    if (*ablate) return cmd_ablate(config_path, axis, values, seeds, seed, out);
    return cmd_report(artifact);
  } catch (const trge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
