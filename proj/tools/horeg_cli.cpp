// Command-line front end: training campaigns, objective sweeps over the
// regularization parameter, and re-summarizing persisted runs.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "horeg/experiment.hpp"

namespace {

using namespace horeg;

struct TrainArgs {
  std::string config_path;
  std::string method = "hr";
  int runs = -1;
  int episodes = -1;
  bool capped = true;
  bool uncapped = false;
  long seed = -1;
  std::string out_dir;
  int workers = 0;
  bool dump_gram = false;
};

int run_train(const TrainArgs& args) {
  experiment::ExperimentConfig config =
      experiment::ExperimentConfig::defaults_for(experiment::parse_method(args.method));
  if (!args.config_path.empty()) experiment::apply_config_file(config, args.config_path);
  if (args.runs > 0) config.runs = args.runs;
  if (args.episodes > 0) config.episodes = args.episodes;
  if (args.uncapped) config.capped = false;
  if (args.seed >= 0) config.base_seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out_dir.empty()) config.output_dir = args.out_dir;
  if (args.workers > 0) config.workers = args.workers;
  if (args.dump_gram) config.dump_gram = true;
  if (config.output_dir.empty()) throw ConfigError("--out DIR (or output_dir in the config file) is required");

  auto [records, stats] = experiment::run_experiment(config);
  std::cout << experiment::summary_to_json(config, stats) << std::endl;
  return 0;
}

struct SweepArgs {
  std::vector<std::string> strategies;
  std::vector<int> orders;
  std::string grid_log = "1e-3:1e3:30";
  std::string out_path;
  std::string gram_file;
  long dim = 10;
  long rank = -1;
  long seed = 1;
  double eig_lo = 0.1;
  double eig_hi = 10.0;
  bool swapped = false;
};

reg::SweepKind parse_kind(const std::string& name) {
  if (name == "scalar") return reg::SweepKind::scalar;
  if (name == "shift-clamp") return reg::SweepKind::eig_shift_clamp;
  if (name == "complement") return reg::SweepKind::eig_complement;
  if (name == "residual-target") return reg::SweepKind::residual_target;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected scalar, shift-clamp, complement, or residual-target)");
}

int run_sweep(const SweepArgs& args) {
  double lo = 0, hi = 0;
  int steps = 0;
  {
    std::istringstream in(args.grid_log);
    std::string a, b, c;
    if (!std::getline(in, a, ':') || !std::getline(in, b, ':') || !std::getline(in, c, ':')) {
      throw ConfigError("--grid-log expects lo:hi:steps");
    }
    try {
      lo = std::stod(a);
      hi = std::stod(b);
      steps = std::stoi(c);
    } catch (const std::exception&) {
      throw ConfigError("--grid-log expects numeric lo:hi:steps");
    }
  }
  std::vector<reg::SweepKind> kinds;
  for (const std::string& name : args.strategies) kinds.push_back(parse_kind(name));
  if (kinds.empty()) kinds = {reg::SweepKind::scalar, reg::SweepKind::eig_complement};
  std::vector<int> orders = args.orders;
  if (orders.empty()) orders = {0, 1, 2, 3, 4, 5};

  const long rank = args.rank > 0 ? args.rank : args.dim;
  const reg::RegProblem problem =
      args.gram_file.empty()
          ? experiment::synthetic_problem(args.dim, rank, static_cast<std::uint64_t>(args.seed),
                                          args.eig_lo, args.eig_hi)
          : reg::RegProblem(experiment::load_matrix_csv(args.gram_file),
                            Matrix::Zero(experiment::load_matrix_csv(args.gram_file).rows(), 0));
  experiment::emit_sweep(problem, kinds, orders, experiment::log_grid(lo, hi, steps),
                         args.out_path,
                         args.swapped ? reg::Mode::swapped : reg::Mode::standard);
  std::cout << "wrote " << args.out_path << std::endl;
  return 0;
}

int run_summarize(const std::string& in_dir, long seed) {
  const auto stats =
      experiment::summarize_directory(in_dir, static_cast<std::uint64_t>(seed < 0 ? 0 : seed));
  experiment::ExperimentConfig echo;  // unknown config; report the statistics only
  echo.runs = stats.total_runs;
  echo.episodes = 0;
  std::cout << experiment::summary_to_json(echo, stats) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-order-regularized ELM training and diagnostics"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run a multi-run training campaign");
  train->add_option("--config", train_args.config_path, "Key-value configuration file");
  train->add_option("--method", train_args.method, "hr, eqlm, or gradq")
      ->check(CLI::IsMember({"hr", "eqlm", "gradq"}));
  train->add_option("--runs", train_args.runs, "Number of independent runs");
  train->add_option("--episodes", train_args.episodes, "Episodes per run");
  auto* capped_flag = train->add_flag("--capped", "Cap episodes at 200 steps (default)");
  train->add_flag("--uncapped", train_args.uncapped, "Lift the 200-step cap (safety cap 2000)")
      ->excludes(capped_flag);
  train->add_option("--seed", train_args.seed, "Base seed (run r uses base + r)");
  train->add_option("--out", train_args.out_dir, "Output directory");
  train->add_option("--workers", train_args.workers, "Worker pool size (default: cores)");
  train->add_flag("--dump-gram", train_args.dump_gram,
                  "Also persist each run's final accumulated gram matrix");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Emit an objective sweep as CSV");
  sweep->add_option("--strategy", sweep_args.strategies,
                    "scalar | shift-clamp | complement | residual-target (repeatable)");
  sweep->add_option("--orders", sweep_args.orders, "Series orders to sweep (repeatable)");
  sweep->add_option("--grid-log", sweep_args.grid_log, "Log-spaced grid lo:hi:steps");
  sweep->add_option("--out", sweep_args.out_path, "Output CSV path")->required();
  sweep->add_option("--gram-file", sweep_args.gram_file,
                    "CSV gram matrix captured from a run (default: synthetic)");
  sweep->add_option("--dim", sweep_args.dim, "Synthetic gram dimension");
  sweep->add_option("--rank", sweep_args.rank, "Synthetic gram rank (default: full)");
  sweep->add_option("--seed", sweep_args.seed, "Synthetic gram seed");
  sweep->add_option("--eig-lo", sweep_args.eig_lo, "Smallest nonzero eigenvalue");
  sweep->add_option("--eig-hi", sweep_args.eig_hi, "Largest eigenvalue");
  sweep->add_flag("--swapped", sweep_args.swapped, "Evaluate the swapped-mode factor");

  std::string summarize_dir;
  long summarize_seed = 0;
  CLI::App* summarize = app.add_subcommand("summarize", "Recompute statistics from run files");
  summarize->add_option("--in", summarize_dir, "Directory holding run_###.csv files")
      ->required();
  summarize->add_option("--seed", summarize_seed, "Bootstrap seed");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return run_train(train_args);
    if (sweep->parsed()) return run_sweep(sweep_args);
    if (summarize->parsed()) return run_summarize(summarize_dir, summarize_seed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const horeg::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
