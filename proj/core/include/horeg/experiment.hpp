#pragma once

// Experiment orchestration: multi-run training campaigns over the cart-pole
// task, persistence of per-run reward curves and aggregate statistics, and
// CSV emission of objective sweeps. Every output is a deterministic function
// of the configuration (wall times are reported on the console only).

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "horeg/agent.hpp"
#include "horeg/metrics.hpp"
#include "horeg/reg.hpp"

namespace horeg::experiment {

enum class Method { hr, eqlm, grad_q };

std::string method_name(Method method);
Method parse_method(const std::string& name);  // throws ConfigError

struct ExperimentConfig {
  agent::AgentConfig agent;
  Method method = Method::hr;
  bool capped = true;
  long uncapped_safety_cap = 2000;
  int runs = 10;
  int episodes = 600;
  std::string output_dir;
  std::uint64_t base_seed = 0;
  int workers = 0;  // 0 = hardware concurrency
  bool dump_gram = false;

  /// Reference hyperparameters for a method (regularized ELM column with the
  /// matching order for hr/eqlm, Q-network column for the gradient baseline).
  static ExperimentConfig defaults_for(Method method);
};

/// One training run: per-episode reward and step count. Seeded with
/// base_seed + run_index.
struct RunRecord {
  int run_index = 0;
  std::vector<double> rewards;
  std::vector<long> steps;
  double wall_time_s = 0.0;  // console-only, never persisted
  bool aborted = false;
  std::string diagnostic;
};

struct SummaryStats {
  double mean_final50 = 0.0;  // mean over runs of each run's final-50-episode mean
  double std_final50 = 0.0;
  metrics::Interval mean_final50_ci;
  metrics::Interval std_final50_ci;
  double auc_mean = 0.0;  // per-run AUC, averaged
  double auc_std = 0.0;
  metrics::Interval auc_mean_ci;
  metrics::Interval auc_std_ci;
  double mean_curve_auc = 0.0;  // AUC of the across-run mean reward curve
  std::vector<double> final50_per_run;
  std::vector<double> auc_per_run;
  int completed_runs = 0;
  int total_runs = 0;
  bool partial = false;  // some runs aborted; statistics cover the completed ones
};

/// Aggregate completed runs; bootstrap seeds derive from `seed` only.
SummaryStats summarize_records(const std::vector<RunRecord>& records, int episodes,
                               std::uint64_t seed);

/// Execute config.runs training runs on a bounded worker pool, persist one
/// run_###.csv per run (episode,reward,steps) plus summary.json under
/// config.output_dir, and return everything. Outputs are byte-identical
/// across repeat invocations.
std::pair<std::vector<RunRecord>, SummaryStats> run_experiment(const ExperimentConfig& config);

/// Recompute the summary from persisted run_###.csv files.
SummaryStats summarize_directory(const std::string& dir, std::uint64_t seed);

std::vector<RunRecord> load_run_records(const std::string& dir);

std::string summary_to_json(const ExperimentConfig& config, const SummaryStats& stats);

/// Apply `key = value` lines (flat text, # comments) onto a config.
/// Canonical snake_case keys and the human-readable hyperparameter names
/// ("Hidden nodes", "Discount factor", ...) are both accepted; unknown keys
/// throw ConfigError.
void apply_config_file(ExperimentConfig& config, const std::string& path);
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);

/// Seeded synthetic problem: Gram matrix with log-spaced eigenvalues in
/// [eig_lo, eig_hi] on the first `rank` directions of a random orthogonal
/// basis, zeros after; cross vector standard normal.
reg::RegProblem synthetic_problem(Index dim, Index rank, std::uint64_t seed, double eig_lo = 0.1,
                                  double eig_hi = 10.0);

/// Write an objective sweep as CSV with header
/// strategy,c,mu_bar,objective,cond,residual_norm (one row per grid point;
/// infeasible rows carry nan). Throws IoError with path context.
void emit_sweep(const reg::RegProblem& problem, const std::vector<reg::SweepKind>& strategies,
                const std::vector<int>& orders, const std::vector<double>& grid,
                const std::string& out_path, reg::Mode mode = reg::Mode::standard);

/// Log-spaced grid with `steps` points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int steps);

/// Plain text matrix I/O (comma-separated rows, %.17g) for captured Gram
/// matrices.
void save_matrix_csv(const Matrix& m, const std::string& path);
Matrix load_matrix_csv(const std::string& path);

}  // namespace horeg::experiment
