#include "horeg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "horeg/cartpole.hpp"

namespace horeg::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an integer");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a boolean");
}

// One training run, fully determined by (config, run_index).
RunRecord execute_run(const ExperimentConfig& config, int run_index) {
  const std::uint64_t run_seed = config.base_seed + static_cast<std::uint64_t>(run_index);
  cartpole::CartPoleParams params = config.capped
                                        ? cartpole::CartPoleParams::capped()
                                        : cartpole::CartPoleParams::uncapped(config.uncapped_safety_cap);
  cartpole::CartPole env(params, Rng(run_seed).stream(3).seed());

  RunRecord record;
  record.run_index = run_index;
  record.rewards.reserve(static_cast<std::size_t>(config.episodes));
  record.steps.reserve(static_cast<std::size_t>(config.episodes));
  const auto started = std::chrono::steady_clock::now();

  auto drive = [&](auto& agent) {
    for (int ep = 0; ep < config.episodes; ++ep) {
      const agent::EpisodeRecord episode = agent::run_episode(agent, env);
      record.rewards.push_back(episode.total_reward);
      record.steps.push_back(episode.steps);
      if (episode.aborted) {
        record.aborted = true;
        record.diagnostic = episode.diagnostic;
        break;
      }
    }
  };

  if (config.method == Method::grad_q) {
    agent::GradQAgent agent(config.agent, run_seed);
    drive(agent);
  } else {
    agent::EqlmAgent agent(config.agent, run_seed);
    drive(agent);
    if (config.dump_gram && agent.train_state()) {
      const elm::TrainState& ts = *agent.train_state();
      save_matrix_csv(ts.info - ts.reg,
                      (fs::path(config.output_dir) /
                       ("run_" + std::to_string(run_index) + "_gram.csv"))
                          .string());
    }
  }

  record.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

void write_run_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps \n on every platform
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "episode,reward,steps\n";
  for (std::size_t i = 0; i < record.rewards.size(); ++i) {
    out << i << ',' << fmt_double(record.rewards[i]) << ',' << record.steps[i] << '\n';
  }
  if (!out) throw IoError("failed while writing: " + path);
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::hr: return "hr";
    case Method::eqlm: return "eqlm";
    case Method::grad_q: return "gradq";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "hr") return Method::hr;
  if (name == "eqlm") return Method::eqlm;
  if (name == "gradq") return Method::grad_q;
  throw ConfigError("unknown method '" + name + "' (expected hr, eqlm, or gradq)");
}

ExperimentConfig ExperimentConfig::defaults_for(Method method) {
  ExperimentConfig config;
  config.method = method;
  switch (method) {
    case Method::hr:
      config.agent = agent::AgentConfig::elm_defaults();
      config.agent.reg_order = 1;
      break;
    case Method::eqlm:
      config.agent = agent::AgentConfig::elm_defaults();
      config.agent.reg_order = 0;
      break;
    case Method::grad_q:
      config.agent = agent::AgentConfig::gradient_defaults();
      break;
  }
  return config;
}

SummaryStats summarize_records(const std::vector<RunRecord>& records, int episodes,
                               std::uint64_t seed) {
  SummaryStats stats;
  stats.total_runs = static_cast<int>(records.size());

  std::vector<const RunRecord*> completed;
  for (const RunRecord& r : records) {
    if (!r.aborted && static_cast<int>(r.rewards.size()) == episodes) completed.push_back(&r);
  }
  stats.completed_runs = static_cast<int>(completed.size());
  stats.partial = stats.completed_runs < stats.total_runs;
  if (completed.empty()) return stats;

  for (const RunRecord* r : completed) {
    const std::size_t n = r->rewards.size();
    const std::size_t tail = std::min<std::size_t>(50, n);
    std::vector<double> last(r->rewards.end() - static_cast<long>(tail), r->rewards.end());
    stats.final50_per_run.push_back(metrics::mean(last));
    stats.auc_per_run.push_back(metrics::auc(r->rewards));
  }

  stats.mean_final50 = metrics::mean(stats.final50_per_run);
  stats.auc_mean = metrics::mean(stats.auc_per_run);
  if (completed.size() >= 2) {
    const Rng root(seed);
    stats.std_final50 = metrics::sample_std(stats.final50_per_run);
    stats.auc_std = metrics::sample_std(stats.auc_per_run);
    stats.mean_final50_ci =
        metrics::bootstrap_ci95_mean(stats.final50_per_run, root.stream(101).seed());
    stats.std_final50_ci = metrics::bootstrap_ci95(
        stats.final50_per_run, [](const std::vector<double>& v) { return metrics::sample_std(v); },
        root.stream(102).seed());
    stats.auc_mean_ci = metrics::bootstrap_ci95_mean(stats.auc_per_run, root.stream(103).seed());
    stats.auc_std_ci = metrics::bootstrap_ci95(
        stats.auc_per_run, [](const std::vector<double>& v) { return metrics::sample_std(v); },
        root.stream(104).seed());
  }

  std::vector<double> mean_curve(static_cast<std::size_t>(episodes), 0.0);
  for (const RunRecord* r : completed) {
    for (std::size_t i = 0; i < mean_curve.size(); ++i) mean_curve[i] += r->rewards[i];
  }
  for (double& v : mean_curve) v /= static_cast<double>(completed.size());
  stats.mean_curve_auc = metrics::auc(mean_curve);
  return stats;
}

std::pair<std::vector<RunRecord>, SummaryStats> run_experiment(const ExperimentConfig& config) {
  if (config.runs < 1 || config.episodes < 1) {
    throw ConfigError("runs and episodes must both be >= 1");
  }
  config.agent.validate();
  if (config.output_dir.empty()) throw ConfigError("output_dir must be set");
  fs::create_directories(config.output_dir);

  std::vector<RunRecord> records(static_cast<std::size_t>(config.runs));
  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, config.runs));

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= config.runs || failed.load()) break;
      try {
        records[static_cast<std::size_t>(r)] = execute_run(config, r);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        failure = e.what();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (failed.load()) throw Error("experiment failed: " + failure);

  for (const RunRecord& record : records) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03d.csv", record.run_index);
    write_run_csv(record, (fs::path(config.output_dir) / name).string());
    std::cerr << "run " << record.run_index << ": episodes=" << record.rewards.size()
              << (record.aborted ? " ABORTED " + record.diagnostic : "")
              << " wall=" << record.wall_time_s << "s\n";
  }

  SummaryStats stats = summarize_records(records, config.episodes, config.base_seed);
  std::ofstream out((fs::path(config.output_dir) / "summary.json").string(), std::ios::binary);
  if (!out) throw IoError("cannot write summary.json under " + config.output_dir);
  out << summary_to_json(config, stats) << '\n';
  return {std::move(records), std::move(stats)};
}

std::vector<RunRecord> load_run_records(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run_", 0) == 0 && name.size() > 8 &&
        name.compare(name.size() - 4, 4, ".csv") == 0 &&
        name.find("_gram") == std::string::npos) {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no run_###.csv files under " + dir);

  std::vector<RunRecord> records;
  int index = 0;
  for (const std::string& file : files) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "episode,reward,steps") {
      throw IoError("unexpected header in " + file);
    }
    RunRecord record;
    record.run_index = index++;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string episode, reward, steps;
      if (!std::getline(row, episode, ',') || !std::getline(row, reward, ',') ||
          !std::getline(row, steps, ',')) {
        throw IoError("bad row in " + file + ": " + line);
      }
      record.rewards.push_back(parse_double("reward", trim(reward)));
      record.steps.push_back(parse_long("steps", trim(steps)));
    }
    records.push_back(std::move(record));
  }
  return records;
}

SummaryStats summarize_directory(const std::string& dir, std::uint64_t seed) {
  const std::vector<RunRecord> records = load_run_records(dir);
  const int episodes = records.empty() ? 0 : static_cast<int>(records.front().rewards.size());
  return summarize_records(records, episodes, seed);
}

std::string summary_to_json(const ExperimentConfig& config, const SummaryStats& stats) {
  json j;
  j["schema"] = "horeg-summary-v1";
  j["method"] = method_name(config.method);
  j["env"] = config.capped ? "capped" : "uncapped";
  j["runs"] = config.runs;
  j["episodes"] = config.episodes;
  j["base_seed"] = config.base_seed;
  j["completed_runs"] = stats.completed_runs;
  j["partial"] = stats.partial;
  j["final50"] = {
      {"mean", stats.mean_final50},
      {"std", stats.std_final50},
      {"mean_ci95", {stats.mean_final50_ci.lo, stats.mean_final50_ci.hi}},
      {"std_ci95", {stats.std_final50_ci.lo, stats.std_final50_ci.hi}},
      {"per_run", stats.final50_per_run},
  };
  j["auc"] = {
      {"mean", stats.auc_mean},
      {"std", stats.auc_std},
      {"mean_ci95", {stats.auc_mean_ci.lo, stats.auc_mean_ci.hi}},
      {"std_ci95", {stats.auc_std_ci.lo, stats.auc_std_ci.hi}},
      {"per_run", stats.auc_per_run},
      {"mean_curve", stats.mean_curve_auc},
  };
  j["agent"] = {
      {"hidden_nodes", config.agent.hidden_nodes},
      {"regularization", config.agent.regularization},
      {"regularization_is_mu_bar", config.agent.regularization_is_mu_bar},
      {"reg_order", config.agent.reg_order},
      {"eps_initial", config.agent.eps_initial},
      {"eps_final", config.agent.eps_final},
      {"eps_episodes", config.agent.eps_episodes},
      {"discount", config.agent.discount},
      {"minibatch", config.agent.minibatch},
      {"target_update_steps", config.agent.target_update_steps},
      {"heuristic_episodes", config.agent.heuristic_episodes},
      {"memory_window", config.agent.memory_window},
      {"learning_rate", config.agent.learning_rate},
  };
  return j.dump(2);
}

void apply_config_entry(ExperimentConfig& config, const std::string& raw_key,
                        const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key.empty()) throw ConfigError("empty configuration key");

  agent::AgentConfig& a = config.agent;
  if (key == "runs") config.runs = static_cast<int>(parse_long(key, value));
  else if (key == "episodes") config.episodes = static_cast<int>(parse_long(key, value));
  else if (key == "method") config.method = parse_method(value);
  else if (key == "env") {
    if (value == "capped") config.capped = true;
    else if (value == "uncapped") config.capped = false;
    else throw ConfigError("key 'env': expected capped or uncapped, got '" + value + "'");
  } else if (key == "output_dir") config.output_dir = value;
  else if (key == "base_seed" || key == "seed")
    config.base_seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "workers") config.workers = static_cast<int>(parse_long(key, value));
  else if (key == "uncapped_safety_cap") config.uncapped_safety_cap = parse_long(key, value);
  else if (key == "dump_gram") config.dump_gram = parse_bool(key, value);
  else if (key == "hidden_nodes" || key == "Hidden nodes")
    a.hidden_nodes = parse_long(key, value);
  else if (key == "regularization" || key == "Regularization parameter")
    a.regularization = parse_double(key, value);
  else if (key == "regularization_is_mu_bar")
    a.regularization_is_mu_bar = parse_bool(key, value);
  else if (key == "reg_order" || key == "Regularization order")
    a.reg_order = static_cast<int>(parse_long(key, value));
  else if (key == "eps_initial" || key == "Initial exploration probability")
    a.eps_initial = parse_double(key, value);
  else if (key == "eps_final") a.eps_final = parse_double(key, value);
  else if (key == "eps_episodes" || key == "Episodes to decrease exploration probability")
    a.eps_episodes = parse_long(key, value);
  else if (key == "discount" || key == "Discount factor") a.discount = parse_double(key, value);
  else if (key == "minibatch" || key == "Minibatch size") a.minibatch = parse_long(key, value);
  else if (key == "target_update_steps" || key == "Target network update steps")
    a.target_update_steps = parse_long(key, value);
  else if (key == "heuristic_episodes") a.heuristic_episodes = parse_long(key, value);
  else if (key == "memory_window")
    a.memory_window = static_cast<std::size_t>(parse_long(key, value));
  else if (key == "learning_rate" || key == "Learning rate")
    a.learning_rate = parse_double(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto sep = stripped.find('=');
    if (sep == std::string::npos) sep = stripped.find(':');
    if (sep == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_config_entry(config, stripped.substr(0, sep), stripped.substr(sep + 1));
  }
}

reg::RegProblem synthetic_problem(Index dim, Index rank, std::uint64_t seed, double eig_lo,
                                  double eig_hi) {
  if (dim < 1 || rank < 1 || rank > dim) throw ConfigError("need 1 <= rank <= dim");
  Rng rng(seed);
  Matrix gauss(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) gauss(i, j) = rng.gaussian();
  }
  Eigen::HouseholderQR<Matrix> qr(gauss);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < dim; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }

  Vector values = Vector::Zero(dim);
  for (Index i = 0; i < rank; ++i) {
    const double t = rank == 1 ? 0.0
                               : static_cast<double>(i) / static_cast<double>(rank - 1);
    values(i) = eig_hi * std::pow(eig_lo / eig_hi, t);  // log-spaced, descending
  }
  Matrix gram = q * values.asDiagonal() * q.transpose();
  gram = 0.5 * (gram + gram.transpose());

  Matrix cross(dim, 1);
  for (Index i = 0; i < dim; ++i) cross(i, 0) = rng.gaussian();
  return reg::RegProblem(std::move(gram), std::move(cross));
}

void emit_sweep(const reg::RegProblem& problem, const std::vector<reg::SweepKind>& strategies,
                const std::vector<int>& orders, const std::vector<double>& grid,
                const std::string& out_path, reg::Mode mode) {
  const std::vector<reg::SweepRow> rows =
      reg::sweep_objective(problem, strategies, orders, grid, mode);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open sweep output for writing: " + out_path);
  out << "strategy,c,mu_bar,objective,cond,residual_norm\n";
  for (const reg::SweepRow& row : rows) {
    out << row.strategy << ',' << row.order << ',' << fmt_double(row.mu_bar) << ','
        << fmt_double(row.objective) << ',' << fmt_double(row.cond) << ','
        << fmt_double(row.residual_norm) << '\n';
  }
  if (!out) throw IoError("failed while writing sweep: " + out_path);
}

std::vector<double> log_grid(double lo, double hi, int steps) {
  if (!(lo > 0.0) || !(hi > lo) || steps < 2) {
    throw ConfigError("log grid needs 0 < lo < hi and steps >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    grid[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, t);
  }
  return grid;
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << fmt_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing: " + path);
}

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(parse_double("matrix", trim(cell)));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged matrix rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty matrix file: " + path);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace horeg::experiment
