#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unp/agents.hpp"
#include "unp/environments.hpp"
#include "unp/mbs.hpp"
#include "unp/mlp.hpp"

namespace unp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ShieldMode { none, unp, mbs };
std::string to_string(ShieldMode mode);
ShieldMode shield_mode_from_string(const std::string& name);

/// Seeds used for the five-run protocol.
std::vector<std::uint64_t> default_seeds(EnvKind kind);

struct ExperimentConfig {
  EnvKind env = EnvKind::cartpole;
  ShieldMode shield = ShieldMode::unp;
  std::vector<std::uint64_t> seeds;
  int max_episodes = 1;
  Hyperparameters hp;
  std::string output_dir = "out";
  /// Stop every seed once the aggregate curve has converged.
  bool stop_on_convergence = false;
  /// Seeds in parallel (OpenMP). Results are identical either way.
  bool parallel = true;
  int mbs_depth = 3;
  int mbs_branch = 5;
  /// Keep the MBS decision log (memory grows with training steps).
  bool log_mbs_decisions = false;

  /// Throws ConfigError.
  void validate() const;
  static ExperimentConfig for_env(EnvKind kind);
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<double> episode_rewards;
  std::vector<long> unsafe_action_counts;
  std::vector<long> intervention_counts;
  double wall_time = 0.0;  // seconds

  std::size_t episodes() const { return episode_rewards.size(); }
  /// Compares everything except wall_time.
  friend bool operator==(const RunResult& a, const RunResult& b);
};

struct AggregateCurve {
  std::vector<double> mean;
  std::vector<double> std;
  std::size_t size() const { return mean.size(); }
};

/// Per-episode mean and population std over runs, truncated to the shortest.
AggregateCurve aggregate(std::span<const RunResult> results);

/// CartPole 200, LaneKeep 0, FlappyBird 200.
double convergence_threshold(EnvKind kind);
inline constexpr int kConvergenceWindow = 10;

/// First 1-based episode whose trailing `window`-episode mean reaches
/// `threshold`; the window must be full.
std::optional<int> convergence_episode(std::span<const double> curve, double threshold,
                                       int window = kConvergenceWindow);

struct TraceRow {
  FeatureState state;
  ActionValue action;
  bool unsafe = false;
  bool intervened = false;
};

struct EpisodeTrace {
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  double reward = 0.0;
  long unsafe_count() const;
};

/// One greedy episode of `policy` on a fresh env seeded from `seed`'s
/// evaluation stream, through the shield for `mode`.
EpisodeTrace greedy_trace(EnvKind kind, ShieldMode mode, ActionSource& policy, std::uint64_t seed,
                          int mbs_depth = 3, int mbs_branch = 5);

struct ExperimentOutcome {
  ExperimentConfig config;
  std::vector<RunResult> runs;
  /// Greedy post-training trace per seed, same order as runs.
  std::vector<EpisodeTrace> traces;
  std::vector<Mlp> policies;
  /// Per seed; empty unless MBS logging was requested.
  std::vector<std::vector<MbsDecision>> mbs_logs;
  /// MBS: steps where no candidate was accepted, per seed.
  std::vector<std::size_t> mbs_no_safe_option;
  AggregateCurve curve;
  std::optional<int> converged_at;

  /// Index of the run whose trace is published (highest trailing mean).
  std::size_t best_run() const;
};

/// Called after every lockstep episode with the 1-based episode number.
using EpisodeCallback = std::function<void(int episode, const std::vector<RunResult>&)>;

/// Trains every seed in lockstep, one episode at a time. Throws ConfigError,
/// and propagates BackupFailure from any seed.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const EpisodeCallback& on_episode = {});

// ----------------------------------------------------------------- outputs

/// runs.csv, curve.csv, trace_<best seed>.csv, curve.svg, policy_<seed>.mlp.
void emit_outputs(const ExperimentOutcome& outcome, const std::string& output_dir);

void write_runs_csv(const std::string& path, std::span<const RunResult> runs);
std::vector<RunResult> read_runs_csv(const std::string& path);
void write_curve_csv(const std::string& path, const AggregateCurve& curve);
AggregateCurve read_curve_csv(const std::string& path);
void write_trace_csv(const std::string& path, const EpisodeTrace& trace);
void write_curve_svg(const std::string& path, const AggregateCurve& curve, double threshold,
                     const std::string& title);

// ------------------------------------------------------------------ config

/// Flat key=value lines, '#' starts a comment. Throws ConfigError.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Applies one key to `cfg`. Keys: env, shield, seeds, episodes, out,
/// stop_on_convergence, parallel, mbs.depth, mbs.branch, hp.<name>.
/// Throws ConfigError on unknown keys or malformed values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void apply_hyperparameter(Hyperparameters& hp, const std::string& name, const std::string& value);

/// Builds a config from settings: env first (selecting the presets), then
/// everything else in key order.
ExperimentConfig config_from_settings(const std::map<std::string, std::string>& settings);

}  // namespace unp
