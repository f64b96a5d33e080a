#include "unp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <set>

namespace unp {

std::string to_string(ShieldMode mode) {
  switch (mode) {
    case ShieldMode::none: return "none";
    case ShieldMode::unp: return "unp";
    case ShieldMode::mbs: return "mbs";
  }
  return "?";
}

ShieldMode shield_mode_from_string(const std::string& name) {
  if (name == "none") return ShieldMode::none;
  if (name == "unp") return ShieldMode::unp;
  if (name == "mbs") return ShieldMode::mbs;
  throw ConfigError("unknown shield mode '" + name + "' (expected none, unp or mbs)");
}

std::vector<std::uint64_t> default_seeds(EnvKind kind) {
  if (kind == EnvKind::flappybird) return {1234, 1500, 2222, 3456, 5000};
  return {1234, 2000, 3000, 3456, 4500};
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds: duplicates are not allowed");
  if (max_episodes < 1) throw ConfigError("episodes: must be at least 1");
  if (mbs_depth < 1 || mbs_branch < 1) throw ConfigError("mbs: depth and branch must be at least 1");
  if (output_dir.empty()) throw ConfigError("out: empty output directory");
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (env == EnvKind::lanekeep && !hp.actor_lr) throw ConfigError("lanekeep requires hp.actor_lr");
}

ExperimentConfig ExperimentConfig::for_env(EnvKind kind) {
  ExperimentConfig cfg;
  cfg.env = kind;
  cfg.seeds = default_seeds(kind);
  cfg.hp = Hyperparameters::for_env(kind);
  return cfg;
}

bool operator==(const RunResult& a, const RunResult& b) {
  return a.seed == b.seed && a.episode_rewards == b.episode_rewards &&
         a.unsafe_action_counts == b.unsafe_action_counts &&
         a.intervention_counts == b.intervention_counts;
}

AggregateCurve aggregate(std::span<const RunResult> results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no runs");
  std::size_t len = results.front().episodes();
  for (const auto& r : results) len = std::min(len, r.episodes());
  AggregateCurve c;
  c.mean.resize(len);
  c.std.resize(len);
  const double n = static_cast<double>(results.size());
  for (std::size_t e = 0; e < len; ++e) {
    double sum = 0.0;
    for (const auto& r : results) sum += r.episode_rewards[e];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : results) sq += (r.episode_rewards[e] - mean) * (r.episode_rewards[e] - mean);
    c.mean[e] = mean;
    c.std[e] = std::sqrt(sq / n);
  }
  return c;
}

double convergence_threshold(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole: return 200.0;
    case EnvKind::lanekeep: return 0.0;
    case EnvKind::flappybird: return 200.0;
  }
  return 0.0;
}

std::optional<int> convergence_episode(std::span<const double> curve, double threshold, int window) {
  if (window < 1) throw std::invalid_argument("convergence_episode: window must be positive");
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t end = w; end <= curve.size(); ++end) {
    const double m = std::accumulate(curve.begin() + static_cast<std::ptrdiff_t>(end - w),
                                     curve.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
                     static_cast<double>(w);
    if (m >= threshold) return static_cast<int>(end);
  }
  return std::nullopt;
}

long EpisodeTrace::unsafe_count() const {
  return std::count_if(rows.begin(), rows.end(), [](const TraceRow& r) { return r.unsafe; });
}

namespace {

std::unique_ptr<ActionFilter> make_filter(EnvKind kind, ShieldMode mode, const Environment& env,
                                          int depth, int branch, bool log) {
  switch (mode) {
    case ShieldMode::none: return nullptr;
    case ShieldMode::unp: return std::make_unique<Shield>(env.unp_spec(), backup_for(kind));
    case ShieldMode::mbs: {
      MbsConfig m = MbsConfig::for_env(kind);
      m.depth = depth;
      m.branch = branch;
      return std::make_unique<MbsShield>(std::move(m), log);
    }
  }
  return nullptr;
}

struct SeedRun {
  std::uint64_t seed;
  std::unique_ptr<Environment> env;
  std::unique_ptr<Learner> learner;
  std::unique_ptr<ActionFilter> filter;
  Rng explore;
  RunResult result;

  void episode() {
    const auto t0 = std::chrono::steady_clock::now();
    env->reset();
    const EpisodeLog log = run_episode(*env, *learner, filter.get(), env->step_limit(), explore);
    if (!learner->parameters_finite())
      throw std::runtime_error("seed " + std::to_string(seed) + ": network parameters diverged");
    result.episode_rewards.push_back(log.episode_reward);
    result.unsafe_action_counts.push_back(static_cast<long>(log.unsafe_count()));
    result.intervention_counts.push_back(static_cast<long>(log.intervention_count()));
    result.wall_time += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Runs body(i) for every index, optionally across OpenMP threads, and
// rethrows the first exception by index afterwards.
template <typename F>
void for_each_seed(std::size_t n, bool parallel, F&& body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

EpisodeTrace greedy_trace(EnvKind kind, ShieldMode mode, ActionSource& policy, std::uint64_t seed,
                          int mbs_depth, int mbs_branch) {
  auto env = make_environment(kind, derive_seed(seed, Stream::evaluation));
  Rng rng = make_rng(seed, Stream::evaluation);
  auto filter = make_filter(kind, mode, *env, mbs_depth, mbs_branch, false);
  env->reset();
  const EpisodeLog log = run_episode(*env, policy, filter.get(), env->step_limit(), rng);
  EpisodeTrace trace;
  trace.seed = seed;
  trace.reward = log.episode_reward;
  for (std::size_t i = 0; i < log.steps(); ++i)
    trace.rows.push_back({log.transitions[i].state, log.transitions[i].action, log.unsafe_executed[i],
                          log.interventions[i]});
  return trace;
}

std::size_t ExperimentOutcome::best_run() const {
  if (runs.empty()) throw std::logic_error("best_run: no runs");
  auto tail_mean = [](const RunResult& r) {
    const std::size_t k = std::min<std::size_t>(r.episodes(), kConvergenceWindow);
    if (k == 0) return -std::numeric_limits<double>::infinity();
    return std::accumulate(r.episode_rewards.end() - static_cast<std::ptrdiff_t>(k),
                           r.episode_rewards.end(), 0.0) / static_cast<double>(k);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (tail_mean(runs[i]) > tail_mean(runs[best])) best = i;
  return best;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const EpisodeCallback& on_episode) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  std::vector<SeedRun> seeds;
  seeds.reserve(n);
  for (std::uint64_t seed : cfg.seeds) {
    SeedRun s{seed, make_environment(cfg.env, derive_seed(seed, Stream::environment)), nullptr,
              nullptr, make_rng(seed, Stream::exploration), {}};
    Rng init = make_rng(seed, Stream::agent_init);
    s.learner = make_learner(cfg.env, cfg.hp, init);
    s.filter = make_filter(cfg.env, cfg.shield, *s.env, cfg.mbs_depth, cfg.mbs_branch,
                           cfg.log_mbs_decisions);
    s.result.seed = seed;
    seeds.push_back(std::move(s));
  }

  ExperimentOutcome out;
  out.config = cfg;
  const double threshold = convergence_threshold(cfg.env);
  std::vector<double> mean_curve;
  for (int episode = 1; episode <= cfg.max_episodes; ++episode) {
    for_each_seed(n, cfg.parallel, [&](std::size_t i) { seeds[i].episode(); });

    double sum = 0.0;
    for (const auto& s : seeds) sum += s.result.episode_rewards.back();
    mean_curve.push_back(sum / static_cast<double>(n));
    if (on_episode) {
      std::vector<RunResult> snapshot;
      for (const auto& s : seeds) snapshot.push_back(s.result);
      on_episode(episode, snapshot);
    }
    if (cfg.stop_on_convergence && convergence_episode(mean_curve, threshold)) break;
  }

  out.traces.resize(n);
  for_each_seed(n, cfg.parallel, [&](std::size_t i) {
    seeds[i].learner->set_training(false);
    out.traces[i] = greedy_trace(cfg.env, cfg.shield, *seeds[i].learner, seeds[i].seed, cfg.mbs_depth,
                                 cfg.mbs_branch);
  });

  for (auto& s : seeds) {
    out.runs.push_back(s.result);
    out.policies.push_back(s.learner->policy_network());
    if (auto* m = dynamic_cast<MbsShield*>(s.filter.get())) {
      out.mbs_logs.push_back(m->log());
      out.mbs_no_safe_option.push_back(m->no_safe_option());
    }
  }
  out.curve = aggregate(out.runs);
  out.converged_at = convergence_episode(out.curve.mean, threshold);
  return out;
}

}  // namespace unp
