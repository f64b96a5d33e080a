// unp_cli: train / trace / validate / gradcheck front end.
#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>

#include "unp/agents.hpp"
#include "unp/environments.hpp"
#include "unp/experiment.hpp"
#include "unp/gradcheck.hpp"
#include "unp/shield.hpp"

namespace {

enum Exit { ok = 0, config_error = 1, run_failure = 2, validation_failure = 3 };

// --hp.<name>=<value> or --hp.<name> <value> from CLI11's leftovers.
void collect_hp_overrides(const std::vector<std::string>& extras, std::map<std::string, std::string>& out) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--hp.", 0) != 0) throw unp::ConfigError("unrecognised argument '" + arg + "'");
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      out[arg.substr(2, eq - 2)] = arg.substr(eq + 1);
    } else {
      if (i + 1 >= extras.size()) throw unp::ConfigError(arg + ": missing value");
      out[arg.substr(2)] = extras[++i];
    }
  }
}

int cmd_train(const std::map<std::string, std::string>& settings, bool quiet, int every) {
  unp::ExperimentConfig cfg = unp::config_from_settings(settings);
  cfg.validate();
  const double threshold = unp::convergence_threshold(cfg.env);
  std::vector<double> mean_curve;
  auto progress = [&](int episode, const std::vector<unp::RunResult>& runs) {
    double sum = 0.0;
    long unsafe = 0;
    for (const auto& r : runs) {
      sum += r.episode_rewards.back();
      unsafe += r.unsafe_action_counts.back();
    }
    mean_curve.push_back(sum / static_cast<double>(runs.size()));
    if (!quiet && (episode % every == 0 || episode == cfg.max_episodes))
      std::cerr << "episode " << episode << "  mean reward " << mean_curve.back()
                << "  unsafe " << unsafe << '\n';
  };
  const unp::ExperimentOutcome out = unp::run_experiment(cfg, progress);
  unp::emit_outputs(out, cfg.output_dir);

  long unsafe = 0, interventions = 0;
  for (const auto& r : out.runs)
    for (std::size_t e = 0; e < r.episodes(); ++e) {
      unsafe += r.unsafe_action_counts[e];
      interventions += r.intervention_counts[e];
    }
  std::cout << "env " << unp::to_string(cfg.env) << "  shield " << unp::to_string(cfg.shield)
            << "  seeds " << cfg.seeds.size() << "  episodes " << out.curve.size() << '\n'
            << "unsafe actions " << unsafe << "  interventions " << interventions << '\n'
            << "converged at "
            << (out.converged_at ? std::to_string(*out.converged_at) : std::string("not reached"))
            << " (threshold " << threshold << ")\n"
            << "outputs in " << cfg.output_dir << '\n';
  return ok;
}

int cmd_trace(const std::string& env_name, const std::string& shield, const std::string& policy_path,
              std::uint64_t seed, const std::string& out_dir) {
  const unp::EnvKind kind = unp::env_kind_from_string(env_name);
  const unp::ShieldMode mode = unp::shield_mode_from_string(shield);
  unp::Mlp net;
  try {
    net = unp::load_mlp_file(policy_path);
  } catch (const std::exception& e) {
    throw unp::ConfigError(e.what());
  }
  const bool discrete = kind != unp::EnvKind::lanekeep;
  unp::SnapshotPolicy policy(std::move(net), unp::input_scaling(kind), discrete);
  const unp::EpisodeTrace trace = unp::greedy_trace(kind, mode, policy, seed);
  std::filesystem::create_directories(out_dir);
  const std::string path = (std::filesystem::path(out_dir) / ("trace_" + std::to_string(seed) + ".csv")).string();
  unp::write_trace_csv(path, trace);
  std::cout << "steps " << trace.rows.size() << "  reward " << trace.reward << "  unsafe "
            << trace.unsafe_count() << '\n'
            << "wrote " << path << '\n';
  return ok;
}

int cmd_validate(const std::vector<std::string>& envs) {
  bool all = true;
  for (const auto& name : envs) {
    const unp::EnvKind kind = unp::env_kind_from_string(name);
    auto env = unp::make_environment(kind, 0);
    const auto a1 = unp::validate_assumption1(*env, unp::assumption_probe_states(kind));
    const auto grid = unp::backup_check_grid(kind);
    const auto bs = unp::check_backup_safety(env->unp_spec(), unp::backup_for(kind), env->action_space(), grid);
    std::cout << name << ": assumption1 " << (a1.passed() ? "pass" : "FAIL") << " ("
              << a1.transitions_checked << " transitions, " << a1.failures_seen << " failures, "
              << a1.violations.size() << " violations)\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(a1.violations.size(), 5); ++i)
      std::cout << "  " << a1.violations[i].reason << '\n';
    std::cout << name << ": backup safety " << (bs.passed() ? "pass" : "FAIL") << " (" << bs.states_checked
              << " states, " << bs.unp_proposals << " UNP proposals, " << bs.violations << " violations)\n";
    all = all && a1.passed() && bs.passed();
  }
  std::cout << (all ? "pass" : "fail") << '\n';
  return all ? ok : validation_failure;
}

int cmd_gradcheck(std::uint64_t seed, int probes) {
  bool all = true;
  for (const auto& c : unp::gradcheck_suite(seed, probes)) {
    std::cout << std::left << std::setw(20) << c.name << " max rel err " << std::scientific
              << std::setprecision(3) << c.result.max_relative_error << " (tol " << c.tolerance << ", "
              << std::defaultfloat << c.result.probes << " probes, " << c.result.kinks_skipped
              << " kinks skipped) " << (c.passed() ? "pass" : "FAIL") << '\n';
    all = all && c.passed();
  }
  return all ? ok : validation_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UNP shielding experiments"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train agents over seeds and write outputs");
  train->allow_extras();
  std::string env, shield, seeds, out, config;
  int episodes = 0;
  bool stop = false, serial = false, quiet = false;
  int every = 10;
  train->add_option("--env", env, "cartpole | lanekeep | flappybird");
  train->add_option("--shield", shield, "none | unp | mbs");
  train->add_option("--seeds", seeds, "comma-separated seeds (default: the five protocol seeds)");
  train->add_option("--episodes", episodes, "episodes per seed");
  train->add_option("--out", out, "output directory");
  train->add_option("--config", config, "key=value config file");
  train->add_flag("--stop-on-convergence", stop, "stop once the mean curve converges");
  train->add_flag("--serial", serial, "run seeds one after another");
  train->add_flag("--quiet", quiet, "no progress output");
  train->add_option("--progress-every", every, "episodes between progress lines")
      ->check(CLI::PositiveNumber);

  auto* trace = app.add_subcommand("trace", "replay a policy snapshot for one greedy episode");
  std::string trace_env = "cartpole", trace_shield = "unp", policy, trace_out = ".";
  std::uint64_t trace_seed = 1234;
  trace->add_option("--env", trace_env)->required();
  trace->add_option("--policy", policy, "policy_<seed>.mlp snapshot")->required();
  trace->add_option("--shield", trace_shield);
  trace->add_option("--seed", trace_seed);
  trace->add_option("--out", trace_out, "output directory");

  auto* validate = app.add_subcommand("validate", "reward-structure and backup-safety checks");
  std::vector<std::string> validate_envs{"cartpole", "lanekeep", "flappybird"};
  validate->add_option("--env", validate_envs, "environments to check (default: all)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::uint64_t gc_seed = 1234;
  int gc_probes = 100;
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--probes", gc_probes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config_error;
  }

  try {
    if (train->parsed()) {
      std::map<std::string, std::string> settings;
      if (!config.empty()) settings = unp::read_config_file(config);
      if (train->count("--env")) settings["env"] = env;
      if (train->count("--shield")) settings["shield"] = shield;
      if (train->count("--seeds")) settings["seeds"] = seeds;
      if (train->count("--episodes")) settings["episodes"] = std::to_string(episodes);
      if (train->count("--out")) settings["out"] = out;
      if (stop) settings["stop_on_convergence"] = "true";
      if (serial) settings["parallel"] = "false";
      collect_hp_overrides(train->remaining(), settings);
      return cmd_train(settings, quiet, every);
    }
    if (trace->parsed()) return cmd_trace(trace_env, trace_shield, policy, trace_seed, trace_out);
    if (validate->parsed()) return cmd_validate(validate_envs);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_probes);
  } catch (const unp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const unp::BackupFailure& e) {
    std::cerr << "backup failure: " << e.what() << '\n';
    return run_failure;
  } catch (const std::exception& e) {
    std::cerr << "run failure: " << e.what() << '\n';
    return run_failure;
  }
  return ok;
}
