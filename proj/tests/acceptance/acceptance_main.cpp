// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/bellman_batch.hpp"
#include "oracles/cartpole_oracle.hpp"
#include "oracles/mutated_cartpole.hpp"
#include "unp/environments.hpp"
#include "unp/experiment.hpp"
#include "unp/gradcheck.hpp"
#include "unp/shield.hpp"

#ifndef UNP_CONFIG_DIR
#define UNP_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace unp;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt_episode(const std::optional<int>& e) {
  return e ? std::to_string(*e) : std::string("never");
}

std::string config_dir = UNP_CONFIG_DIR;
fs::path work_dir;

ExperimentConfig preset(EnvKind kind, ShieldMode mode, int episodes, const std::string& tag) {
  auto settings = read_config_file((fs::path(config_dir) / (to_string(kind) + ".cfg")).string());
  settings["shield"] = to_string(mode);
  settings["episodes"] = std::to_string(episodes);
  settings["out"] = (work_dir / tag).string();
  ExperimentConfig cfg = config_from_settings(settings);
  cfg.validate();
  return cfg;
}

ExperimentOutcome run_logged(const ExperimentConfig& cfg, const std::string& tag) {
  const auto t0 = std::chrono::steady_clock::now();
  auto progress = [&](int episode, const std::vector<RunResult>& runs) {
    if (episode % 25 != 0) return;
    double sum = 0.0;
    for (const auto& r : runs) sum += r.episode_rewards.back();
    std::cerr << "  [" << tag << "] episode " << episode << " mean " << sum / runs.size() << '\n';
  };
  ExperimentOutcome out = run_experiment(cfg, progress);
  emit_outputs(out, cfg.output_dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  [" << tag << "] " << out.curve.size() << " episodes, converged at "
            << fmt_episode(out.converged_at) << ", " << secs << " s\n";
  return out;
}

// ------------------------------------------------------------ orderings

struct Ordering {
  std::optional<ExperimentOutcome> unp;
  std::optional<int> none_converged;
  int none_episodes = 0;
  std::string error;
};

std::map<EnvKind, Ordering> orderings;

// UNP runs to `cap` and stops at convergence; unshielded runs only as long
// as it takes to decide the ordering.
Ordering& ordering(EnvKind kind, int cap) {
  auto it = orderings.find(kind);
  if (it != orderings.end()) return it->second;
  Ordering& o = orderings[kind];
  const std::string name = to_string(kind);
  try {
    ExperimentConfig cu = preset(kind, ShieldMode::unp, cap, name + "_unp");
    cu.stop_on_convergence = true;
    o.unp = run_logged(cu, name + " unp");
    if (o.unp->converged_at) {
      ExperimentConfig cn = preset(kind, ShieldMode::none, *o.unp->converged_at, name + "_none");
      cn.stop_on_convergence = true;
      const ExperimentOutcome none = run_logged(cn, name + " none");
      o.none_converged = none.converged_at;
      o.none_episodes = static_cast<int>(none.curve.size());
    }
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

Verdict ordering_verdict(EnvKind kind, int cap, std::optional<int> unp_limit) {
  const Ordering& o = ordering(kind, cap);
  if (!o.error.empty()) return {false, "run failed: " + o.error};
  const auto& u = o.unp->converged_at;
  std::ostringstream d;
  d << "unp converged at " << fmt_episode(u) << " (cap " << cap;
  if (unp_limit) d << ", limit " << *unp_limit;
  d << ")";
  if (!u) return {false, d.str() + "; ordering undecided"};
  d << ", unshielded " << (o.none_converged ? "converged at " + std::to_string(*o.none_converged)
                                            : "not converged after " + std::to_string(o.none_episodes));
  const bool within = !unp_limit || *u <= *unp_limit;
  const bool before = !o.none_converged || *u < *o.none_converged;
  return {within && before, d.str()};
}

// ------------------------------------------------------------- criteria

Verdict safety() {
  long unsafe = 0, steps_checked = 0;
  std::ostringstream d;
  for (EnvKind kind : {EnvKind::cartpole, EnvKind::lanekeep, EnvKind::flappybird}) {
    const auto it = orderings.find(kind);
    if (it == orderings.end() || !it->second.unp) {
      d << to_string(kind) << " unp runs missing; ";
      return {false, d.str()};
    }
    long env_unsafe = 0;
    for (const auto& r : it->second.unp->runs)
      for (long u : r.unsafe_action_counts) env_unsafe += u;
    for (const auto& t : it->second.unp->traces) {
      env_unsafe += t.unsafe_count();
      steps_checked += static_cast<long>(t.rows.size());
    }
    long interventions = 0;
    for (const auto& r : it->second.unp->runs)
      for (long v : r.intervention_counts) interventions += v;
    d << to_string(kind) << " unsafe " << env_unsafe << " interventions " << interventions << "; ";
    unsafe += env_unsafe;
  }
  d << "trace steps " << steps_checked;
  return {unsafe == 0, d.str()};
}

Verdict backup_grid() {
  std::ostringstream d;
  bool pass = true;
  for (EnvKind kind : {EnvKind::cartpole, EnvKind::lanekeep, EnvKind::flappybird}) {
    auto env = make_environment(kind, 0);
    const auto grid = backup_check_grid(kind);
    const auto r = check_backup_safety(env->unp_spec(), backup_for(kind), env->action_space(), grid);
    const bool ok = r.passed() && r.states_checked >= 10000;
    pass = pass && ok;
    d << to_string(kind) << " " << r.states_checked << " states, " << r.unp_proposals << " unp proposals, "
      << r.violations << " violations; ";
  }
  return {pass, d.str()};
}

Verdict mbs_blind_spot() {
  ExperimentConfig cfg = preset(EnvKind::cartpole, ShieldMode::mbs, 20, "cartpole_mbs");
  cfg.mbs_depth = 3;
  cfg.log_mbs_decisions = true;
  const ExperimentOutcome out = run_logged(cfg, "cartpole mbs");
  std::size_t accepted = 0, doomed = 0;
  std::string example;
  for (std::size_t k = 0; k < out.mbs_logs.size(); ++k)
    for (const MbsDecision& dec : out.mbs_logs[k]) {
      if (!dec.accepted) continue;
      ++accepted;
      const FeatureState& s = dec.full_state;
      const oracle::Pole p = oracle::from_library(s[0], s[1], s[2], s[3]);
      const bool right = dec.action.index() == CartPole::push_right;
      if (!oracle::doomed_after(p, right, 10)) continue;
      if (doomed++ == 0) {
        std::ostringstream e;
        e << "seed " << out.runs[k].seed << " theta " << s[2] << " theta_dot " << s[3] << " push "
          << (right ? "right" : "left");
        example = e.str();
      }
    }
  std::ostringstream d;
  d << accepted << " accepted actions checked, " << doomed << " doomed within 10 steps";
  if (doomed) d << " (first: " << example << ")";
  return {doomed > 0, d.str()};
}

Verdict gradients() {
  bool pass = true;
  std::ostringstream d;
  for (const auto& c : gradcheck_suite(1234, 100)) {
    pass = pass && c.passed() && c.result.probes == 100;
    d << c.name << " " << c.result.max_relative_error << "<" << c.tolerance << "; ";
  }
  return {pass, d.str()};
}

Verdict bellman() {
  const Mlp online = oracle::bellman_online();
  const Mlp target = oracle::bellman_target();
  const auto cases = oracle::bellman_cases(0.99);
  std::set<double> rewards;
  int matched = 0, terminal = 0;
  for (const auto& c : cases) {
    rewards.insert(c.item.reward);
    terminal += c.item.terminal;
    if (ddqn_target(c.item, online, target, 0.99) == c.expected) ++matched;
  }
  const bool coverage = rewards == std::set<double>{1.0, 0.0, -1.0, -200.0} && terminal > 0 &&
                        terminal < static_cast<int>(cases.size());
  std::ostringstream d;
  d << matched << "/" << cases.size() << " exact, " << terminal << " terminal";
  return {coverage && matched == static_cast<int>(cases.size()), d.str()};
}

Verdict assumption1() {
  bool pass = true;
  std::ostringstream d;
  for (EnvKind kind : {EnvKind::cartpole, EnvKind::lanekeep, EnvKind::flappybird}) {
    auto env = make_environment(kind, 0);
    const auto r = validate_assumption1(*env, assumption_probe_states(kind));
    pass = pass && r.passed() && r.failures_seen > 0;
    d << to_string(kind) << " " << (r.passed() ? "ok" : "violated") << " (" << r.transitions_checked
      << " transitions); ";
  }
  oracle::MutatedCartPole mutated;
  const auto m = validate_assumption1(mutated, assumption_probe_states(EnvKind::cartpole));
  pass = pass && !m.passed();
  d << "mutated cartpole " << (m.passed() ? "not caught" : "caught") << " (" << m.violations.size()
    << " violations)";
  return {pass, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Verdict determinism() {
  bool pass = true;
  std::ostringstream d;
  const std::vector<std::pair<EnvKind, int>> cases{
      {EnvKind::cartpole, 30}, {EnvKind::lanekeep, 10}, {EnvKind::flappybird, 30}};
  for (const auto& [kind, episodes] : cases) {
    std::string bytes[2];
    for (int rep = 0; rep < 2; ++rep) {
      const std::string tag = to_string(kind) + "_repeat" + std::to_string(rep);
      ExperimentConfig cfg = preset(kind, ShieldMode::unp, episodes, tag);
      cfg.parallel = rep == 0;
      emit_outputs(run_experiment(cfg), cfg.output_dir);
      bytes[rep] = slurp(fs::path(cfg.output_dir) / "runs.csv");
    }
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    pass = pass && same;
    d << to_string(kind) << " " << bytes[0].size() << " bytes " << (same ? "identical" : "DIFFER") << "; ";
  }
  return {pass, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string dir = "acceptance_out";
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
  app.add_option("--workdir", dir, "where experiment outputs go");
  app.add_option("--configs", config_dir, "directory holding <env>.cfg presets");
  CLI11_PARSE(app, argc, argv);
  work_dir = dir;
  fs::create_directories(work_dir);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                              : std::set<int>(only.begin(), only.end());
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
  };
  // Cheap checks first; criterion 1 audits the runs made for 3 to 5.
  const std::vector<Criterion> order{
      {2, "backup safety grid", backup_grid},
      {7, "gradient check", gradients},
      {8, "bellman targets", bellman},
      {9, "reward-structure validation", assumption1},
      {10, "determinism", determinism},
      {6, "mbs blind spot", mbs_blind_spot},
      {3, "cartpole ordering", [] { return ordering_verdict(EnvKind::cartpole, 300, 300); }},
      {4, "lanekeep ordering", [] { return ordering_verdict(EnvKind::lanekeep, 100, 100); }},
      {5, "flappybird ordering", [] { return ordering_verdict(EnvKind::flappybird, 2000, std::nullopt); }},
      {1, "safety guarantee", [&] {
         ordering(EnvKind::cartpole, 300);
         ordering(EnvKind::lanekeep, 100);
         ordering(EnvKind::flappybird, 2000);
         return safety();
       }},
  };
  std::map<int, std::pair<std::string, Verdict>> results;
  for (const auto& c : order) {
    if (!selected.count(c.id)) continue;
    std::cerr << "criterion " << c.id << " (" << c.name << ") running\n";
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::cerr << "criterion " << c.id << " " << (v.pass ? "PASS" : "FAIL") << "\n";
    results[c.id] = {c.name, v};
  }
  bool all = true;
  for (const auto& [id, r] : results) {
    std::cout << (r.second.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << r.first << ": "
              << r.second.detail << '\n';
    all = all && r.second.pass;
  }
  return all ? 0 : 1;
}
