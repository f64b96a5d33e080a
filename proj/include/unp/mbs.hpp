#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "unp/core_mdp.hpp"
#include "unp/environments.hpp"

namespace unp {

/// Model-based shielding: look ahead on a copy of the true dynamics.
struct MbsConfig {
  /// Simulated steps per trajectory, counting the proposed action.
  int depth = 3;
  /// Uniform action samples per node on continuous spaces.
  int branch = 5;
  /// S_safe membership, evaluated on the simulated observation.
  std::function<bool(const FeatureState&)> safe;

  void validate() const;
  static MbsConfig for_env(EnvKind kind);
};

/// S_safe for the baseline: CartPole |theta| < 12 deg and |x| < 2.4,
/// LaneKeep |delta| < 1, FlappyBird bird inside the screen.
std::function<bool(const FeatureState&)> mbs_safe_predicate(EnvKind kind);

/// False iff every simulated trajectory that starts with `action` leaves
/// S_safe within cfg.depth steps. A trajectory that terminates without
/// leaving S_safe counts as safe. `model` is cloned, never stepped.
bool mbs_filter(const Environment& model, const ActionValue& action, const MbsConfig& cfg, Rng& rng);

struct MbsDecision {
  FeatureState full_state;  // model.save_state() before the action
  ActionValue action;       // executed action
  bool accepted = false;    // mbs_filter verdict on the executed action
};

class MbsShield final : public ActionFilter {
 public:
  explicit MbsShield(MbsConfig cfg, bool log_decisions = false);

  /// Passes the proposal when accepted; otherwise the first accepted
  /// alternative (fixed enumeration for discrete spaces, sign flip then
  /// `branch` uniform samples for continuous ones). With nothing accepted
  /// the proposal runs unchanged and is counted as no-safe-option.
  FilterDecision filter(const Environment& env, const FeatureState& state,
                        const ActionValue& proposed, Rng& rng) override;

  const MbsConfig& config() const { return cfg_; }
  std::size_t interventions() const { return interventions_; }
  std::size_t queries() const { return queries_; }
  std::size_t no_safe_option() const { return no_safe_option_; }
  const std::vector<MbsDecision>& log() const { return log_; }
  void clear_log() { log_.clear(); }

 private:
  MbsConfig cfg_;
  bool log_decisions_;
  std::size_t interventions_ = 0;
  std::size_t queries_ = 0;
  std::size_t no_safe_option_ = 0;
  std::vector<MbsDecision> log_;
};

FilterDecision mbs_shield_act(MbsShield& shield, ActionSource& policy, const Environment& model,
                              Rng& rng);

}  // namespace unp
