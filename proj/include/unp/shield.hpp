#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "unp/core_mdp.hpp"

namespace unp {

/// Inside the state region `in_danger`, every action satisfying `forbids` is
/// unsafe or non-permissible.
struct DangerRule {
  std::string label;
  std::function<bool(const FeatureState&)> in_danger;
  std::function<bool(const ActionValue&)> forbids;
};

/// A_unp(s) as a union of danger rules. Membership is the complement of the
/// type-2 permissibility predicate.
class UnpSpec {
 public:
  UnpSpec() = default;
  explicit UnpSpec(std::vector<DangerRule> rules) : rules_(std::move(rules)) {}

  bool contains(const FeatureState& state, const ActionValue& action) const;
  bool in_any_danger_region(const FeatureState& state) const;
  const std::vector<DangerRule>& rules() const { return rules_; }

 private:
  std::vector<DangerRule> rules_;
};

inline bool is_unp(const UnpSpec& spec, const FeatureState& state, const ActionValue& action) {
  return spec.contains(state, action);
}

class BackupPolicy {
 public:
  enum class Kind { other_discrete, negate_continuous };

  static BackupPolicy other_discrete() { return BackupPolicy(Kind::other_discrete); }
  static BackupPolicy negate_continuous() { return BackupPolicy(Kind::negate_continuous); }

  Kind kind() const { return kind_; }
  ActionValue operator()(const ActionValue& proposed) const;

 private:
  explicit BackupPolicy(Kind kind) : kind_(kind) {}
  Kind kind_;
};

/// The backup action is itself in A_unp(s); the shield refuses to execute it.
class BackupFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ShieldDecision {
  ActionValue action;
  bool intervened = false;
};

/// Post-posed UNP shield: pass the proposal through unless it is in
/// A_unp(s), in which case the backup policy replaces it.
class Shield final : public ActionFilter {
 public:
  Shield(UnpSpec spec, BackupPolicy backup) : spec_(std::move(spec)), backup_(backup) {}

  /// Decision for one proposal; updates the counters.
  ShieldDecision decide(const FeatureState& state, const ActionValue& proposed);

  FilterDecision filter(const Environment& env, const FeatureState& state,
                        const ActionValue& proposed, Rng& rng) override;

  const UnpSpec& spec() const { return spec_; }
  const BackupPolicy& backup() const { return backup_; }
  std::size_t interventions() const { return interventions_; }
  std::size_t queries() const { return queries_; }
  void reset_counters() { interventions_ = queries_ = 0; }

 private:
  UnpSpec spec_;
  BackupPolicy backup_;
  std::size_t interventions_ = 0;
  std::size_t queries_ = 0;
};

ShieldDecision shield_act(Shield& shield, ActionSource& policy, const FeatureState& state,
                          Rng& rng);

/// interventions / queries; throws std::domain_error when nothing was queried.
double interference_rate(const Shield& shield);

struct AssumptionViolation {
  FeatureState probe;
  Transition transition;
  std::string reason;
};

struct AssumptionReport {
  std::size_t transitions_checked = 0;
  std::size_t failures_seen = 0;
  std::vector<AssumptionViolation> violations;
  bool passed() const { return violations.empty(); }
};

/// Checks the reward-structure premise on every probe: failure transitions
/// carry r_min and terminate, all others carry r > r_min. Each probe is loaded
/// as a full env state and stepped with every discrete action, or with a
/// fixed action grid for continuous spaces.
AssumptionReport validate_assumption1(Environment& env, const std::vector<FeatureState>& probes);

struct BackupSafetyReport {
  std::size_t states_checked = 0;
  std::size_t unp_proposals = 0;
  std::size_t violations = 0;
  bool passed() const { return violations == 0 && unp_proposals > 0; }
};

/// Runs `backup` on every UNP proposal at every state in `states`; each time
/// the backup action is UNP too counts as a violation.
BackupSafetyReport check_backup_safety(const UnpSpec& spec, const BackupPolicy& backup,
                                       const ActionSpace& space,
                                       const std::vector<FeatureState>& states);

}  // namespace unp
