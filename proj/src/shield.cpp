#include "unp/shield.hpp"

#include <array>

namespace unp {

bool UnpSpec::contains(const FeatureState& state, const ActionValue& action) const {
  for (const auto& rule : rules_)
    if (rule.in_danger(state) && rule.forbids(action)) return true;
  return false;
}

bool UnpSpec::in_any_danger_region(const FeatureState& state) const {
  for (const auto& rule : rules_)
    if (rule.in_danger(state)) return true;
  return false;
}

ActionValue BackupPolicy::operator()(const ActionValue& proposed) const {
  switch (kind_) {
    case Kind::other_discrete:
      return ActionValue::discrete(1 - proposed.index());
    case Kind::negate_continuous:
      return ActionValue::continuous(-proposed.scalar());
  }
  throw std::logic_error("BackupPolicy: unknown kind");
}

ShieldDecision Shield::decide(const FeatureState& state, const ActionValue& proposed) {
  ++queries_;
  if (!spec_.contains(state, proposed)) return {proposed, false};
  ActionValue replacement = backup_(proposed);
  if (spec_.contains(state, replacement))
    throw BackupFailure("shield: backup action " + to_string(replacement) +
                        " is itself unsafe/non-permissible");
  ++interventions_;
  return {replacement, true};
}

FilterDecision Shield::filter(const Environment&, const FeatureState& state,
                              const ActionValue& proposed, Rng&) {
  auto d = decide(state, proposed);
  return {d.action, d.intervened};
}

ShieldDecision shield_act(Shield& shield, ActionSource& policy, const FeatureState& state,
                          Rng& rng) {
  return shield.decide(state, policy.act(state, rng));
}

double interference_rate(const Shield& shield) {
  if (shield.queries() == 0) throw std::domain_error("interference_rate: shield was never queried");
  return static_cast<double>(shield.interventions()) / static_cast<double>(shield.queries());
}

namespace {

std::vector<ActionValue> probe_actions(const ActionSpace& space) {
  std::vector<ActionValue> actions;
  if (space.is_discrete()) {
    for (int i = 0; i < space.count(); ++i) actions.push_back(ActionValue::discrete(i));
  } else {
    constexpr int kSteps = 20;
    for (int i = 0; i <= kSteps; ++i)
      actions.push_back(ActionValue::continuous(space.low() + (space.high() - space.low()) * i / kSteps));
  }
  return actions;
}

}  // namespace

AssumptionReport validate_assumption1(Environment& env, const std::vector<FeatureState>& probes) {
  AssumptionReport report;
  const double r_min = env.min_reward();
  const auto actions = probe_actions(env.action_space());
  for (const auto& probe : probes) {
    for (const auto& a : actions) {
      env.load_state(probe);
      if (env.terminal()) continue;
      Transition t = env.step(a);
      ++report.transitions_checked;
      if (t.failure) {
        ++report.failures_seen;
        if (t.reward != r_min)
          report.violations.push_back({probe, t, "failure transition reward differs from r_min"});
        if (!t.terminal)
          report.violations.push_back({probe, t, "failure transition does not terminate"});
      } else if (!(t.reward > r_min)) {
        report.violations.push_back({probe, t, "non-failure transition reward is not above r_min"});
      }
    }
  }
  return report;
}

BackupSafetyReport check_backup_safety(const UnpSpec& spec, const BackupPolicy& backup,
                                       const ActionSpace& space,
                                       const std::vector<FeatureState>& states) {
  BackupSafetyReport report;
  const auto actions = probe_actions(space);
  for (const auto& s : states) {
    ++report.states_checked;
    for (const auto& a : actions) {
      if (!spec.contains(s, a)) continue;
      ++report.unp_proposals;
      if (spec.contains(s, backup(a))) ++report.violations;
    }
  }
  return report;
}

}  // namespace unp
