#include "unp/mbs.hpp"

#include <cmath>
#include <stdexcept>

namespace unp {

void MbsConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("MbsConfig: depth must be at least 1");
  if (branch < 1) throw std::invalid_argument("MbsConfig: branch must be at least 1");
  if (!safe) throw std::invalid_argument("MbsConfig: safe-state predicate missing");
}

MbsConfig MbsConfig::for_env(EnvKind kind) {
  MbsConfig cfg;
  cfg.safe = mbs_safe_predicate(kind);
  return cfg;
}

std::function<bool(const FeatureState&)> mbs_safe_predicate(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole:
      return [p = CartPoleParams{}](const FeatureState& s) {
        return std::abs(s.at("theta")) < p.angle_limit && std::abs(s.at("x")) < p.position_limit;
      };
    case EnvKind::lanekeep:
      return [](const FeatureState& s) { return std::abs(s.at("delta")) < 1.0; };
    case EnvKind::flappybird:
      return [h = FlappyParams{}.screen_height](const FeatureState& s) {
        const double y = s.at("y_bird");
        return y >= 0.0 && y <= h;
      };
  }
  throw std::invalid_argument("mbs_safe_predicate: unknown environment");
}

namespace {

std::vector<ActionValue> expansions(const ActionSpace& space, const MbsConfig& cfg, Rng& rng) {
  std::vector<ActionValue> out;
  if (space.is_discrete()) {
    for (int a = 0; a < space.count(); ++a) out.push_back(ActionValue::discrete(a));
  } else {
    for (int i = 0; i < cfg.branch; ++i) out.push_back(sample_uniform(space, rng));
  }
  return out;
}

// True when some continuation of `env` stays in S_safe for `remaining` steps.
bool survives(const Environment& env, int remaining, const MbsConfig& cfg, Rng& rng) {
  if (remaining == 0) return true;
  for (const ActionValue& a : expansions(env.action_space(), cfg, rng)) {
    auto sim = env.clone();
    const Transition t = sim->step(a);
    if (!cfg.safe(t.next_state)) continue;
    if (t.terminal || survives(*sim, remaining - 1, cfg, rng)) return true;
  }
  return false;
}

}  // namespace

bool mbs_filter(const Environment& model, const ActionValue& action, const MbsConfig& cfg, Rng& rng) {
  cfg.validate();
  if (model.terminal()) return true;
  auto sim = model.clone();
  const Transition t = sim->step(action);
  if (!cfg.safe(t.next_state)) return false;
  return t.terminal || survives(*sim, cfg.depth - 1, cfg, rng);
}

MbsShield::MbsShield(MbsConfig cfg, bool log_decisions)
    : cfg_(std::move(cfg)), log_decisions_(log_decisions) {
  cfg_.validate();
}

FilterDecision MbsShield::filter(const Environment& env, const FeatureState&,
                                 const ActionValue& proposed, Rng& rng) {
  ++queries_;
  FilterDecision d{proposed, false};
  bool accepted = mbs_filter(env, proposed, cfg_, rng);
  if (!accepted) {
    const ActionSpace space = env.action_space();
    std::vector<ActionValue> candidates;
    if (space.is_discrete()) {
      for (int a = 0; a < space.count(); ++a)
        if (a != proposed.index()) candidates.push_back(ActionValue::discrete(a));
    } else {
      candidates.push_back(ActionValue::continuous(-proposed.scalar()));
      for (int i = 0; i < cfg_.branch; ++i) candidates.push_back(sample_uniform(space, rng));
    }
    for (const ActionValue& c : candidates) {
      if (mbs_filter(env, c, cfg_, rng)) {
        d = {c, true};
        accepted = true;
        ++interventions_;
        break;
      }
    }
    if (!accepted) ++no_safe_option_;
  }
  if (log_decisions_) log_.push_back({env.save_state(), d.action, accepted});
  return d;
}

FilterDecision mbs_shield_act(MbsShield& shield, ActionSource& policy, const Environment& model,
                              Rng& rng) {
  const FeatureState s = model.observe();
  return shield.filter(model, s, policy.act(s, rng), rng);
}

}  // namespace unp
