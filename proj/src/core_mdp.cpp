#include "unp/core_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unp/shield.hpp"

namespace unp {

FeatureState::FeatureState(std::vector<double> values, Names names)
    : values_(std::move(values)), names_(std::move(names)) {
  if (!names_ || values_.empty() || values_.size() != names_->size())
    throw std::invalid_argument("FeatureState: values and names must be non-empty and equal length");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw std::invalid_argument("FeatureState: non-finite value in '" + (*names_)[i] + "'");
}

FeatureState::Names FeatureState::make_names(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

double FeatureState::at(std::string_view name) const {
  for (std::size_t i = 0; i < names_->size(); ++i)
    if ((*names_)[i] == name) return values_[i];
  throw std::out_of_range("FeatureState: no dimension named '" + std::string(name) + "'");
}

ActionSpace ActionSpace::discrete(int count) {
  if (count < 2) throw std::invalid_argument("ActionSpace: discrete count must be >= 2");
  return ActionSpace(true, count, 0.0, 0.0);
}

ActionSpace ActionSpace::continuous(double low, double high) {
  if (!(low < high)) throw std::invalid_argument("ActionSpace: continuous range needs low < high");
  return ActionSpace(false, 0, low, high);
}

int ActionValue::index() const {
  if (!discrete_) throw std::logic_error("ActionValue: index() on a continuous action");
  return index_;
}

double ActionValue::scalar() const {
  if (discrete_) throw std::logic_error("ActionValue: scalar() on a discrete action");
  return scalar_;
}

bool ActionValue::valid_in(const ActionSpace& space) const {
  if (discrete_ != space.is_discrete()) return false;
  if (discrete_) return index_ >= 0 && index_ < space.count();
  return std::isfinite(scalar_) && scalar_ >= space.low() && scalar_ <= space.high();
}

std::string to_string(const ActionValue& a) {
  if (a.is_discrete()) return std::to_string(a.index());
  std::ostringstream os;
  os.precision(17);
  os << a.scalar();
  return os.str();
}

std::size_t EpisodeLog::unsafe_count() const {
  return static_cast<std::size_t>(std::count(unsafe_executed.begin(), unsafe_executed.end(), true));
}

std::size_t EpisodeLog::intervention_count() const {
  return static_cast<std::size_t>(std::count(interventions.begin(), interventions.end(), true));
}

ActionValue sample_uniform(const ActionSpace& space, Rng& rng) {
  if (space.is_discrete()) {
    std::uniform_int_distribution<int> pick(0, space.count() - 1);
    return ActionValue::discrete(pick(rng));
  }
  std::uniform_real_distribution<double> pick(space.low(), space.high());
  return ActionValue::continuous(pick(rng));
}

ActionValue RandomPolicy::act(const FeatureState&, Rng& rng) { return sample_uniform(space_, rng); }

EpisodeLog run_episode(Environment& env, ActionSource& actor, ActionFilter* shield, int max_steps,
                       Rng& rng) {
  if (max_steps < 1) throw std::invalid_argument("run_episode: max_steps must be >= 1");
  EpisodeLog log;
  const UnpSpec& spec = env.unp_spec();
  const ActionSpace space = env.action_space();
  FeatureState state = env.observe();
  for (int i = 0; i < max_steps; ++i) {
    ActionValue proposed = actor.act(state, rng);
    if (!proposed.valid_in(space))
      throw std::invalid_argument("run_episode: actor produced an action outside the space: " +
                                  to_string(proposed));
    FilterDecision decision{proposed, false};
    if (shield) decision = shield->filter(env, state, proposed, rng);
    const bool unsafe = spec.contains(state, decision.action);

    Transition t = env.step(decision.action);
    log.episode_reward += t.reward;
    log.interventions.push_back(decision.intervened);
    log.unsafe_executed.push_back(unsafe);
    if (decision.intervened) actor.observe_blocked(t, proposed, env.min_reward(), rng);
    actor.observe(t, rng);
    const bool done = t.terminal;
    state = t.next_state;
    log.transitions.push_back(std::move(t));
    if (done) break;
  }
  return log;
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("discounted_return: gamma must lie in (0, 1]");
  if (rewards.empty()) throw std::invalid_argument("discounted_return: empty reward sequence");
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    total += weight * r;
    weight *= gamma;
  }
  return total;
}

}  // namespace unp
