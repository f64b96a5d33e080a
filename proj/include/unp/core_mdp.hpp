#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unp/rng.hpp"

namespace unp {

class UnpSpec;

/// Named real feature vector phi(s). Names are shared between all states of
/// one environment, so copies only bump a reference count.
class FeatureState {
 public:
  using Names = std::shared_ptr<const std::vector<std::string>>;

  FeatureState() = default;
  FeatureState(std::vector<double> values, Names names);

  static Names make_names(std::vector<std::string> names);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<std::string>& names() const { return *names_; }
  const Names& shared_names() const { return names_; }

  /// Value of the dimension called `name`; throws std::out_of_range if absent.
  double at(std::string_view name) const;

  friend bool operator==(const FeatureState& a, const FeatureState& b) {
    if (a.values_ != b.values_) return false;
    if (a.names_ == b.names_) return true;
    return a.names_ && b.names_ && *a.names_ == *b.names_;
  }

 private:
  std::vector<double> values_;
  Names names_;
};

class ActionSpace {
 public:
  static ActionSpace discrete(int count);
  static ActionSpace continuous(double low, double high);

  bool is_discrete() const { return discrete_; }
  int count() const { return count_; }
  double low() const { return low_; }
  double high() const { return high_; }

 private:
  ActionSpace(bool discrete, int count, double low, double high)
      : discrete_(discrete), count_(count), low_(low), high_(high) {}
  bool discrete_;
  int count_;
  double low_;
  double high_;
};

class ActionValue {
 public:
  static ActionValue discrete(int index) { return ActionValue(true, index, 0.0); }
  static ActionValue continuous(double scalar) { return ActionValue(false, 0, scalar); }

  bool is_discrete() const { return discrete_; }
  int index() const;
  double scalar() const;
  /// Index for discrete actions, scalar for continuous ones.
  double as_real() const { return discrete_ ? static_cast<double>(index_) : scalar_; }

  bool valid_in(const ActionSpace& space) const;

  friend bool operator==(const ActionValue&, const ActionValue&) = default;

 private:
  ActionValue(bool discrete, int index, double scalar)
      : discrete_(discrete), index_(index), scalar_(scalar) {}
  bool discrete_;
  int index_;
  double scalar_;
};

std::string to_string(const ActionValue& a);

struct Transition {
  FeatureState state;
  ActionValue action = ActionValue::discrete(0);
  double reward = 0.0;
  FeatureState next_state;
  bool terminal = false;
  bool failure = false;  // failure implies terminal

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct EpisodeLog {
  std::vector<Transition> transitions;
  std::vector<bool> interventions;
  std::vector<bool> unsafe_executed;
  double episode_reward = 0.0;

  std::size_t steps() const { return transitions.size(); }
  std::size_t unsafe_count() const;
  std::size_t intervention_count() const;

  friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

/// Deterministic episodic environment. `observe` is the agent-facing
/// feature vector; `save_state`/`load_state` round-trip the complete
/// internal state (which may hold more dimensions than `observe`).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual ActionSpace action_space() const = 0;
  virtual const UnpSpec& unp_spec() const = 0;
  /// Minimum reward of the reward function (r_min).
  virtual double min_reward() const = 0;
  /// Episode step cap after which the env terminates successfully.
  virtual int step_limit() const = 0;

  virtual FeatureState reset() = 0;
  virtual FeatureState observe() const = 0;
  virtual Transition step(const ActionValue& action) = 0;
  virtual bool terminal() const = 0;

  virtual FeatureState save_state() const = 0;
  virtual void load_state(const FeatureState& full_state) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// State -> action mapping. Learners additionally receive every executed
/// transition through `observe`.
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual ActionValue act(const FeatureState& state, Rng& rng) = 0;
  virtual void observe(const Transition&, Rng&) {}
  /// The filter replaced `proposed`; `executed` is the step that ran instead.
  virtual void observe_blocked(const Transition& /*executed*/, const ActionValue& /*proposed*/,
                               double /*min_reward*/, Rng&) {}
};

struct FilterDecision {
  ActionValue action;
  bool intervened = false;
};

/// Post-posed shield: sees the live env (read-only), the state and the
/// proposed action, and returns the action to execute.
class ActionFilter {
 public:
  virtual ~ActionFilter() = default;
  virtual FilterDecision filter(const Environment& env, const FeatureState& state,
                                const ActionValue& proposed, Rng& rng) = 0;
};

class ConstantPolicy final : public ActionSource {
 public:
  explicit ConstantPolicy(ActionValue action) : action_(action) {}
  ActionValue act(const FeatureState&, Rng&) override { return action_; }

 private:
  ActionValue action_;
};

class RandomPolicy final : public ActionSource {
 public:
  explicit RandomPolicy(ActionSpace space) : space_(space) {}
  ActionValue act(const FeatureState&, Rng& rng) override;

 private:
  ActionSpace space_;
};

ActionValue sample_uniform(const ActionSpace& space, Rng& rng);

/// Runs one episode from the env's current state (the caller resets).
/// `unsafe_executed` is audited against env.unp_spec() whether or not a
/// filter is installed.
EpisodeLog run_episode(Environment& env, ActionSource& actor, ActionFilter* shield,
                       int max_steps, Rng& rng);

double discounted_return(std::span<const double> rewards, double gamma);

}  // namespace unp
