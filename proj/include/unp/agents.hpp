#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "unp/core_mdp.hpp"
#include "unp/critic.hpp"
#include "unp/environments.hpp"
#include "unp/mlp.hpp"

namespace unp {

/// Training cannot start: the replay buffer holds too few transitions.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hyperparameters {
  double critic_lr = 0.0005;
  std::optional<double> actor_lr;
  double target_rate = 0.001;
  double gamma = 0.99;
  int exploration_steps = 2000;
  double exploration_factor = 0.995;
  int batch_size = 128;
  int buffer_capacity = 50000;
  double exploration_floor = 0.01;
  double initial_noise = 1.0;
  int train_interval = 1;
  OptimizerKind optimizer = OptimizerKind::sgd;
  /// Store episode ends that are not failures (step or reward cap) as
  /// non-terminal, so the learner still bootstraps through them.
  bool bootstrap_on_timeout = false;
  /// When a shield replaces a proposal, also store (s, proposal, r_min) as a
  /// failure so the learner sees what the blocked action is worth.
  bool blocked_penalty = false;
  /// DDPG actor output layer drawn from [-3e-3, 3e-3] instead of the fan-in
  /// bound, so tanh starts far from saturation.
  bool small_actor_output = false;

  void validate() const;
  static Hyperparameters for_env(EnvKind kind);
};

/// Bounded FIFO of transitions; the oldest entry is evicted when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// Uniform draws with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
};

/// y = r for terminal transitions, otherwise
/// y = r + gamma * Q_target(s', argmax_a Q_online(s', a)).
double ddqn_target(const Transition& item, const Mlp& online, const Mlp& target, double gamma,
                   const InputScaling* scaling = nullptr);

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

class DdqnAgent {
 public:
  DdqnAgent(Mlp online, Hyperparameters hp, InputScaling scaling);

  static DdqnAgent for_env(EnvKind kind, const Hyperparameters& hp, Rng& init_rng);
  static std::vector<LayerSpec> hidden_layers(EnvKind kind);

  /// Warm-up: uniform random. Afterwards epsilon-greedy on the online net.
  ActionValue select(const FeatureState& state, Rng& rng) const;
  ActionValue greedy(const FeatureState& state) const;
  std::vector<double> q_values(const FeatureState& state) const;

  void remember(const Transition& t) { buffer_.push(t); }
  bool ready_to_train() const;
  /// One SGD step on the batch MSE; returns the loss before the update.
  double train_step(Rng& rng);
  /// epsilon <- max(floor, epsilon * factor).
  void decay_exploration();

  bool in_warmup() const { return step_count_ < hp_.exploration_steps; }
  void count_step() { ++step_count_; }
  long step_count() const { return step_count_; }

  double epsilon() const { return epsilon_; }
  void set_epsilon(double e) { epsilon_ = e; }
  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  Mlp& online() { return online_; }
  Mlp& target() { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const Hyperparameters& hp() const { return hp_; }
  const InputScaling& scaling() const { return scaling_; }
  int action_count() const { return online_.output_dim(); }

 private:
  Mlp online_;
  Mlp target_;
  Hyperparameters hp_;
  InputScaling scaling_;
  double epsilon_ = 1.0;
  ReplayBuffer buffer_;
  Optimizer optimizer_;
  long step_count_ = 0;
};

/// Source of dQ/da for a batch of (state, action) rows: returns an n x 1 matrix.
using ActionGradientFn = std::function<Matrix(const Matrix& states, const Matrix& actions)>;

/// One ascent step on mean_i Q(s_i, actor(s_i)); `states` are already
/// scaled network inputs. Plain SGD unless an optimiser is given.
void actor_ascent_step(Mlp& actor, const Matrix& states, const ActionGradientFn& dq_da,
                       double learning_rate, Optimizer* optimizer = nullptr);

class DdpgAgent {
 public:
  DdpgAgent(Mlp actor, CriticNet critic, Hyperparameters hp, InputScaling scaling);

  static DdpgAgent for_env(EnvKind kind, const Hyperparameters& hp, Rng& init_rng);

  /// clip(mean + noise_scale * standard_normal, -1, 1).
  static double noisy_action(double mean, double noise_scale, double standard_normal);

  /// Warm-up: uniform in [-1, 1]. Afterwards actor output plus Gaussian noise.
  ActionValue select(const FeatureState& state, Rng& rng) const;
  ActionValue greedy(const FeatureState& state) const;
  double actor_output(const FeatureState& state) const;

  void remember(const Transition& t) { buffer_.push(t); }
  bool ready_to_train() const;
  struct TrainStats {
    double critic_loss;
    double actor_objective;
  };
  TrainStats train_step(Rng& rng);
  void decay_exploration();

  bool in_warmup() const { return step_count_ < hp_.exploration_steps; }
  void count_step() { ++step_count_; }
  long step_count() const { return step_count_; }

  double noise_scale() const { return noise_scale_; }
  void set_noise_scale(double s) { noise_scale_ = s; }
  const Mlp& actor() const { return actor_; }
  const CriticNet& critic() const { return critic_; }
  const Mlp& target_actor() const { return target_actor_; }
  const CriticNet& target_critic() const { return target_critic_; }
  Mlp& actor() { return actor_; }
  CriticNet& critic() { return critic_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const Hyperparameters& hp() const { return hp_; }
  const InputScaling& scaling() const { return scaling_; }

 private:
  Mlp actor_;
  CriticNet critic_;
  Mlp target_actor_;
  CriticNet target_critic_;
  Hyperparameters hp_;
  InputScaling scaling_;
  double noise_scale_;
  ReplayBuffer buffer_;
  Optimizer actor_optimizer_;
  CriticNet::Optimizers critic_optimizer_;
  long step_count_ = 0;
};

/// Common surface of the two learners as the harness sees them.
class Learner : public ActionSource {
 public:
  /// Greedy action, no exploration.
  virtual ActionValue greedy(const FeatureState& state) const = 0;
  /// Network saved as the policy snapshot (DDQN online net / DDPG actor).
  virtual const Mlp& policy_network() const = 0;
  virtual bool parameters_finite() const = 0;
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

 protected:
  bool training_ = true;
};

class DdqnLearner final : public Learner {
 public:
  explicit DdqnLearner(DdqnAgent agent) : agent_(std::move(agent)) {}
  ActionValue act(const FeatureState& state, Rng& rng) override;
  void observe(const Transition& t, Rng& rng) override;
  void observe_blocked(const Transition& executed, const ActionValue& proposed, double min_reward,
                       Rng& rng) override;
  ActionValue greedy(const FeatureState& state) const override { return agent_.greedy(state); }
  const Mlp& policy_network() const override { return agent_.online(); }
  bool parameters_finite() const override;
  DdqnAgent& agent() { return agent_; }
  const DdqnAgent& agent() const { return agent_; }

 private:
  DdqnAgent agent_;
};

class DdpgLearner final : public Learner {
 public:
  explicit DdpgLearner(DdpgAgent agent) : agent_(std::move(agent)) {}
  ActionValue act(const FeatureState& state, Rng& rng) override;
  void observe(const Transition& t, Rng& rng) override;
  void observe_blocked(const Transition& executed, const ActionValue& proposed, double min_reward,
                       Rng& rng) override;
  ActionValue greedy(const FeatureState& state) const override { return agent_.greedy(state); }
  const Mlp& policy_network() const override { return agent_.actor(); }
  bool parameters_finite() const override;
  DdpgAgent& agent() { return agent_; }
  const DdpgAgent& agent() const { return agent_; }

 private:
  DdpgAgent agent_;
};

std::unique_ptr<Learner> make_learner(EnvKind kind, const Hyperparameters& hp, Rng& init_rng);

/// Greedy policy backed by a loaded snapshot network.
class SnapshotPolicy final : public ActionSource {
 public:
  SnapshotPolicy(Mlp net, InputScaling scaling, bool discrete)
      : net_(std::move(net)), scaling_(std::move(scaling)), discrete_(discrete) {}
  ActionValue act(const FeatureState& state, Rng& rng) override;

 private:
  Mlp net_;
  InputScaling scaling_;
  bool discrete_;
};

}  // namespace unp
