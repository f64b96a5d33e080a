#pragma once

#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "unp/core_mdp.hpp"
#include "unp/shield.hpp"

namespace unp {

enum class EnvKind { cartpole, lanekeep, flappybird };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& name);

constexpr double degrees(double deg) { return deg * std::numbers::pi / 180.0; }

// ---------------------------------------------------------------- CartPole

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force = 10.0;
  double dt = 0.02;
  double angle_limit = degrees(12.0);
  double position_limit = 2.4;
  int step_limit = 200;
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;      // rad, positive = pole leaning left
  double theta_dot = 0.0;
  friend bool operator==(const CartPoleState&, const CartPoleState&) = default;
};

class CartPole final : public Environment {
 public:
  enum Action : int { push_left = 0, push_right = 1 };

  explicit CartPole(std::uint64_t seed, CartPoleParams params = {});

  /// One explicit Euler step of the cart-pole equations of motion.
  static CartPoleState integrate(const CartPoleState& s, int action, const CartPoleParams& p);
  /// Failure iff |theta| >= angle limit or |x| >= position limit.
  static bool out_of_bounds(const CartPoleState& s, const CartPoleParams& p);

  std::string_view name() const override { return "cartpole"; }
  ActionSpace action_space() const override { return ActionSpace::discrete(2); }
  const UnpSpec& unp_spec() const override;
  double min_reward() const override { return 0.0; }
  int step_limit() const override { return params_.step_limit; }

  FeatureState reset() override;
  FeatureState observe() const override;
  Transition step(const ActionValue& action) override;
  bool terminal() const override { return terminal_; }

  /// (x, x_dot, theta, theta_dot, step)
  FeatureState save_state() const override;
  void load_state(const FeatureState& full) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<CartPole>(*this); }

  const CartPoleState& state() const { return state_; }
  void set_state(const CartPoleState& s, int steps = 0);
  const CartPoleParams& params() const { return params_; }

  static FeatureState::Names observation_names();

 private:
  CartPoleParams params_;
  Rng rng_;
  CartPoleState state_;
  int steps_ = 0;
  bool terminal_ = false;
};

/// push left when theta < -3 deg and theta_dot < 0; push right when
/// theta > 3 deg and theta_dot > 0. With theta positive to the left these
/// are the pushes that move the cart away from the side the pole falls to.
UnpSpec cartpole_unp();
inline BackupPolicy cartpole_backup() { return BackupPolicy::other_discrete(); }

// -------------------------------------------------------------- LaneKeep

struct LaneKeepParams {
  double speed = 20.0;        // m/s
  double half_width = 4.0;    // m
  double steer_gain = 0.5;    // rad/s at |a| = 1
  double dt = 0.05;           // s
  double curvature = 0.01;    // 1/m
  int segment_steps = 250;
  int step_limit = 5000;
  double failure_reward = -200.0;
};

struct LaneKeepState {
  double psi = 0.0;       // heading error (rad), positive = left
  double delta = 0.0;     // lateral offset / half-width, positive = left
  double track_pos = 0.0; // m
  friend bool operator==(const LaneKeepState&, const LaneKeepState&) = default;
};

/// Kinematic lane keeping on a track whose curvature cycles through
/// {0, +k, 0, -k} every `segment_steps` steps.
class LaneKeep final : public Environment {
 public:
  explicit LaneKeep(std::uint64_t seed, LaneKeepParams params = {});

  static double curvature_at_step(int step, const LaneKeepParams& p);

  std::string_view name() const override { return "lanekeep"; }
  ActionSpace action_space() const override { return ActionSpace::continuous(-1.0, 1.0); }
  const UnpSpec& unp_spec() const override;
  double min_reward() const override { return params_.failure_reward; }
  int step_limit() const override { return params_.step_limit; }

  FeatureState reset() override;
  /// (psi, delta, kappa, v)
  FeatureState observe() const override;
  Transition step(const ActionValue& action) override;
  bool terminal() const override { return terminal_; }

  /// (psi, delta, v, track_pos, step)
  FeatureState save_state() const override;
  void load_state(const FeatureState& full) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<LaneKeep>(*this); }

  const LaneKeepState& state() const { return state_; }
  int steps() const { return steps_; }
  void set_state(const LaneKeepState& s, int steps = 0);
  const LaneKeepParams& params() const { return params_; }

  static FeatureState::Names observation_names();

 private:
  LaneKeepParams params_;
  Rng rng_;
  LaneKeepState state_;
  int steps_ = 0;
  bool terminal_ = false;
};

/// a < 0 when delta < -0.5; a > 0 when delta > 0.5.
UnpSpec lanekeep_unp();
inline BackupPolicy lanekeep_backup() { return BackupPolicy::negate_continuous(); }

// ------------------------------------------------------------ FlappyBird

struct FlappyParams {
  double gravity = 1.0;        // px/step^2
  double flap_impulse = 8.0;   // px/step
  double scroll_speed = 4.0;   // px/step
  double gap_height = 100.0;
  double pipe_spacing = 150.0;
  double screen_height = 512.0;
  double gap_low_min = -50.0;  // gap bottom offset from screen centre
  double gap_low_max = 150.0;
  int reward_cutoff_tenths = 10000;  // episode ends at 1000 accumulated reward
};

struct FlappyState {
  double y_bird = 0.0;
  double v_y = 0.0;
  double x_dist_to_pipe = 0.0;
  double y_lpipe = 0.0;
  double y_upipe = 0.0;
  friend bool operator==(const FlappyState&, const FlappyState&) = default;
};

/// Feature-state FlappyBird, y upward-positive. Rewards: 1 for clearing a
/// pipe, 0.1 per surviving step, -1 for hitting a pipe or leaving the screen.
class FlappyBird final : public Environment {
 public:
  enum Action : int { no_flap = 0, flap = 1 };

  explicit FlappyBird(std::uint64_t seed, FlappyParams params = {});

  std::string_view name() const override { return "flappybird"; }
  ActionSpace action_space() const override { return ActionSpace::discrete(2); }
  const UnpSpec& unp_spec() const override;
  double min_reward() const override { return -1.0; }
  int step_limit() const override;

  FeatureState reset() override;
  /// (y_bird, x_dist_to_pipe, y_upipe, y_lpipe)
  FeatureState observe() const override;
  Transition step(const ActionValue& action) override;
  bool terminal() const override { return terminal_; }

  /// (y_bird, v_y, x_dist_to_pipe, y_upipe, y_lpipe, pipes, ticks)
  FeatureState save_state() const override;
  void load_state(const FeatureState& full) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<FlappyBird>(*this); }

  const FlappyState& state() const { return state_; }
  void set_state(const FlappyState& s);
  const FlappyParams& params() const { return params_; }
  int pipes_cleared() const { return pipes_; }
  /// Accumulated episode reward in tenths (exact integer bookkeeping).
  int score_tenths() const;

  static FeatureState::Names observation_names();

 private:
  void spawn_pipe(double x_dist);

  FlappyParams params_;
  Rng rng_;
  FlappyState state_;
  int pipes_ = 0;
  int ticks_ = 0;
  bool terminal_ = false;
};

/// no_flap when y_bird < y_lpipe; flap when y_bird > y_upipe.
UnpSpec flappy_unp();
inline BackupPolicy flappy_backup() { return BackupPolicy::other_discrete(); }

// ------------------------------------------------------------- helpers

std::unique_ptr<Environment> make_environment(EnvKind kind, std::uint64_t seed);
BackupPolicy backup_for(EnvKind kind);

/// Affine map applied to observations before they reach a network.
struct InputScaling {
  std::vector<double> offset;
  std::vector<double> scale;
  std::vector<double> apply(std::span<const double> raw) const;
};
InputScaling input_scaling(EnvKind kind);

/// S_safe used by the model-based baseline.
bool in_safe_set(EnvKind kind, const Environment& env);

/// Dense grid of full states covering the danger regions (>= 10^4 states).
std::vector<FeatureState> backup_check_grid(EnvKind kind);
/// Probe states for validate_assumption1, including states one step from
/// failure on every boundary.
std::vector<FeatureState> assumption_probe_states(EnvKind kind);

}  // namespace unp
