#include "unp/environments.hpp"

#include <cmath>
#include <stdexcept>

namespace unp {

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole: return "cartpole";
    case EnvKind::lanekeep: return "lanekeep";
    case EnvKind::flappybird: return "flappybird";
  }
  return "?";
}

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "cartpole") return EnvKind::cartpole;
  if (name == "lanekeep") return EnvKind::lanekeep;
  if (name == "flappybird" || name == "flappy") return EnvKind::flappybird;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

namespace {

void require_live(bool terminal, std::string_view env) {
  if (terminal) throw std::logic_error(std::string(env) + ": step called on a terminal state");
}

const FeatureState::Names& cartpole_full_names() {
  static const auto names = FeatureState::make_names({"x", "x_dot", "theta", "theta_dot", "step"});
  return names;
}

const FeatureState::Names& lanekeep_full_names() {
  static const auto names = FeatureState::make_names({"psi", "delta", "v", "track_pos", "step"});
  return names;
}

const FeatureState::Names& flappy_full_names() {
  static const auto names = FeatureState::make_names(
      {"y_bird", "v_y", "x_dist_to_pipe", "y_upipe", "y_lpipe", "pipes", "ticks"});
  return names;
}

void check_names(const FeatureState& s, const FeatureState::Names& expected, std::string_view env) {
  if (s.names() != *expected)
    throw std::invalid_argument(std::string(env) + ": load_state expects the save_state layout");
}

}  // namespace

// ---------------------------------------------------------------- CartPole

CartPole::CartPole(std::uint64_t seed, CartPoleParams params) : params_(params), rng_(seed) {
  reset();
}

FeatureState::Names CartPole::observation_names() {
  static const auto names = FeatureState::make_names({"x", "x_dot", "theta", "theta_dot"});
  return names;
}

CartPoleState CartPole::integrate(const CartPoleState& s, int action, const CartPoleParams& p) {
  // The textbook equations measure the pole angle clockwise; ours is
  // counter-clockwise (positive = leaning left), so flip in and out.
  const double force = action == push_right ? p.force : -p.force;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double pole_mass_length = p.pole_mass * p.half_length;
  const double th = -s.theta;
  const double th_dot = -s.theta_dot;
  const double cos_t = std::cos(th);
  const double sin_t = std::sin(th);
  const double temp = (force + pole_mass_length * th_dot * th_dot * sin_t) / total_mass;
  const double th_acc = (p.gravity * sin_t - cos_t * temp) /
                        (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * th_acc * cos_t / total_mass;
  return {s.x + p.dt * s.x_dot, s.x_dot + p.dt * x_acc, s.theta + p.dt * s.theta_dot,
          s.theta_dot - p.dt * th_acc};
}

bool CartPole::out_of_bounds(const CartPoleState& s, const CartPoleParams& p) {
  return std::abs(s.theta) >= p.angle_limit || std::abs(s.x) >= p.position_limit;
}

const UnpSpec& CartPole::unp_spec() const {
  static const UnpSpec spec = cartpole_unp();
  return spec;
}

FeatureState CartPole::reset() {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  state_.x = u(rng_);
  state_.x_dot = u(rng_);
  state_.theta = u(rng_);
  state_.theta_dot = u(rng_);
  steps_ = 0;
  terminal_ = false;
  return observe();
}

FeatureState CartPole::observe() const {
  return FeatureState({state_.x, state_.x_dot, state_.theta, state_.theta_dot}, observation_names());
}

Transition CartPole::step(const ActionValue& action) {
  require_live(terminal_, name());
  const int a = action.index();
  if (a != push_left && a != push_right) throw std::invalid_argument("cartpole: unknown action");
  Transition t;
  t.state = observe();
  t.action = action;
  state_ = integrate(state_, a, params_);
  ++steps_;
  if (out_of_bounds(state_, params_)) {
    t.reward = 0.0;
    t.failure = t.terminal = true;
  } else {
    t.reward = 1.0;
    t.terminal = steps_ >= params_.step_limit;
  }
  terminal_ = t.terminal;
  t.next_state = observe();
  return t;
}

FeatureState CartPole::save_state() const {
  return FeatureState({state_.x, state_.x_dot, state_.theta, state_.theta_dot,
                       static_cast<double>(steps_)},
                      cartpole_full_names());
}

void CartPole::load_state(const FeatureState& full) {
  check_names(full, cartpole_full_names(), name());
  set_state({full[0], full[1], full[2], full[3]}, static_cast<int>(full[4]));
}

void CartPole::set_state(const CartPoleState& s, int steps) {
  state_ = s;
  steps_ = steps;
  terminal_ = out_of_bounds(state_, params_) || steps_ >= params_.step_limit;
}

UnpSpec cartpole_unp() {
  const double threshold = degrees(3.0);
  return UnpSpec({
      {"push left while tipping left",
       [threshold](const FeatureState& s) { return s.at("theta") < -threshold && s.at("theta_dot") < 0.0; },
       [](const ActionValue& a) { return a.index() == CartPole::push_left; }},
      {"push right while tipping right",
       [threshold](const FeatureState& s) { return s.at("theta") > threshold && s.at("theta_dot") > 0.0; },
       [](const ActionValue& a) { return a.index() == CartPole::push_right; }},
  });
}

// -------------------------------------------------------------- LaneKeep

LaneKeep::LaneKeep(std::uint64_t seed, LaneKeepParams params) : params_(params), rng_(seed) {
  reset();
}

FeatureState::Names LaneKeep::observation_names() {
  static const auto names = FeatureState::make_names({"psi", "delta", "kappa", "v"});
  return names;
}

double LaneKeep::curvature_at_step(int step, const LaneKeepParams& p) {
  switch ((step / p.segment_steps) % 4) {
    case 1: return p.curvature;
    case 3: return -p.curvature;
    default: return 0.0;
  }
}

const UnpSpec& LaneKeep::unp_spec() const {
  static const UnpSpec spec = lanekeep_unp();
  return spec;
}

FeatureState LaneKeep::reset() {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  state_ = {0.0, u(rng_), 0.0};
  steps_ = 0;
  terminal_ = false;
  return observe();
}

FeatureState LaneKeep::observe() const {
  return FeatureState({state_.psi, state_.delta, curvature_at_step(steps_, params_), params_.speed},
                      observation_names());
}

Transition LaneKeep::step(const ActionValue& action) {
  require_live(terminal_, name());
  const double a = action.scalar();
  if (!(a >= -1.0 && a <= 1.0)) throw std::invalid_argument("lanekeep: steering outside [-1, 1]");
  Transition t;
  t.state = observe();
  t.action = action;
  const double kappa = curvature_at_step(steps_, params_);
  state_.psi += (a * params_.steer_gain - kappa * params_.speed) * params_.dt;
  state_.delta += params_.speed * std::sin(state_.psi) * params_.dt / params_.half_width;
  ++steps_;
  state_.track_pos = steps_ * params_.speed * params_.dt;
  if (std::abs(state_.delta) >= 1.0) {
    t.reward = params_.failure_reward;
    t.failure = t.terminal = true;
  } else {
    t.reward = 0.0;
    t.terminal = steps_ >= params_.step_limit;
  }
  terminal_ = t.terminal;
  t.next_state = observe();
  return t;
}

FeatureState LaneKeep::save_state() const {
  return FeatureState({state_.psi, state_.delta, params_.speed, state_.track_pos,
                       static_cast<double>(steps_)},
                      lanekeep_full_names());
}

void LaneKeep::load_state(const FeatureState& full) {
  check_names(full, lanekeep_full_names(), name());
  set_state({full[0], full[1], full[3]}, static_cast<int>(full[4]));
}

void LaneKeep::set_state(const LaneKeepState& s, int steps) {
  state_ = s;
  steps_ = steps;
  terminal_ = std::abs(state_.delta) >= 1.0 || steps_ >= params_.step_limit;
}

UnpSpec lanekeep_unp() {
  return UnpSpec({
      {"steer right near right edge", [](const FeatureState& s) { return s.at("delta") < -0.5; },
       [](const ActionValue& a) { return a.scalar() < 0.0; }},
      {"steer left near left edge", [](const FeatureState& s) { return s.at("delta") > 0.5; },
       [](const ActionValue& a) { return a.scalar() > 0.0; }},
  });
}

// ------------------------------------------------------------ FlappyBird

FlappyBird::FlappyBird(std::uint64_t seed, FlappyParams params) : params_(params), rng_(seed) {
  reset();
}

FeatureState::Names FlappyBird::observation_names() {
  static const auto names = FeatureState::make_names({"y_bird", "x_dist_to_pipe", "y_upipe", "y_lpipe"});
  return names;
}

int FlappyBird::step_limit() const { return params_.reward_cutoff_tenths; }

int FlappyBird::score_tenths() const { return 10 * pipes_ + ticks_; }

const UnpSpec& FlappyBird::unp_spec() const {
  static const UnpSpec spec = flappy_unp();
  return spec;
}

void FlappyBird::spawn_pipe(double x_dist) {
  // Whole-pixel pipe positions keep y_upipe - y_lpipe exactly gap_height.
  std::uniform_int_distribution<int> u(static_cast<int>(params_.gap_low_min),
                                       static_cast<int>(params_.gap_low_max));
  state_.y_lpipe = params_.screen_height / 2.0 + u(rng_);
  state_.y_upipe = state_.y_lpipe + params_.gap_height;
  state_.x_dist_to_pipe = x_dist;
}

FeatureState FlappyBird::reset() {
  spawn_pipe(params_.pipe_spacing);
  state_.y_bird = (state_.y_lpipe + state_.y_upipe) / 2.0;
  state_.v_y = 0.0;
  pipes_ = ticks_ = 0;
  terminal_ = false;
  return observe();
}

FeatureState FlappyBird::observe() const {
  return FeatureState({state_.y_bird, state_.x_dist_to_pipe, state_.y_upipe, state_.y_lpipe},
                      observation_names());
}

Transition FlappyBird::step(const ActionValue& action) {
  require_live(terminal_, name());
  const int a = action.index();
  if (a != flap && a != no_flap) throw std::invalid_argument("flappybird: unknown action");
  Transition t;
  t.state = observe();
  t.action = action;
  state_.v_y = a == flap ? params_.flap_impulse : state_.v_y - params_.gravity;
  state_.y_bird += state_.v_y;
  state_.x_dist_to_pipe -= params_.scroll_speed;

  const bool off_screen = state_.y_bird < 0.0 || state_.y_bird > params_.screen_height;
  if (state_.x_dist_to_pipe <= 0.0) {
    const bool inside = state_.y_bird > state_.y_lpipe && state_.y_bird < state_.y_upipe;
    if (inside && !off_screen) {
      t.reward = 1.0;
      ++pipes_;
      spawn_pipe(state_.x_dist_to_pipe + params_.pipe_spacing);
    } else {
      t.reward = -1.0;
      t.failure = t.terminal = true;
    }
  } else if (off_screen) {
    t.reward = -1.0;
    t.failure = t.terminal = true;
  } else {
    t.reward = 0.1;
    ++ticks_;
  }
  if (!t.failure && score_tenths() >= params_.reward_cutoff_tenths) t.terminal = true;
  terminal_ = t.terminal;
  t.next_state = observe();
  return t;
}

FeatureState FlappyBird::save_state() const {
  return FeatureState({state_.y_bird, state_.v_y, state_.x_dist_to_pipe, state_.y_upipe,
                       state_.y_lpipe, static_cast<double>(pipes_), static_cast<double>(ticks_)},
                      flappy_full_names());
}

void FlappyBird::load_state(const FeatureState& full) {
  check_names(full, flappy_full_names(), name());
  state_ = {full[0], full[1], full[2], full[4], full[3]};
  pipes_ = static_cast<int>(full[5]);
  ticks_ = static_cast<int>(full[6]);
  terminal_ = state_.y_bird < 0.0 || state_.y_bird > params_.screen_height ||
              score_tenths() >= params_.reward_cutoff_tenths;
}

void FlappyBird::set_state(const FlappyState& s) {
  state_ = s;
  terminal_ = state_.y_bird < 0.0 || state_.y_bird > params_.screen_height;
}

UnpSpec flappy_unp() {
  return UnpSpec({
      {"no flap below the gap",
       [](const FeatureState& s) { return s.at("y_bird") < s.at("y_lpipe"); },
       [](const ActionValue& a) { return a.index() == FlappyBird::no_flap; }},
      {"flap above the gap",
       [](const FeatureState& s) { return s.at("y_bird") > s.at("y_upipe"); },
       [](const ActionValue& a) { return a.index() == FlappyBird::flap; }},
  });
}

// ------------------------------------------------------------- helpers

std::unique_ptr<Environment> make_environment(EnvKind kind, std::uint64_t seed) {
  switch (kind) {
    case EnvKind::cartpole: return std::make_unique<CartPole>(seed);
    case EnvKind::lanekeep: return std::make_unique<LaneKeep>(seed);
    case EnvKind::flappybird: return std::make_unique<FlappyBird>(seed);
  }
  throw std::invalid_argument("make_environment: unknown kind");
}

BackupPolicy backup_for(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole: return cartpole_backup();
    case EnvKind::lanekeep: return lanekeep_backup();
    case EnvKind::flappybird: return flappy_backup();
  }
  throw std::invalid_argument("backup_for: unknown kind");
}

std::vector<double> InputScaling::apply(std::span<const double> raw) const {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - offset[i]) * scale[i];
  return out;
}

InputScaling input_scaling(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole:
      return {{0.0, 0.0, 0.0, 0.0}, {1.0 / 2.4, 1.0 / 2.0, 1.0 / degrees(12.0), 1.0 / 2.0}};
    case EnvKind::lanekeep:
      return {{0.0, 0.0, 0.0, 0.0}, {1.0 / 0.2, 1.0, 1.0 / 0.01, 1.0 / 20.0}};
    case EnvKind::flappybird:
      return {{256.0, 0.0, 256.0, 256.0}, {1.0 / 100.0, 1.0 / 150.0, 1.0 / 100.0, 1.0 / 100.0}};
  }
  throw std::invalid_argument("input_scaling: unknown kind");
}

bool in_safe_set(EnvKind kind, const Environment& env) {
  switch (kind) {
    case EnvKind::cartpole: {
      const auto& cp = dynamic_cast<const CartPole&>(env);
      return !CartPole::out_of_bounds(cp.state(), cp.params());
    }
    case EnvKind::lanekeep:
      return std::abs(dynamic_cast<const LaneKeep&>(env).state().delta) < 1.0;
    case EnvKind::flappybird: {
      const auto& fb = dynamic_cast<const FlappyBird&>(env);
      return fb.state().y_bird >= 0.0 && fb.state().y_bird <= fb.params().screen_height;
    }
  }
  return false;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

std::vector<FeatureState> backup_check_grid(EnvKind kind) {
  std::vector<FeatureState> grid;
  switch (kind) {
    case EnvKind::cartpole: {
      const auto names = CartPole::observation_names();
      for (double x : linspace(-2.4, 2.4, 5))
        for (double xd : linspace(-2.0, 2.0, 5))
          for (double th : linspace(-degrees(12.0), degrees(12.0), 41))
            for (double thd : linspace(-2.0, 2.0, 21)) grid.emplace_back(std::vector{x, xd, th, thd}, names);
      break;
    }
    case EnvKind::lanekeep: {
      const auto names = LaneKeep::observation_names();
      for (double psi : linspace(-0.5, 0.5, 21))
        for (double delta : linspace(-1.0, 1.0, 161))
          for (double kappa : {-0.01, 0.0, 0.01}) grid.emplace_back(std::vector{psi, delta, kappa, 20.0}, names);
      break;
    }
    case EnvKind::flappybird: {
      const auto names = FlappyBird::observation_names();
      for (double y : linspace(0.0, 512.0, 129))
        for (double xd : linspace(0.0, 150.0, 6))
          for (double low : linspace(206.0, 406.0, 21)) grid.emplace_back(std::vector{y, xd, low + 100.0, low}, names);
      break;
    }
  }
  return grid;
}

std::vector<FeatureState> assumption_probe_states(EnvKind kind) {
  std::vector<FeatureState> probes;
  switch (kind) {
    case EnvKind::cartpole: {
      const auto names = cartpole_full_names();
      const double lim = degrees(12.0);
      for (double x : linspace(-2.39, 2.39, 7))
        for (double xd : linspace(-3.0, 3.0, 7))
          for (double th : linspace(-lim + 1e-4, lim - 1e-4, 9))
            for (double thd : linspace(-3.0, 3.0, 7))
              for (double step : {0.0, 199.0}) probes.emplace_back(std::vector{x, xd, th, thd, step}, names);
      break;
    }
    case EnvKind::lanekeep: {
      const auto names = lanekeep_full_names();
      for (double psi : linspace(-0.6, 0.6, 13))
        for (double delta : linspace(-0.999, 0.999, 41))
          for (double step : {0.0, 300.0, 800.0, 4999.0})
            probes.emplace_back(std::vector{psi, delta, 20.0, step, step}, names);
      break;
    }
    case EnvKind::flappybird: {
      const auto names = flappy_full_names();
      for (double y : linspace(0.5, 511.5, 24))
        for (double vy : linspace(-12.0, 8.0, 6))
          for (double xd : {2.0, 4.0, 50.0, 150.0})
            for (double low : {206.0, 300.0, 406.0})
              for (double score : {0.0, 9998.0})
                probes.emplace_back(std::vector{y, vy, xd, low + 100.0, low, 0.0, score}, names);
      break;
    }
  }
  return probes;
}

}  // namespace unp
