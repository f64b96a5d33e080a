#include "unp/agents.hpp"

#include <algorithm>
#include <cmath>

namespace unp {

void Hyperparameters::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("hyperparameters: ") + what); };
  if (!(critic_lr > 0.0)) fail("critic_lr must be positive");
  if (actor_lr && !(*actor_lr > 0.0)) fail("actor_lr must be positive");
  if (!(target_rate > 0.0 && target_rate <= 1.0)) fail("target_rate must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (exploration_steps < 0) fail("exploration_steps must be non-negative");
  if (!(exploration_factor > 0.0 && exploration_factor <= 1.0)) fail("exploration_factor must lie in (0, 1]");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (buffer_capacity <= 0) fail("buffer_capacity must be positive");
  if (!(exploration_floor > 0.0 && exploration_floor <= 1.0)) fail("exploration_floor must lie in (0, 1]");
  if (!(initial_noise > 0.0)) fail("initial_noise must be positive");
  if (train_interval <= 0) fail("train_interval must be positive");
}

Hyperparameters Hyperparameters::for_env(EnvKind kind) {
  Hyperparameters hp;
  switch (kind) {
    case EnvKind::cartpole:
      break;
    case EnvKind::lanekeep:
      hp.critic_lr = 0.0005;
      hp.actor_lr = 0.0003;
      hp.exploration_factor = 0.999;
      hp.buffer_capacity = 100000;
      break;
    case EnvKind::flappybird:
      hp.critic_lr = 0.000005;
      hp.exploration_steps = 30000;
      hp.exploration_factor = 0.99985;
      break;
  }
  return hp;
}

// ----------------------------------------------------------- ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("ReplayBuffer::at");
  return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw InsufficientData("ReplayBuffer: sampling from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

// ----------------------------------------------------------------- helpers

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

namespace {

std::vector<double> scaled(const InputScaling* scaling, const FeatureState& s) {
  if (!scaling) return {s.values().begin(), s.values().end()};
  return scaling->apply(s.values());
}

struct Batch {
  Matrix states;
  Matrix next_states;
  std::vector<const Transition*> items;
};

Batch gather(const ReplayBuffer& buffer, const InputScaling& scaling, int dim, std::size_t n, Rng& rng) {
  Batch b;
  const auto idx = buffer.sample_indices(n, rng);
  b.states.resize(static_cast<Eigen::Index>(n), dim);
  b.next_states.resize(static_cast<Eigen::Index>(n), dim);
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& t = buffer.at(idx[r]);
    const auto s = scaling.apply(t.state.values());
    const auto s2 = scaling.apply(t.next_state.values());
    std::copy(s.begin(), s.end(), b.states.row(static_cast<Eigen::Index>(r)).data());
    std::copy(s2.begin(), s2.end(), b.next_states.row(static_cast<Eigen::Index>(r)).data());
    b.items.push_back(&t);
  }
  return b;
}

}  // namespace

double ddqn_target(const Transition& item, const Mlp& online, const Mlp& target, double gamma,
                   const InputScaling* scaling) {
  if (item.terminal) return item.reward;
  const auto next = scaled(scaling, item.next_state);
  const int best = argmax(forward(online, next));
  return item.reward + gamma * forward(target, next)[static_cast<std::size_t>(best)];
}

// --------------------------------------------------------------- DdqnAgent

DdqnAgent::DdqnAgent(Mlp online, Hyperparameters hp, InputScaling scaling)
    : online_(std::move(online)),
      target_(online_),
      hp_(hp),
      scaling_(std::move(scaling)),
      buffer_(static_cast<std::size_t>(hp.buffer_capacity)),
      optimizer_(hp.optimizer, online_) {
  hp_.validate();
  if (scaling_.scale.size() != static_cast<std::size_t>(online_.input_dim()))
    throw std::invalid_argument("DdqnAgent: input scaling does not match network input");
}

std::vector<LayerSpec> DdqnAgent::hidden_layers(EnvKind kind) {
  switch (kind) {
    case EnvKind::cartpole: return {{16, Activation::relu}, {32, Activation::relu}};
    case EnvKind::flappybird: return {{64, Activation::relu}, {64, Activation::relu}};
    case EnvKind::lanekeep: break;
  }
  throw std::invalid_argument("DdqnAgent: environment has a continuous action space");
}

DdqnAgent DdqnAgent::for_env(EnvKind kind, const Hyperparameters& hp, Rng& init_rng) {
  auto layers = hidden_layers(kind);
  layers.push_back({2, Activation::identity});
  return DdqnAgent(Mlp::random(4, layers, init_rng), hp, input_scaling(kind));
}

std::vector<double> DdqnAgent::q_values(const FeatureState& state) const {
  return forward(online_, scaling_.apply(state.values()));
}

ActionValue DdqnAgent::greedy(const FeatureState& state) const {
  return ActionValue::discrete(argmax(q_values(state)));
}

ActionValue DdqnAgent::select(const FeatureState& state, Rng& rng) const {
  std::uniform_int_distribution<int> random_action(0, action_count() - 1);
  if (in_warmup()) return ActionValue::discrete(random_action(rng));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon_) return ActionValue::discrete(random_action(rng));
  return greedy(state);
}

bool DdqnAgent::ready_to_train() const {
  return buffer_.size() >= static_cast<std::size_t>(std::max(hp_.batch_size, hp_.exploration_steps));
}

double DdqnAgent::train_step(Rng& rng) {
  if (!ready_to_train()) throw InsufficientData("ddqn_train_step: replay buffer below warm-up size");
  const auto n = static_cast<std::size_t>(hp_.batch_size);
  const Batch b = gather(buffer_, scaling_, online_.input_dim(), n, rng);

  const BatchTape next_online = forward_batch(online_, b.next_states);
  const BatchTape next_target = forward_batch(target_, b.next_states);
  const BatchTape tape = forward_batch(online_, b.states);

  Matrix dy = Matrix::Zero(static_cast<Eigen::Index>(n), online_.output_dim());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Transition& t = *b.items[i];
    double y = t.reward;
    if (!t.terminal) {
      const auto row = next_online.output().row(r);
      const int best = argmax(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
      y += hp_.gamma * next_target.output()(r, best);
    }
    const int a = t.action.index();
    const double err = tape.output()(r, a) - y;
    loss += err * err;
    dy(r, a) = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);

  const GradientSet g = backward_batch(online_, tape, dy);
  optimizer_.step(online_, g, hp_.critic_lr);
  soft_update(target_, online_, hp_.target_rate);
  return loss;
}

void DdqnAgent::decay_exploration() {
  epsilon_ = std::max(hp_.exploration_floor, epsilon_ * hp_.exploration_factor);
}

// --------------------------------------------------------------- DdpgAgent

void actor_ascent_step(Mlp& actor, const Matrix& states, const ActionGradientFn& dq_da,
                       double learning_rate, Optimizer* optimizer) {
  const BatchTape tape = forward_batch(actor, states);
  const Matrix grad_a = dq_da(states, tape.output());
  // Minimise -mean Q.
  const Matrix dy = -grad_a / static_cast<double>(states.rows());
  const GradientSet g = backward_batch(actor, tape, dy);
  if (optimizer) optimizer->step(actor, g, learning_rate);
  else sgd_update(actor, g, learning_rate);
}

DdpgAgent::DdpgAgent(Mlp actor, CriticNet critic, Hyperparameters hp, InputScaling scaling)
    : actor_(std::move(actor)),
      critic_(std::move(critic)),
      target_actor_(actor_),
      target_critic_(critic_),
      hp_(hp),
      scaling_(std::move(scaling)),
      noise_scale_(hp.initial_noise),
      buffer_(static_cast<std::size_t>(hp.buffer_capacity)),
      actor_optimizer_(hp.optimizer, actor_),
      critic_optimizer_(critic_.make_optimizers(hp.optimizer)) {
  hp_.validate();
  if (!hp_.actor_lr) throw std::invalid_argument("DdpgAgent: actor_lr is required");
  if (actor_.output_dim() != 1 || actor_.layers().back().activation != Activation::tanh)
    throw std::invalid_argument("DdpgAgent: actor must end in a single tanh unit");
  if (critic_.state_dim() != actor_.input_dim())
    throw std::invalid_argument("DdpgAgent: actor and critic disagree on the state dimension");
}

DdpgAgent DdpgAgent::for_env(EnvKind kind, const Hyperparameters& hp, Rng& init_rng) {
  if (kind != EnvKind::lanekeep) throw std::invalid_argument("DdpgAgent: continuous environments only");
  Mlp actor = Mlp::random(4, {{128, Activation::relu}, {256, Activation::relu}, {1, Activation::tanh}},
                          init_rng);
  if (hp.small_actor_output) {
    std::uniform_real_distribution<double> u(-3e-3, 3e-3);
    DenseLayer& out = actor.layers().back();
    for (Eigen::Index i = 0; i < out.weights.size(); ++i) out.weights.data()[i] = u(init_rng);
    for (Eigen::Index i = 0; i < out.biases.size(); ++i) out.biases[i] = u(init_rng);
  }
  CriticNet critic = CriticNet::random(4, {{128, Activation::relu}, {256, Activation::relu}},
                                       {{256, Activation::relu}},
                                       {{256, Activation::relu}, {1, Activation::identity}}, init_rng);
  return DdpgAgent(std::move(actor), std::move(critic), hp, input_scaling(kind));
}

double DdpgAgent::noisy_action(double mean, double noise_scale, double standard_normal) {
  return std::clamp(mean + noise_scale * standard_normal, -1.0, 1.0);
}

double DdpgAgent::actor_output(const FeatureState& state) const {
  return forward(actor_, scaling_.apply(state.values()))[0];
}

ActionValue DdpgAgent::greedy(const FeatureState& state) const {
  return ActionValue::continuous(std::clamp(actor_output(state), -1.0, 1.0));
}

ActionValue DdpgAgent::select(const FeatureState& state, Rng& rng) const {
  if (in_warmup()) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return ActionValue::continuous(u(rng));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  return ActionValue::continuous(noisy_action(actor_output(state), noise_scale_, normal(rng)));
}

bool DdpgAgent::ready_to_train() const {
  return buffer_.size() >= static_cast<std::size_t>(std::max(hp_.batch_size, hp_.exploration_steps));
}

DdpgAgent::TrainStats DdpgAgent::train_step(Rng& rng) {
  if (!ready_to_train()) throw InsufficientData("ddpg_train_step: replay buffer below warm-up size");
  const auto n = static_cast<std::size_t>(hp_.batch_size);
  const auto rows = static_cast<Eigen::Index>(n);
  const Batch b = gather(buffer_, scaling_, actor_.input_dim(), n, rng);

  Matrix actions(rows, 1);
  for (std::size_t i = 0; i < n; ++i) actions(static_cast<Eigen::Index>(i), 0) = b.items[i]->action.scalar();

  const BatchTape next_actor = forward_batch(target_actor_, b.next_states);
  const auto next_q = target_critic_.forward(b.next_states, next_actor.output());

  const auto tape = critic_.forward(b.states, actions);
  Matrix dq(rows, 1);
  double critic_loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Transition& t = *b.items[i];
    const double y = t.terminal ? t.reward : t.reward + hp_.gamma * next_q.q()(r, 0);
    const double err = tape.q()(r, 0) - y;
    critic_loss += err * err;
    dq(r, 0) = 2.0 * err / static_cast<double>(n);
  }
  critic_loss /= static_cast<double>(n);
  critic_.step(critic_.backward(tape, dq), hp_.critic_lr, critic_optimizer_);

  double objective = 0.0;
  actor_ascent_step(
      actor_, b.states,
      [&](const Matrix& states, const Matrix& proposed) {
        const auto ct = critic_.forward(states, proposed);
        objective = ct.q().mean();
        return critic_.action_gradient(ct, Matrix::Ones(states.rows(), 1));
      },
      *hp_.actor_lr, &actor_optimizer_);

  target_critic_.soft_update_from(critic_, hp_.target_rate);
  soft_update(target_actor_, actor_, hp_.target_rate);
  return {critic_loss, objective};
}

void DdpgAgent::decay_exploration() {
  noise_scale_ = std::max(hp_.exploration_floor, noise_scale_ * hp_.exploration_factor);
}

// ----------------------------------------------------------------- learners

namespace {

Transition for_replay(const Transition& t, const Hyperparameters& hp) {
  Transition stored = t;
  if (hp.bootstrap_on_timeout && t.terminal && !t.failure) stored.terminal = false;
  return stored;
}

Transition blocked_failure(const Transition& executed, const ActionValue& proposed, double min_reward) {
  Transition t = executed;
  t.action = proposed;
  t.reward = min_reward;
  t.terminal = t.failure = true;
  return t;
}

}  // namespace

ActionValue DdqnLearner::act(const FeatureState& state, Rng& rng) {
  return training_ ? agent_.select(state, rng) : agent_.greedy(state);
}

void DdqnLearner::observe(const Transition& t, Rng& rng) {
  if (!training_) return;
  agent_.remember(for_replay(t, agent_.hp()));
  const bool warm = agent_.in_warmup();
  agent_.count_step();
  if (!warm) agent_.decay_exploration();
  if (agent_.ready_to_train() && agent_.step_count() % agent_.hp().train_interval == 0)
    agent_.train_step(rng);
}

void DdqnLearner::observe_blocked(const Transition& executed, const ActionValue& proposed,
                                  double min_reward, Rng&) {
  if (training_ && agent_.hp().blocked_penalty) agent_.remember(blocked_failure(executed, proposed, min_reward));
}

bool DdqnLearner::parameters_finite() const {
  return agent_.online().all_finite() && agent_.target().all_finite();
}

ActionValue DdpgLearner::act(const FeatureState& state, Rng& rng) {
  return training_ ? agent_.select(state, rng) : agent_.greedy(state);
}

void DdpgLearner::observe(const Transition& t, Rng& rng) {
  if (!training_) return;
  agent_.remember(for_replay(t, agent_.hp()));
  const bool warm = agent_.in_warmup();
  agent_.count_step();
  if (!warm) agent_.decay_exploration();
  if (agent_.ready_to_train() && agent_.step_count() % agent_.hp().train_interval == 0)
    agent_.train_step(rng);
}

void DdpgLearner::observe_blocked(const Transition& executed, const ActionValue& proposed,
                                  double min_reward, Rng&) {
  if (training_ && agent_.hp().blocked_penalty) agent_.remember(blocked_failure(executed, proposed, min_reward));
}

bool DdpgLearner::parameters_finite() const {
  return agent_.actor().all_finite() && agent_.critic().all_finite() &&
         agent_.target_actor().all_finite() && agent_.target_critic().all_finite();
}

std::unique_ptr<Learner> make_learner(EnvKind kind, const Hyperparameters& hp, Rng& init_rng) {
  if (kind == EnvKind::lanekeep) return std::make_unique<DdpgLearner>(DdpgAgent::for_env(kind, hp, init_rng));
  return std::make_unique<DdqnLearner>(DdqnAgent::for_env(kind, hp, init_rng));
}

ActionValue SnapshotPolicy::act(const FeatureState& state, Rng&) {
  const auto out = forward(net_, scaling_.apply(state.values()));
  if (discrete_) return ActionValue::discrete(argmax(out));
  return ActionValue::continuous(std::clamp(out[0], -1.0, 1.0));
}

}  // namespace unp
