#include "unp/critic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace unp {

CriticNet::CriticNet(Mlp state_branch, Mlp action_branch, Mlp head)
    : state_branch_(std::move(state_branch)),
      action_branch_(std::move(action_branch)),
      head_(std::move(head)) {
  if (action_branch_.input_dim() != 1) throw std::invalid_argument("CriticNet: scalar action expected");
  if (head_.input_dim() != state_branch_.output_dim() + action_branch_.output_dim())
    throw std::invalid_argument("CriticNet: head input must equal concatenated branch outputs");
  if (head_.output_dim() != 1) throw std::invalid_argument("CriticNet: head must output one value");
}

CriticNet CriticNet::random(int state_dim, const std::vector<LayerSpec>& state_layers,
                            const std::vector<LayerSpec>& action_layers,
                            const std::vector<LayerSpec>& head_layers, Rng& rng) {
  Mlp s = Mlp::random(state_dim, state_layers, rng);
  Mlp a = Mlp::random(1, action_layers, rng);
  Mlp h = Mlp::random(s.output_dim() + a.output_dim(), head_layers, rng);
  return CriticNet(std::move(s), std::move(a), std::move(h));
}

double CriticNet::value(std::span<const double> state, double action) const {
  const auto hs = unp::forward(state_branch_, state);
  const double a[1] = {action};
  const auto ha = unp::forward(action_branch_, a);
  std::vector<double> joined(hs);
  joined.insert(joined.end(), ha.begin(), ha.end());
  return unp::forward(head_, joined)[0];
}

CriticNet::Tape CriticNet::forward(const Matrix& states, const Matrix& actions, Execution exec) const {
  Tape t;
  t.state = forward_batch(state_branch_, states, exec);
  t.action = forward_batch(action_branch_, actions, exec);
  Matrix joined(states.rows(), head_.input_dim());
  joined << t.state.output(), t.action.output();
  t.head = forward_batch(head_, joined, exec);
  return t;
}

CriticNet::Gradients CriticNet::backward(const Tape& tape, const Matrix& dq, Matrix* action_gradient,
                                         Execution exec) const {
  Gradients g;
  Matrix d_joined;
  g.head = backward_batch(head_, tape.head, dq, &d_joined, exec);
  const Eigen::Index split = state_branch_.output_dim();
  const Matrix d_state = d_joined.leftCols(split);
  const Matrix d_action = d_joined.rightCols(d_joined.cols() - split);
  g.state = backward_batch(state_branch_, tape.state, d_state, nullptr, exec);
  g.action = backward_batch(action_branch_, tape.action, d_action, action_gradient, exec);
  return g;
}

Matrix CriticNet::action_gradient(const Tape& tape, const Matrix& dq, Execution exec) const {
  const Matrix d_joined = input_gradient(head_, tape.head, dq, exec);
  const Matrix d_action = d_joined.rightCols(action_branch_.output_dim());
  return input_gradient(action_branch_, tape.action, d_action, exec);
}

void CriticNet::sgd_update(const Gradients& g, double learning_rate) {
  unp::sgd_update(state_branch_, g.state, learning_rate);
  unp::sgd_update(action_branch_, g.action, learning_rate);
  unp::sgd_update(head_, g.head, learning_rate);
}

CriticNet::Optimizers CriticNet::make_optimizers(OptimizerKind kind) const {
  return {Optimizer(kind, state_branch_), Optimizer(kind, action_branch_), Optimizer(kind, head_)};
}

void CriticNet::step(const Gradients& g, double learning_rate, Optimizers& opt) {
  opt.state.step(state_branch_, g.state, learning_rate);
  opt.action.step(action_branch_, g.action, learning_rate);
  opt.head.step(head_, g.head, learning_rate);
}

void CriticNet::soft_update_from(const CriticNet& online, double rate) {
  unp::soft_update(state_branch_, online.state_branch_, rate);
  unp::soft_update(action_branch_, online.action_branch_, rate);
  unp::soft_update(head_, online.head_, rate);
}

bool CriticNet::all_finite() const {
  return state_branch_.all_finite() && action_branch_.all_finite() && head_.all_finite();
}

namespace {

// Flat parameter addressing across the three sub-networks.
struct CriticParams {
  CriticNet& net;
  std::size_t total() const {
    return net.state_branch().parameter_count() + net.action_branch().parameter_count() +
           net.head().parameter_count();
  }
  double& at(std::size_t i) {
    if (i < net.state_branch().parameter_count()) return net.state_branch().parameter(i);
    i -= net.state_branch().parameter_count();
    if (i < net.action_branch().parameter_count()) return net.action_branch().parameter(i);
    i -= net.action_branch().parameter_count();
    return net.head().parameter(i);
  }
};

void append_flat(std::vector<double>& out, const GradientSet& g) {
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    out.insert(out.end(), g.weights[k].data(), g.weights[k].data() + g.weights[k].size());
    out.insert(out.end(), g.biases[k].data(), g.biases[k].data() + g.biases[k].size());
  }
}

std::vector<bool> relu_mask(const CriticNet& net, const Matrix& s, const Matrix& a) {
  const auto tape = net.forward(s, a, Execution::reference);
  std::vector<bool> mask;
  auto add = [&](const Mlp& m, const BatchTape& t) {
    for (std::size_t k = 0; k < m.layers().size(); ++k)
      if (m.layers()[k].activation == Activation::relu)
        for (Eigen::Index j = 0; j < t.pre[k].cols(); ++j) mask.push_back(t.pre[k](0, j) > 0.0);
  };
  add(net.state_branch(), tape.state);
  add(net.action_branch(), tape.action);
  add(net.head(), tape.head);
  return mask;
}

}  // namespace

GradCheckResult critic_finite_diff_check(const CriticNet& critic, std::span<const double> state,
                                         double action, int probe_count, Rng& rng) {
  Matrix s(1, static_cast<Eigen::Index>(state.size()));
  std::copy(state.begin(), state.end(), s.data());
  Matrix a(1, 1);
  a(0, 0) = action;

  const auto tape = critic.forward(s, a, Execution::reference);
  const auto grads = critic.backward(tape, Matrix::Ones(1, 1), nullptr, Execution::reference);
  std::vector<double> flat;
  append_flat(flat, grads.state);
  append_flat(flat, grads.action);
  append_flat(flat, grads.head);

  CriticNet probe = critic;
  CriticParams params{probe};
  if (probe_count <= 0 || static_cast<std::size_t>(probe_count) > params.total())
    throw std::invalid_argument("critic_finite_diff_check: bad probe_count");
  std::vector<std::size_t> order(params.total());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto base = relu_mask(critic, s, a);
  GradCheckResult result;
  for (std::size_t idx : order) {
    if (result.probes == probe_count) break;
    const double original = params.at(idx);
    params.at(idx) = original + kFiniteDiffStep;
    const double f_plus = probe.value(state, action);
    const bool kink_plus = relu_mask(probe, s, a) != base;
    params.at(idx) = original - kFiniteDiffStep;
    const double f_minus = probe.value(state, action);
    const bool kink_minus = relu_mask(probe, s, a) != base;
    params.at(idx) = original;
    if (kink_plus || kink_minus) {
      ++result.kinks_skipped;
      continue;
    }
    const double numeric = (f_plus - f_minus) / (2.0 * kFiniteDiffStep);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(flat[idx], numeric));
    ++result.probes;
  }
  return result;
}

}  // namespace unp
