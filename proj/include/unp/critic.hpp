#pragma once

#include <vector>

#include "unp/mlp.hpp"

namespace unp {

/// Q(s, a) = head([state_branch(s), action_branch(a)]).
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(Mlp state_branch, Mlp action_branch, Mlp head);

  static CriticNet random(int state_dim, const std::vector<LayerSpec>& state_layers,
                          const std::vector<LayerSpec>& action_layers,
                          const std::vector<LayerSpec>& head_layers, Rng& rng);

  const Mlp& state_branch() const { return state_branch_; }
  const Mlp& action_branch() const { return action_branch_; }
  const Mlp& head() const { return head_; }
  Mlp& state_branch() { return state_branch_; }
  Mlp& action_branch() { return action_branch_; }
  Mlp& head() { return head_; }

  int state_dim() const { return state_branch_.input_dim(); }

  struct Tape {
    BatchTape state;
    BatchTape action;
    BatchTape head;
    const Matrix& q() const { return head.output(); }
  };

  struct Gradients {
    GradientSet state;
    GradientSet action;
    GradientSet head;
  };

  double value(std::span<const double> state, double action) const;
  Tape forward(const Matrix& states, const Matrix& actions,
               Execution exec = Execution::parallel) const;
  /// Parameter gradients of sum_i dq_i * Q_i; fills `action_gradient` with
  /// dQ/da per row when non-null.
  Gradients backward(const Tape& tape, const Matrix& dq, Matrix* action_gradient = nullptr,
                     Execution exec = Execution::parallel) const;

  /// dQ/da per row for upstream dq, without parameter gradients.
  Matrix action_gradient(const Tape& tape, const Matrix& dq,
                         Execution exec = Execution::parallel) const;

  void sgd_update(const Gradients& g, double learning_rate);

  /// One optimiser state per sub-network.
  struct Optimizers {
    Optimizer state;
    Optimizer action;
    Optimizer head;
  };
  Optimizers make_optimizers(OptimizerKind kind) const;
  void step(const Gradients& g, double learning_rate, Optimizers& opt);
  void soft_update_from(const CriticNet& online, double rate);
  bool all_finite() const;

  friend bool operator==(const CriticNet&, const CriticNet&) = default;

 private:
  Mlp state_branch_;
  Mlp action_branch_;
  Mlp head_;
};

/// Central-difference check of CriticNet::backward over parameters of all
/// three sub-networks (probes spread uniformly over the flat concatenation).
GradCheckResult critic_finite_diff_check(const CriticNet& critic, std::span<const double> state,
                                         double action, int probe_count, Rng& rng);

}  // namespace unp
