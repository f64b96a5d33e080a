#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "unp/kernels.hpp"
#include "unp/rng.hpp"

namespace unp {

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::identity;
};

struct LayerSpec {
  int units;
  Activation activation;
};

/// Fully connected network. Layer dimensions chain and every parameter is
/// finite; both are checked on construction.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, std::vector<DenseLayer> layers);

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static Mlp random(int input_dim, const std::vector<LayerSpec>& layers, Rng& rng);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t parameter_count() const;
  /// Flat view: per layer the row-major weights, then the biases.
  double& parameter(std::size_t index);
  double parameter(std::size_t index) const;
  bool all_finite() const;
  bool same_architecture(const Mlp& other) const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  int input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

/// dL/dtheta, shape-congruent with its Mlp.
struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static GradientSet zeros_like(const Mlp& net);
  double squared_norm() const;
  void scale(double factor);
  bool congruent_with(const Mlp& net) const;
};

std::vector<double> forward(const Mlp& net, std::span<const double> input);

/// Reverse-mode gradient of dot(forward(net, input), output_gradient).
GradientSet backward(const Mlp& net, std::span<const double> input,
                     std::span<const double> output_gradient);

/// Activations recorded by a batched forward pass, consumed by backward_batch.
struct BatchTape {
  Matrix input;
  std::vector<Matrix> pre;   // affine outputs per layer
  std::vector<Matrix> post;  // activated outputs per layer
  const Matrix& output() const { return post.back(); }
};

BatchTape forward_batch(const Mlp& net, const Matrix& inputs, Execution exec = Execution::parallel);

/// Gradients of sum_rows dot(output_row, dy_row). When `input_gradient` is
/// non-null it receives dy propagated back to the inputs.
GradientSet backward_batch(const Mlp& net, const BatchTape& tape, const Matrix& dy,
                           Matrix* input_gradient = nullptr,
                           Execution exec = Execution::parallel);

/// dy propagated back to the inputs, skipping parameter gradients.
Matrix input_gradient(const Mlp& net, const BatchTape& tape, const Matrix& dy,
                      Execution exec = Execution::parallel);

/// theta <- theta - learning_rate * grad.
void sgd_update(Mlp& net, const GradientSet& grads, double learning_rate);

enum class OptimizerKind { sgd, adam };
std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

/// Gradient-step rule with whatever per-parameter state it needs. SGD is
/// stateless; Adam keeps first/second moment estimates and a step count.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, const Mlp& net);

  OptimizerKind kind() const { return kind_; }
  long steps() const { return t_; }
  void step(Mlp& net, const GradientSet& grads, double learning_rate);

  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double epsilon = 1e-8;

 private:
  OptimizerKind kind_ = OptimizerKind::sgd;
  GradientSet m_;
  GradientSet v_;
  long t_ = 0;
};

/// target <- rate * online + (1 - rate) * target.
void soft_update(Mlp& target, const Mlp& online, double rate);

struct GradCheckResult {
  double max_relative_error = 0.0;
  int probes = 0;
  int kinks_skipped = 0;
};

inline constexpr double kFiniteDiffStep = 1e-5;

/// Central-difference check of backward() on `probe_count` distinct
/// parameters of the scalar c . forward(net, input), c drawn from `rng`.
/// Probes whose +-h perturbation flips any relu unit are replaced by fresh
/// ones and counted in kinks_skipped.
GradCheckResult finite_diff_check(const Mlp& net, std::span<const double> input, int probe_count,
                                  Rng& rng);

/// Relative error |a - b| / max(|a|, |b|), falling back to |a - b| when both
/// magnitudes are below 1e-10.
double relative_error(double analytic, double numeric);

void save_mlp(std::ostream& os, const Mlp& net);
Mlp load_mlp(std::istream& is);
void save_mlp_file(const std::string& path, const Mlp& net);
Mlp load_mlp_file(const std::string& path);

}  // namespace unp
