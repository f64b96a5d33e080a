#include "unp/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace unp {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Mlp::Mlp(int input_dim, std::vector<DenseLayer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  if (input_dim_ <= 0) throw std::invalid_argument("Mlp: input_dim must be positive");
  if (layers_.empty()) throw std::invalid_argument("Mlp: at least one layer required");
  Eigen::Index in = input_dim_;
  for (const auto& l : layers_) {
    if (l.weights.cols() != in || l.biases.size() != l.weights.rows() || l.weights.rows() == 0)
      throw std::invalid_argument("Mlp: layer dimensions do not chain");
    in = l.weights.rows();
  }
  if (!all_finite()) throw std::invalid_argument("Mlp: non-finite parameter");
}

Mlp Mlp::random(int input_dim, const std::vector<LayerSpec>& specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  int in = input_dim;
  for (const auto& s : specs) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l;
    l.weights.resize(s.units, in);
    l.biases.resize(s.units);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = u(rng);
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases(r) = u(rng);
    l.activation = s.activation;
    layers.push_back(std::move(l));
    in = s.units;
  }
  return Mlp(input_dim, std::move(layers));
}

int Mlp::output_dim() const { return static_cast<int>(layers_.back().weights.rows()); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

double& Mlp::parameter(std::size_t index) {
  for (auto& l : layers_) {
    const auto nw = static_cast<std::size_t>(l.weights.size());
    if (index < nw) return l.weights.data()[index];
    index -= nw;
    const auto nb = static_cast<std::size_t>(l.biases.size());
    if (index < nb) return l.biases.data()[index];
    index -= nb;
  }
  throw std::out_of_range("Mlp::parameter: index out of range");
}

double Mlp::parameter(std::size_t index) const { return const_cast<Mlp&>(*this).parameter(index); }

bool Mlp::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
  return true;
}

bool Mlp::same_architecture(const Mlp& other) const {
  if (input_dim_ != other.input_dim_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].weights.rows() != other.layers_[i].weights.rows() ||
        layers_[i].weights.cols() != other.layers_[i].weights.cols() ||
        layers_[i].activation != other.layers_[i].activation)
      return false;
  return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i)
    if (a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].biases != b.layers_[i].biases)
      return false;
  return true;
}

GradientSet GradientSet::zeros_like(const Mlp& net) {
  GradientSet g;
  for (const auto& l : net.layers()) {
    g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    g.biases.push_back(Vector::Zero(l.biases.size()));
  }
  return g;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

void GradientSet::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

bool GradientSet::congruent_with(const Mlp& net) const {
  const auto& layers = net.layers();
  if (weights.size() != layers.size() || biases.size() != layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (weights[i].rows() != layers[i].weights.rows() ||
        weights[i].cols() != layers[i].weights.cols() ||
        biases[i].size() != layers[i].biases.size())
      return false;
  return true;
}

namespace {

template <typename Derived>
void activate(Activation a, Eigen::MatrixBase<Derived>& z) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::identity: break;
  }
}

// dZ = dA * act'(Z), with act' expressed through Z (relu) or A (tanh).
void activation_backward(Activation a, const Matrix& pre, const Matrix& post, Matrix& grad) {
  switch (a) {
    case Activation::relu:
      grad = (pre.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::tanh:
      grad = (grad.array() * (1.0 - post.array().square())).matrix();
      break;
    case Activation::identity:
      break;
  }
}

Matrix row_matrix(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

}  // namespace

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  Vector x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (const auto& l : net.layers()) {
    Vector z = l.weights * x + l.biases;
    activate(l.activation, z);
    x = std::move(z);
  }
  return {x.data(), x.data() + x.size()};
}

BatchTape forward_batch(const Mlp& net, const Matrix& inputs, Execution exec) {
  if (inputs.cols() != net.input_dim())
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  BatchTape tape;
  tape.input = inputs;
  const Matrix* x = &tape.input;
  tape.pre.reserve(net.layers().size());
  tape.post.reserve(net.layers().size());
  for (const auto& l : net.layers()) {
    Matrix z;
    kernels::dense_forward(*x, l.weights, l.biases, z, exec);
    Matrix a = z;
    activate(l.activation, a);
    tape.pre.push_back(std::move(z));
    tape.post.push_back(std::move(a));
    x = &tape.post.back();
  }
  return tape;
}

GradientSet backward_batch(const Mlp& net, const BatchTape& tape, const Matrix& dy,
                           Matrix* input_gradient, Execution exec) {
  const auto& layers = net.layers();
  if (tape.post.size() != layers.size() || dy.rows() != tape.input.rows() ||
      dy.cols() != net.output_dim())
    throw std::invalid_argument("backward_batch: dimension mismatch");
  GradientSet g;
  g.weights.resize(layers.size());
  g.biases.resize(layers.size());
  Matrix grad = dy;
  for (std::size_t k = layers.size(); k-- > 0;) {
    activation_backward(layers[k].activation, tape.pre[k], tape.post[k], grad);
    const Matrix& below = k == 0 ? tape.input : tape.post[k - 1];
    kernels::dense_weight_grad(grad, below, g.weights[k], g.biases[k], exec);
    if (k > 0 || input_gradient) {
      Matrix next;
      kernels::dense_input_grad(grad, layers[k].weights, next, exec);
      grad = std::move(next);
    }
  }
  if (input_gradient) *input_gradient = std::move(grad);
  return g;
}

Matrix input_gradient(const Mlp& net, const BatchTape& tape, const Matrix& dy, Execution exec) {
  const auto& layers = net.layers();
  if (tape.post.size() != layers.size() || dy.rows() != tape.input.rows() ||
      dy.cols() != net.output_dim())
    throw std::invalid_argument("input_gradient: dimension mismatch");
  Matrix grad = dy;
  for (std::size_t k = layers.size(); k-- > 0;) {
    activation_backward(layers[k].activation, tape.pre[k], tape.post[k], grad);
    Matrix next;
    kernels::dense_input_grad(grad, layers[k].weights, next, exec);
    grad = std::move(next);
  }
  return grad;
}

GradientSet backward(const Mlp& net, std::span<const double> input,
                     std::span<const double> output_gradient) {
  if (static_cast<int>(input.size()) != net.input_dim() ||
      static_cast<int>(output_gradient.size()) != net.output_dim())
    throw std::invalid_argument("backward: dimension mismatch");
  const BatchTape tape = forward_batch(net, row_matrix(input));
  return backward_batch(net, tape, row_matrix(output_gradient));
}

void sgd_update(Mlp& net, const GradientSet& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd_update: learning rate must be positive");
  if (!grads.congruent_with(net)) throw std::invalid_argument("sgd_update: gradient shape mismatch");
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weights -= learning_rate * grads.weights[i];
    layers[i].biases -= learning_rate * grads.biases[i];
  }
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(OptimizerKind kind, const Mlp& net) : kind_(kind) {
  if (kind_ == OptimizerKind::adam) {
    m_ = GradientSet::zeros_like(net);
    v_ = GradientSet::zeros_like(net);
  }
}

void Optimizer::step(Mlp& net, const GradientSet& grads, double learning_rate) {
  if (kind_ == OptimizerKind::sgd) {
    sgd_update(net, grads, learning_rate);
    ++t_;
    return;
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  if (!grads.congruent_with(net) || !m_.congruent_with(net))
    throw std::invalid_argument("adam: gradient shape mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
  };
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weights, m_.weights[i], v_.weights[i], grads.weights[i]);
    update(layers[i].biases, m_.biases[i], v_.biases[i], grads.biases[i]);
  }
}

void soft_update(Mlp& target, const Mlp& online, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("soft_update: rate must lie in (0, 1]");
  if (!target.same_architecture(online)) throw std::invalid_argument("soft_update: architecture mismatch");
  auto& t = target.layers();
  const auto& o = online.layers();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (rate == 1.0) {
      t[i].weights = o[i].weights;
      t[i].biases = o[i].biases;
    } else {
      t[i].weights = rate * o[i].weights + (1.0 - rate) * t[i].weights;
      t[i].biases = rate * o[i].biases + (1.0 - rate) * t[i].biases;
    }
  }
}

double relative_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale < 1e-10 ? diff : diff / scale;
}

namespace {

std::vector<std::vector<bool>> relu_pattern(const Mlp& net, std::span<const double> input) {
  std::vector<std::vector<bool>> pattern;
  const BatchTape tape = forward_batch(net, row_matrix(input), Execution::reference);
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    if (net.layers()[k].activation != Activation::relu) continue;
    std::vector<bool> on;
    for (Eigen::Index j = 0; j < tape.pre[k].cols(); ++j) on.push_back(tape.pre[k](0, j) > 0.0);
    pattern.push_back(std::move(on));
  }
  return pattern;
}

// c . net(input) in long double, with flat parameter `idx` replaced by
// `value`. Keeps roundoff in the central difference well below the checked
// tolerances.
long double extended_objective(const Mlp& net, std::span<const double> input, const std::vector<double>& c,
                               std::size_t idx, long double value) {
  std::vector<long double> x(input.begin(), input.end());
  std::size_t offset = 0;
  for (const auto& l : net.layers()) {
    const auto rows = static_cast<std::size_t>(l.weights.rows());
    const auto cols = static_cast<std::size_t>(l.weights.cols());
    auto param = [&](std::size_t flat, double stored) { return flat == idx ? value : static_cast<long double>(stored); };
    std::vector<long double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      long double z = param(offset + rows * cols + r, l.biases[static_cast<Eigen::Index>(r)]);
      for (std::size_t k = 0; k < cols; ++k)
        z += param(offset + r * cols + k, l.weights.data()[r * cols + k]) * x[k];
      switch (l.activation) {
        case Activation::relu: y[r] = z > 0 ? z : 0; break;
        case Activation::tanh: y[r] = std::tanh(z); break;
        case Activation::identity: y[r] = z; break;
      }
    }
    offset += rows * cols + rows;
    x = std::move(y);
  }
  long double sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += c[i] * x[i];
  return sum;
}

}  // namespace

GradCheckResult finite_diff_check(const Mlp& net, std::span<const double> input, int probe_count,
                                  Rng& rng) {
  const std::size_t total = net.parameter_count();
  if (probe_count <= 0 || static_cast<std::size_t>(probe_count) > total)
    throw std::invalid_argument("finite_diff_check: probe_count must be in [1, parameter_count]");

  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> c(static_cast<std::size_t>(net.output_dim()));
  for (auto& v : c) v = coef(rng);

  const GradientSet analytic = backward(net, input, c);
  std::vector<double> flat;
  flat.reserve(total);
  for (std::size_t k = 0; k < analytic.weights.size(); ++k) {
    flat.insert(flat.end(), analytic.weights[k].data(),
                analytic.weights[k].data() + analytic.weights[k].size());
    flat.insert(flat.end(), analytic.biases[k].data(),
                analytic.biases[k].data() + analytic.biases[k].size());
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto base_pattern = relu_pattern(net, input);
  Mlp probe = net;
  GradCheckResult result;
  for (std::size_t idx : order) {
    if (result.probes == probe_count) break;
    const double original = probe.parameter(idx);
    probe.parameter(idx) = original + kFiniteDiffStep;
    const bool kink_plus = relu_pattern(probe, input) != base_pattern;
    probe.parameter(idx) = original - kFiniteDiffStep;
    const bool kink_minus = relu_pattern(probe, input) != base_pattern;
    probe.parameter(idx) = original;
    if (kink_plus || kink_minus) {
      ++result.kinks_skipped;
      continue;
    }
    const long double h = kFiniteDiffStep;
    const long double f_plus = extended_objective(net, input, c, idx, original + h);
    const long double f_minus = extended_objective(net, input, c, idx, original - h);
    const auto numeric = static_cast<double>((f_plus - f_minus) / (2 * h));
    result.max_relative_error = std::max(result.max_relative_error, relative_error(flat[idx], numeric));
    ++result.probes;
  }
  return result;
}

void save_mlp(std::ostream& os, const Mlp& net) {
  os << "mlp 1\n" << "input " << net.input_dim() << "\n" << "layers " << net.layers().size() << "\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& l : net.layers()) {
    os << "layer " << l.weights.rows() << ' ' << l.weights.cols() << ' ' << to_string(l.activation) << "\n";
    for (Eigen::Index i = 0; i < l.weights.size(); ++i)
      os << l.weights.data()[i] << (i + 1 == l.weights.size() ? '\n' : ' ');
    for (Eigen::Index i = 0; i < l.biases.size(); ++i)
      os << l.biases(i) << (i + 1 == l.biases.size() ? '\n' : ' ');
  }
}

Mlp load_mlp(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word)
      throw std::runtime_error("load_mlp: expected '" + word + "', found '" + got + "'");
  };
  int version = 0, input_dim = 0;
  std::size_t count = 0;
  expect("mlp");
  is >> version;
  if (version != 1) throw std::runtime_error("load_mlp: unsupported version");
  expect("input");
  is >> input_dim;
  expect("layers");
  is >> count;
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k < count; ++k) {
    expect("layer");
    Eigen::Index rows = 0, cols = 0;
    std::string act;
    if (!(is >> rows >> cols >> act)) throw std::runtime_error("load_mlp: truncated layer header");
    DenseLayer l;
    l.activation = activation_from_string(act);
    l.weights.resize(rows, cols);
    l.biases.resize(rows);
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) is >> l.weights.data()[i];
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) is >> l.biases(i);
    if (!is) throw std::runtime_error("load_mlp: truncated parameters");
    layers.push_back(std::move(l));
  }
  return Mlp(input_dim, std::move(layers));
}

void save_mlp_file(const std::string& path, const Mlp& net) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  save_mlp(os, net);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

Mlp load_mlp_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return load_mlp(is);
}

}  // namespace unp
