#include "unp/gradcheck.hpp"

#include "unp/agents.hpp"
#include "unp/critic.hpp"

namespace unp {

namespace {

std::vector<double> random_input(int dim, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, int probes) {
  Rng rng(seed);
  std::vector<GradCheckCase> out;
  auto check = [&](const std::string& name, const Mlp& net, double tol) {
    const auto x = random_input(net.input_dim(), rng);
    out.push_back({name, finite_diff_check(net, x, probes, rng), tol});
  };

  check("linear 6-12-4", Mlp::random(6, {{12, Activation::identity}, {4, Activation::identity}}, rng), 1e-8);
  check("tanh 4-16-16-2",
        Mlp::random(4, {{16, Activation::tanh}, {16, Activation::tanh}, {2, Activation::identity}}, rng),
        1e-4);
  for (EnvKind kind : {EnvKind::cartpole, EnvKind::flappybird}) {
    auto layers = DdqnAgent::hidden_layers(kind);
    layers.push_back({2, Activation::identity});
    check("ddqn " + to_string(kind), Mlp::random(4, layers, rng), 1e-4);
  }
  Hyperparameters hp = Hyperparameters::for_env(EnvKind::lanekeep);
  const DdpgAgent ddpg = DdpgAgent::for_env(EnvKind::lanekeep, hp, rng);
  check("ddpg actor", ddpg.actor(), 1e-4);
  const auto s = random_input(4, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  out.push_back({"ddpg critic", critic_finite_diff_check(ddpg.critic(), s, u(rng), probes, rng), 1e-4});
  return out;
}

}  // namespace unp
