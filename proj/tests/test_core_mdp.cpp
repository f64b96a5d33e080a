#include <gtest/gtest.h>

#include <cmath>

#include "unp/core_mdp.hpp"
#include "unp/environments.hpp"
#include "unp/shield.hpp"

using namespace unp;

namespace {

FeatureState fs(std::vector<double> v, std::vector<std::string> names) {
  return FeatureState(std::move(v), FeatureState::make_names(std::move(names)));
}

}  // namespace

TEST(FeatureState, RejectsMismatchedOrNonFinite) {
  EXPECT_THROW(fs({1.0, 2.0}, {"a"}), std::invalid_argument);
  EXPECT_THROW(fs({}, {}), std::invalid_argument);
  EXPECT_THROW(fs({NAN}, {"a"}), std::invalid_argument);
  EXPECT_THROW(fs({INFINITY}, {"a"}), std::invalid_argument);
}

TEST(FeatureState, LookupByName) {
  const auto s = fs({0.5, -2.0}, {"theta", "delta"});
  EXPECT_EQ(s.at("delta"), -2.0);
  EXPECT_THROW(s.at("missing"), std::out_of_range);
}

TEST(FeatureState, EqualityComparesValuesAndNames) {
  EXPECT_EQ(fs({1.0}, {"a"}), fs({1.0}, {"a"}));
  EXPECT_NE(fs({1.0}, {"a"}), fs({1.0}, {"b"}));
  EXPECT_NE(fs({1.0}, {"a"}), fs({2.0}, {"a"}));
  EXPECT_EQ(FeatureState(), FeatureState());
}

TEST(ActionSpace, Invariants) {
  EXPECT_THROW(ActionSpace::discrete(1), std::invalid_argument);
  EXPECT_THROW(ActionSpace::continuous(1.0, 1.0), std::invalid_argument);
  EXPECT_TRUE(ActionValue::discrete(1).valid_in(ActionSpace::discrete(2)));
  EXPECT_FALSE(ActionValue::discrete(2).valid_in(ActionSpace::discrete(2)));
  EXPECT_FALSE(ActionValue::continuous(1.5).valid_in(ActionSpace::continuous(-1, 1)));
  EXPECT_FALSE(ActionValue::continuous(0.0).valid_in(ActionSpace::discrete(2)));
  EXPECT_THROW(ActionValue::continuous(0.0).index(), std::logic_error);
  EXPECT_THROW(ActionValue::discrete(0).scalar(), std::logic_error);
}

TEST(RunEpisode, RejectsZeroSteps) {
  CartPole env(1);
  ConstantPolicy p(ActionValue::discrete(0));
  Rng rng(1);
  EXPECT_THROW(run_episode(env, p, nullptr, 0, rng), std::invalid_argument);
}

TEST(RunEpisode, MaxStepsBoundsTheLog) {
  CartPole env(1);
  ConstantPolicy p(ActionValue::discrete(0));
  Rng rng(1);
  const auto log = run_episode(env, p, nullptr, 1, rng);
  EXPECT_EQ(log.steps(), 1u);
  EXPECT_EQ(log.interventions.size(), 1u);
  EXPECT_EQ(log.unsafe_executed.size(), 1u);
}

TEST(RunEpisode, ConstantPushRightFailsEarly) {
  CartPole env(7);
  ConstantPolicy p(ActionValue::discrete(CartPole::push_right));
  Rng rng(1);
  const auto log = run_episode(env, p, nullptr, 1000, rng);
  ASSERT_FALSE(log.transitions.empty());
  EXPECT_TRUE(log.transitions.back().failure);
  EXPECT_LT(log.steps(), 200u);
}

TEST(RunEpisode, InvalidActionFromActorThrows) {
  CartPole env(1);
  ConstantPolicy p(ActionValue::continuous(0.3));
  Rng rng(1);
  EXPECT_THROW(run_episode(env, p, nullptr, 10, rng), std::invalid_argument);
}

namespace {

class BlockRecorder final : public ActionSource {
 public:
  ActionValue act(const FeatureState&, Rng&) override { return ActionValue::discrete(CartPole::push_right); }
  void observe_blocked(const Transition& executed, const ActionValue& proposed, double min_reward,
                       Rng&) override {
    ++blocked;
    EXPECT_EQ(proposed, ActionValue::discrete(CartPole::push_right));
    EXPECT_EQ(executed.action, ActionValue::discrete(CartPole::push_left));
    EXPECT_EQ(min_reward, 0.0);
  }
  int blocked = 0;
};

}  // namespace

TEST(RunEpisode, BlockedProposalsReachTheLearner) {
  CartPole env(1);
  Shield shield(env.unp_spec(), backup_for(EnvKind::cartpole));
  BlockRecorder actor;
  Rng rng(1);
  const auto log = run_episode(env, actor, &shield, 200, rng);
  EXPECT_GT(log.intervention_count(), 0u);
  EXPECT_EQ(static_cast<std::size_t>(actor.blocked), log.intervention_count());

  CartPole bare(1);
  BlockRecorder unshielded;
  run_episode(bare, unshielded, nullptr, 200, rng);
  EXPECT_EQ(unshielded.blocked, 0);
}

class EveryEnv : public ::testing::TestWithParam<EnvKind> {};

TEST_P(EveryEnv, EpisodeLogInvariants) {
  auto env = make_environment(GetParam(), 99);
  RandomPolicy p(env->action_space());
  Rng rng(5);
  for (int ep = 0; ep < 20; ++ep) {
    env->reset();
    const auto log = run_episode(*env, p, nullptr, 400, rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < log.steps(); ++i) {
      sum += log.transitions[i].reward;
      if (log.transitions[i].terminal) EXPECT_EQ(i + 1, log.steps());
      if (log.transitions[i].failure) EXPECT_TRUE(log.transitions[i].terminal);
    }
    EXPECT_NEAR(log.episode_reward, sum, 1e-9);
    EXPECT_EQ(log.interventions.size(), log.steps());
    EXPECT_EQ(log.unsafe_executed.size(), log.steps());
  }
}

TEST_P(EveryEnv, ShieldedEpisodesNeverExecuteUnp) {
  const EnvKind kind = GetParam();
  auto env = make_environment(kind, 3);
  Shield shield(env->unp_spec(), backup_for(kind));
  RandomPolicy p(env->action_space());
  Rng rng(11);
  std::size_t interventions = 0;
  for (int ep = 0; ep < 50; ++ep) {
    env->reset();
    const auto log = run_episode(*env, p, &shield, 2000, rng);
    EXPECT_EQ(log.unsafe_count(), 0u);
    interventions += log.intervention_count();
  }
  EXPECT_GT(interventions, 0u);  // the shield was actually exercised
}

TEST_P(EveryEnv, UnshieldedRunsAreAudited) {
  const EnvKind kind = GetParam();
  auto env = make_environment(kind, 3);
  RandomPolicy p(env->action_space());
  Rng rng(11);
  std::size_t unsafe = 0;
  for (int ep = 0; ep < 50; ++ep) {
    env->reset();
    const auto log = run_episode(*env, p, nullptr, 2000, rng);
    for (std::size_t i = 0; i < log.steps(); ++i)
      EXPECT_EQ(log.unsafe_executed[i],
                env->unp_spec().contains(log.transitions[i].state, log.transitions[i].action));
    unsafe += log.unsafe_count();
    EXPECT_EQ(log.intervention_count(), 0u);
  }
  EXPECT_GT(unsafe, 0u);
}

TEST_P(EveryEnv, ReplayIsBitwiseIdentical) {
  auto run = [&] {
    auto env = make_environment(GetParam(), 2024);
    RandomPolicy p(env->action_space());
    Rng rng(8);
    env->reset();
    return run_episode(*env, p, nullptr, 500, rng);
  };
  EXPECT_EQ(run(), run());
}

INSTANTIATE_TEST_SUITE_P(Envs, EveryEnv,
                         ::testing::Values(EnvKind::cartpole, EnvKind::lanekeep, EnvKind::flappybird),
                         [](const auto& info) { return to_string(info.param); });

TEST(DiscountedReturn, Examples) {
  const std::vector<double> ones{1, 1, 1};
  EXPECT_NEAR(discounted_return(ones, 0.99), 2.9701, 1e-12);
  const std::vector<double> five{5};
  EXPECT_EQ(discounted_return(five, 0.3), 5.0);
  const std::vector<double> zeros(7, 0.0);
  EXPECT_EQ(discounted_return(zeros, 0.9), 0.0);
}

TEST(DiscountedReturn, Errors) {
  const std::vector<double> r{1};
  EXPECT_THROW(discounted_return(r, 0.0), std::invalid_argument);
  EXPECT_THROW(discounted_return(r, 1.01), std::invalid_argument);
  EXPECT_THROW(discounted_return({}, 0.9), std::invalid_argument);
  EXPECT_EQ(discounted_return(r, 1.0), 1.0);
}
