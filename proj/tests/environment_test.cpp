#include "budget_bandit/environment.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "budget_bandit/harness.hpp"
#include "gtest/gtest.h"
#include "test_support.hpp"

namespace budget_bandit {
namespace {

Instance single(CurveSpec c, RewardDistribution r) {
  return Instance({std::move(c)}, {std::move(r)});
}

TEST(EnvironmentTest, CertainCompletion) {
  const auto inst = single(CurveSpec::step(1.0), RewardDistribution::point_mass(1.0));
  for (std::uint64_t t = 1; t <= 100; ++t) {
    const auto fb = step(inst, Allocation::vertex(1, 0), FeedbackMode::Censored, CounterRng(3, t));
    EXPECT_EQ(fb.completions[0], 1);
    EXPECT_EQ(fb.realized_gain, 1.0);
  }
}

TEST(EnvironmentTest, BelowThresholdNeverCompletes) {
  const Instance inst({CurveSpec::step(0.6), CurveSpec::step(0.6)},
                      {RewardDistribution::bernoulli(0.9), RewardDistribution::bernoulli(0.9)});
  for (std::uint64_t t = 1; t <= 100; ++t) {
    const auto fb = step(inst, Allocation::uniform(2), FeedbackMode::Censored, CounterRng(3, t));
    EXPECT_EQ(fb.completions, (std::vector<std::uint8_t>{0, 0}));
    EXPECT_EQ(fb.realized_gain, 0.0);
  }
}

TEST(EnvironmentTest, MonteCarloGainMatchesExpectation) {
  const auto inst = single(CurveSpec::power(0.5), RewardDistribution::bernoulli(0.5));
  double total = 0.0;
  const int draws = 100'000;
  for (int t = 1; t <= draws; ++t) {
    total += step(inst, Allocation::vertex(1, 0), FeedbackMode::Censored, CounterRng(17, t)).realized_gain;
  }
  EXPECT_NEAR(total / draws, 0.5, 0.01);
}

TEST(EnvironmentTest, CompletionFrequencyIsUnbiased) {
  const Instance inst({CurveSpec::power(0.5), CurveSpec::piecewise({{0, 0}, {0.5, 0.3}, {1, 1}})},
                      {RewardDistribution::bernoulli(0.5), RewardDistribution::bernoulli(0.5)});
  const auto x = Allocation::from_weights({0.3, 0.7});
  const int draws = 100'000;
  std::vector<double> hits(2, 0.0);
  for (int t = 1; t <= draws; ++t) {
    const auto fb = step(inst, x, FeedbackMode::Censored, CounterRng(5, t));
    for (std::size_t k = 0; k < 2; ++k) hits[k] += fb.completions[k];
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const double p = eval(inst.curves()[k], x[k]);
    const double stderr_ = std::sqrt(p * (1 - p) / draws);
    EXPECT_NEAR(hits[k] / draws, p, 3 * stderr_);
  }
}

TEST(EnvironmentTest, ExpectedRewardExamples) {
  const auto hard = make_hard_instance(1, 100, std::vector<int>{1});
  EXPECT_NEAR(expected_reward(hard, Allocation::vertex(2, 0)), 0.6, 1e-15);

  const Instance steps({CurveSpec::step(0.6), CurveSpec::step(0.6)},
                       {RewardDistribution::bernoulli(0.9), RewardDistribution::bernoulli(0.9)});
  EXPECT_EQ(expected_reward(steps, Allocation::uniform(2)), 0.0);
}

TEST(EnvironmentTest, ExpectedRewardAgreesWithMonteCarlo) {
  const Instance inst({CurveSpec::power(0.5), CurveSpec::power(0.5)},
                      {RewardDistribution::bernoulli(0.8), RewardDistribution::bernoulli(0.2)});
  const auto x = Allocation::from_weights({16.0 / 17, 1.0 / 17});
  const double exact = expected_reward(inst, x);
  EXPECT_NEAR(exact, 0.8 * std::sqrt(16.0 / 17) + 0.2 * std::sqrt(1.0 / 17), 1e-15);
  EXPECT_NEAR(exact, 0.8246, 1e-4);
  double total = 0.0;
  const int draws = 1'000'000;
  for (int t = 1; t <= draws; ++t) total += step(inst, x, FeedbackMode::Censored, CounterRng(9, t)).realized_gain;
  // Gain per round is in [0,2]; 4 sigma of a variance-at-most-1 mean.
  EXPECT_NEAR(total / draws, exact, 4.0 / std::sqrt(draws));
}

TEST(EnvironmentTest, OptimalValueExamples) {
  for (std::size_t pairs : {1U, 2U, 4U}) {
    const std::uint64_t T = 400;
    const auto inst = make_hard_instance(pairs, T, std::nullopt, 77);
    EXPECT_NEAR(optimal_value(inst).value, static_cast<double>(pairs) * (0.5 + 1.0 / 20.0), 1e-12);
  }
  const auto one = optimal_value(single(CurveSpec::power(0.3), RewardDistribution::point_mass(0.4)));
  EXPECT_EQ(one.allocation[0], 1.0);
  EXPECT_DOUBLE_EQ(one.value, 0.4);

  const Instance pw({CurveSpec::power(0.5), CurveSpec::power(0.5)},
                    {RewardDistribution::bernoulli(0.8), RewardDistribution::bernoulli(0.2)});
  const auto best = optimal_value(pw);
  EXPECT_NEAR(best.allocation[0], 16.0 / 17, 1e-12);
  double mesh_arg = 0.0;
  testing::brute_force_pair([&](double a, double b) { return 0.8 * std::sqrt(a) + 0.2 * std::sqrt(b); },
                            10'000, &mesh_arg);
  EXPECT_NEAR(best.allocation[0], mesh_arg, 1e-4);
}

TEST(EnvironmentTest, OptimalValueDominatesGridPoints) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Instance inst({CurveSpec::power(0.1 + 0.8 * unit(gen)), CurveSpec::power(0.1 + 0.8 * unit(gen))},
                        {RewardDistribution::bernoulli(unit(gen)), RewardDistribution::bernoulli(unit(gen))});
    const double best = optimal_value(inst).value;
    for (int i = 0; i <= 100; ++i) {
      EXPECT_LE(expected_reward(inst, Allocation::from_weights({i / 100.0, 1 - i / 100.0})), best + 1e-12);
    }
  }
}

TEST(EnvironmentTest, OptimalValueRejectsMixedFamilies) {
  const Instance mixed({CurveSpec::power(0.5), CurveSpec::step(0.5)},
                       {RewardDistribution::bernoulli(0.5), RewardDistribution::bernoulli(0.5)});
  try {
    optimal_value(mixed);
    FAIL();
  } catch (const UnsupportedInstance& e) {
    EXPECT_NE(std::string(e.what()).find("grid"), std::string::npos);
  }
}

TEST(EnvironmentTest, DimensionMismatch) {
  const auto inst = single(CurveSpec::power(0.5), RewardDistribution::bernoulli(0.5));
  EXPECT_THROW(step(inst, Allocation::uniform(2), FeedbackMode::Censored, CounterRng(1, 1)), ConfigError);
  EXPECT_THROW(expected_reward(inst, Allocation::uniform(3)), ConfigError);
  EXPECT_THROW(Instance({CurveSpec::power(0.5)}, {}), ConfigError);
}

TEST(EnvironmentTest, AllocationValidation) {
  EXPECT_THROW(Allocation::from_weights({0.5, 0.6}), DomainError);
  EXPECT_THROW(Allocation::from_weights({-0.1, 1.1}), DomainError);
  EXPECT_THROW(Allocation::from_weights({}), ConfigError);
  const auto x = Allocation::from_weights({0.5 + 4e-10, 0.5});
  EXPECT_NEAR(x[0] + x[1], 1.0, 1e-15);
}

TEST(EnvironmentTest, RewardLaws) {
  EXPECT_THROW(RewardDistribution::bernoulli(1.2), DomainError);
  EXPECT_THROW(RewardDistribution::discrete({0.2, 0.8}, {0.5, 0.6}), DomainError);
  const auto d = RewardDistribution::discrete({0.2, 0.8}, {0.25, 0.75});
  EXPECT_DOUBLE_EQ(d.mean(), 0.65);
  EXPECT_EQ(d.sample(0.1), 0.2);
  EXPECT_EQ(d.sample(0.3), 0.8);
  EXPECT_EQ(RewardDistribution::point_mass(0.3).sample(0.99), 0.3);
}

TEST(EnvironmentPropertyTest, SeedDeterminism) {
  const Instance inst({CurveSpec::power(0.4), CurveSpec::step(0.3)},
                      {RewardDistribution::bernoulli(0.5), RewardDistribution::discrete({0, 0.5, 1}, {0.2, 0.3, 0.5})});
  const auto x = Allocation::from_weights({0.6, 0.4});
  for (std::uint64_t t = 1; t <= 200; ++t) {
    const auto a = step(inst, x, FeedbackMode::Full, CounterRng(42, t));
    const auto b = step(inst, x, FeedbackMode::Full, CounterRng(42, t));
    EXPECT_EQ(a.completions, b.completions);
    EXPECT_EQ(*a.censored_rewards, *b.censored_rewards);
    EXPECT_EQ(*a.full_rewards, *b.full_rewards);
  }
}

TEST(EnvironmentPropertyTest, CensoringConsistency) {
  const Instance inst({CurveSpec::power(0.4), CurveSpec::power(0.7)},
                      {RewardDistribution::bernoulli(0.5), RewardDistribution::bernoulli(0.3)});
  const auto x = Allocation::from_weights({0.3, 0.7});
  for (std::uint64_t t = 1; t <= 500; ++t) {
    const auto c = step(inst, x, FeedbackMode::Censored, CounterRng(8, t));
    EXPECT_FALSE(c.full_rewards.has_value());
    const auto f = step(inst, x, FeedbackMode::Full, CounterRng(8, t));
    ASSERT_TRUE(f.full_rewards.has_value());
    double sum = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ((*f.censored_rewards)[k], f.completions[k] * (*f.full_rewards)[k]);
      if (!c.completions[k]) {
        EXPECT_EQ((*c.censored_rewards)[k], 0.0);
      }
      sum += (*c.censored_rewards)[k];
    }
    EXPECT_EQ(c.realized_gain, sum);
    EXPECT_EQ(c.completions, f.completions);
  }
}

TEST(EnvironmentPropertyTest, RewardDrawsIgnoreCurves) {
  const Instance a({CurveSpec::power(0.4), CurveSpec::power(0.7)},
                   {RewardDistribution::bernoulli(0.5), RewardDistribution::bernoulli(0.3)});
  const Instance b({CurveSpec::step(0.9), CurveSpec::piecewise({{0, 0}, {1, 1}})},
                   {RewardDistribution::bernoulli(0.5), RewardDistribution::bernoulli(0.3)});
  const auto x = Allocation::from_weights({0.3, 0.7});
  for (std::uint64_t t = 1; t <= 300; ++t) {
    EXPECT_EQ(*step(a, x, FeedbackMode::Full, CounterRng(4, t)).full_rewards,
              *step(b, x, FeedbackMode::Full, CounterRng(4, t)).full_rewards);
  }
}

TEST(EnvironmentTest, InstanceJsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"({"tasks":[
      {"curve":{"type":"power","a":0.5},"reward":{"type":"bernoulli","mean":0.5}},
      {"curve":{"type":"step","threshold":0.25},"reward":{"type":"point","value":0.3}},
      {"curve":{"type":"piecewise","knots":[[0,0],[1,1]]},
       "reward":{"type":"discrete","values":[0,1],"probs":[0.5,0.5]}}]})");
  const auto inst = instance_from_json(j);
  EXPECT_EQ(inst.size(), 3U);
  EXPECT_EQ(instance_to_json(instance_from_json(instance_to_json(inst))), instance_to_json(inst));
  EXPECT_THROW(instance_from_json(nlohmann::json::parse(R"({"tasks":[{"curve":{"type":"power","a":0.5}}]})")),
               ConfigError);
}

}  // namespace
}  // namespace budget_bandit
