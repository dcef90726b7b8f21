#include "budget_bandit/ucb.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "budget_bandit/harness.hpp"
#include "gtest/gtest.h"

namespace budget_bandit {
namespace {

Feedback censored(std::vector<std::uint8_t> done, std::vector<double> rewards) {
  Feedback fb;
  fb.completions = std::move(done);
  fb.censored_rewards = std::move(rewards);
  for (double r : *fb.censored_rewards) fb.realized_gain += r;
  return fb;
}

TEST(UcbTest, DefaultDelta) {
  EXPECT_DOUBLE_EQ(make_ucb_state(2, 5).delta, 0.01);
  EXPECT_DOUBLE_EQ(make_ucb_state(1, 1).delta, 0.5);
  EXPECT_DOUBLE_EQ(make_ucb_state(3, 7, 0.05).delta, 0.05);
  EXPECT_THROW(make_ucb_state(2, 5, 1.0), DomainError);
  EXPECT_THROW(make_ucb_state(2, 5, 0.0), DomainError);
  EXPECT_THROW(make_ucb_state(0, 5), ConfigError);
}

TEST(UcbTest, InitialIndexIsConfidenceWidth) {
  const auto s = make_ucb_state(3, 10, 0.02);
  for (double u : ucb_vector(s)) EXPECT_NEAR(u, 2.145966026289347, 1e-12);  // sqrt(log 100)
}

TEST(UcbTest, IndexAfterOneObservation) {
  auto s = make_ucb_state(1, 10, 2.0 / std::exp(2.0));
  s = update(s, censored({1}, {1.0}));
  EXPECT_NEAR(ucb_vector(s)[0], 2.0, 1e-12);
}

TEST(UcbTest, NoCompletionLeavesIndexUnchanged) {
  auto s = make_ucb_state(2, 10);
  const auto before = ucb_vector(s);
  s = update(s, censored({0, 0}, {0, 0}));
  EXPECT_EQ(ucb_vector(s), before);
  EXPECT_EQ(s.round, 1U);
  EXPECT_EQ(s.counts, (std::vector<std::uint64_t>{0, 0}));
}

TEST(UcbTest, UpdateAccumulates) {
  auto s = make_ucb_state(2, 10);
  s = update(s, censored({1, 0}, {0.7, 0}));
  EXPECT_EQ(s.counts, (std::vector<std::uint64_t>{1, 0}));
  EXPECT_EQ(s.reward_sums, (std::vector<double>{0.7, 0}));
  s = update(s, censored({1, 0}, {0.2, 0}));
  EXPECT_EQ(s.counts[0], 2U);
  EXPECT_DOUBLE_EQ(s.reward_sums[0], 0.9);
}

TEST(UcbTest, UpdateRequiresCensoredFields) {
  auto s = make_ucb_state(2, 10);
  Feedback full_only;
  full_only.completions = {1, 0};
  full_only.full_rewards = std::vector<double>{0.3, 0.4};
  EXPECT_THROW(update(s, full_only), ContractError);
  EXPECT_THROW(update(s, censored({1}, {0.3})), ContractError);
}

TEST(UcbTest, SelectExamples) {
  const std::vector<CurveSpec> pw{CurveSpec::power(0.5), CurveSpec::power(0.5)};
  const auto fresh = select(make_ucb_state(2, 100), pw);
  EXPECT_NEAR(fresh[0], 0.5, 1e-12);

  // 2K step tasks with threshold 1/K: ties go to the first K tasks.
  const std::vector<CurveSpec> steps(6, CurveSpec::step(1.0 / 3));
  const auto x = select(make_ucb_state(6, 100), steps);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(x[k] > 0.0, k < 3);

  // UCB = (2, 1) gives x proportional to UCB^2 = (4/5, 1/5).
  UcbState s = make_ucb_state(2, 100, 2.0 / std::exp(4.0));  // log(2/delta) = 4
  s.counts = {3, 15};
  s.reward_sums = {3.0, 7.5};  // 1 + sqrt(4/4), 0.5 + sqrt(4/16)
  const auto u = ucb_vector(s);
  ASSERT_NEAR(u[0], 2.0, 1e-12);
  ASSERT_NEAR(u[1], 1.0, 1e-12);
  const auto y = select(s, pw);
  EXPECT_NEAR(y[0], 0.8, 1e-12);
  EXPECT_NEAR(y[1], 0.2, 1e-12);
}

TEST(UcbTest, SnapshotRoundTrip) {
  auto s = make_ucb_state(3, 50);
  s = update(s, censored({1, 0, 1}, {0.25, 0, 1.0}));
  EXPECT_EQ(ucb_state_from_json(ucb_state_to_json(s)), s);
  EXPECT_THROW(ucb_state_from_json(nlohmann::json::parse(R"({"tasks":2})")), ConfigError);
}

TEST(UcbPropertyTest, IndexInvariants) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = make_ucb_state(3, 1000, 0.001 + 0.4 * unit(gen));
    const double width = std::sqrt(std::log(2.0 / s.delta));
    std::vector<double> last_bonus(3, width + 1);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::uint8_t> done(3);
      std::vector<double> r(3, 0.0);
      for (std::size_t k = 0; k < 3; ++k) {
        done[k] = unit(gen) < 0.5;
        if (done[k]) r[k] = unit(gen);
      }
      const auto prev = s;
      s = update(s, censored(done, r));
      const auto u = ucb_vector(s);
      for (std::size_t k = 0; k < 3; ++k) {
        const double mean = s.counts[k] ? s.reward_sums[k] / s.counts[k] : 0.0;
        EXPECT_GE(u[k], mean);
        EXPECT_GE(u[k], 0.0);
        EXPECT_LE(u[k], 1.0 + width + 1e-12);
        EXPECT_LE(s.reward_sums[k], static_cast<double>(s.counts[k]));
        EXPECT_LE(s.counts[k], s.round);
        if (s.counts[k] > prev.counts[k]) {
          EXPECT_LT(confidence_bonus(s.delta, s.counts[k]), confidence_bonus(s.delta, prev.counts[k]));
        }
      }
    }
  }
}

TEST(UcbPropertyTest, ReplayIsDeterministicAndIgnoresFullRewards) {
  const auto inst = make_power_instance(std::vector<double>{0.5, 0.3, 0.7},
                                        std::vector<double>{0.9, 0.4, 0.6});
  std::vector<Feedback> log;
  auto s = make_ucb_state(3, 200);
  for (std::uint64_t t = 1; t <= 200; ++t) {
    const auto x = select(s, inst.curves());
    log.push_back(step(inst, x, FeedbackMode::Full, CounterRng(6, t)));
    s = update(s, log.back());
  }
  auto replay = make_ucb_state(3, 200);
  auto tampered = make_ucb_state(3, 200);
  for (auto fb : log) {
    replay = update(replay, fb);
    for (double& g : *fb.full_rewards) g = 1.0 - g;
    tampered = update(tampered, fb);
    EXPECT_EQ(replay, tampered);
    EXPECT_EQ(select(replay, inst.curves()), select(tampered, inst.curves()));
  }
  EXPECT_EQ(replay, s);
}

}  // namespace
}  // namespace budget_bandit
