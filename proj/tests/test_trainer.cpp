#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rampq/controllers.hpp"
#include "rampq/errors.hpp"
#include "rampq/replay.hpp"
#include "rampq/trainer.hpp"

using namespace rampq;

namespace {

EnvConfig small_env(double episode_s = 200) {
  EnvConfig e;
  e.encoder.cols_out = 16;
  e.episode_s = episode_s;
  return e;
}

TrainerConfig small_trainer() {
  TrainerConfig c;
  c.network = NetworkSpec::reduced();
  c.warmup_transitions = 64;
  c.buffer_size = 2000;
  c.total_frames = 800;
  c.freeze_interval = 50;
  return c;
}

EnvFactory factory(const EnvConfig& e) {
  return [e](std::uint64_t seed) { return RampEnv(e, seed); };
}

Transition tagged(double tag) {
  Transition t;
  t.reward = tag;
  return t;
}

}  // namespace

TEST(Reward, HandExample) {
  const std::vector<double> v(4, 10.0), q(4, 20.0);
  EXPECT_NEAR(compute_reward(v, q, 0.5, -0.1, 4), 3.0, 1e-12);
}

TEST(Reward, DegenerateWindows) {
  const std::vector<double> zero(4, 0.0);
  EXPECT_EQ(compute_reward(zero, zero, 0.5, -0.1, 4), 0.0);
  const std::vector<double> v = {3, 9, 12, 20};
  EXPECT_NEAR(compute_reward(v, zero, 0.5, -0.1, 4), 0.5 * 11.0, 1e-12);
}

TEST(Reward, ContractViolations) {
  const std::vector<double> v(4, 1.0), q3(3, 1.0);
  EXPECT_THROW(compute_reward(v, q3, 0.5, -0.1, 4), ContractError);
  EXPECT_THROW(compute_reward(v, v, 0.5, -0.1, 5), ContractError);
  EXPECT_THROW(compute_reward(v, v, 0.0, -0.1, 4), ContractError);
  EXPECT_THROW(compute_reward(v, v, 0.5, 0.1, 4), ContractError);
}

TEST(Reward, MatchesIndependentEvaluation) {
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t L = 1 + rng.index(8);
    std::vector<double> v(L), q(L);
    for (auto& x : v) x = rng.uniform(0, 22.3);
    for (auto& x : q) x = rng.uniform(0, 300);
    const double mu = rng.uniform(0.01, 2), omega = -rng.uniform(0.01, 2);
    const double r = compute_reward(v, q, mu, omega, L);
    const double ref = oracle::window_reward(v, q, mu, omega);
    ASSERT_LE(std::abs(r - ref), 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST(EpsilonGreedy, ZeroEpsilonIsGreedy) {
  Rng rng(1);
  const std::vector<float> q = {0.2f, 0.9f};
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(epsilon_greedy(q, 0.0, rng), dqn_decide(q));
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  Rng rng(2);
  const std::vector<float> q = {0.2f, 0.9f};
  const int n = 100000;
  int r = 0;
  for (int i = 0; i < n; ++i) r += epsilon_greedy(q, 1.0, rng) == SignalPhase::R;
  EXPECT_NEAR(static_cast<double>(r) / n, 0.5, 0.01);
}

TEST(EpsilonGreedy, TenPercentExploration) {
  Rng rng(3);
  const std::vector<float> q = {0.2f, 0.9f};
  const int n = 100000;
  int r = 0;
  for (int i = 0; i < n; ++i) r += epsilon_greedy(q, 0.1, rng) == SignalPhase::R;
  EXPECT_NEAR(static_cast<double>(r) / n, 1 - 0.1 + 0.05, 0.01);
}

TEST(Replay, RingEvictsOldestFirst) {
  ReplayBuffer b(5);
  for (int i = 0; i < 6; ++i) b.store(tagged(i));
  EXPECT_EQ(b.size(), 5u);
  EXPECT_EQ(b.at(0).reward, 1.0);
  EXPECT_EQ(b.at(4).reward, 5.0);
}

TEST(Replay, SampleCountsAndContract) {
  ReplayBuffer b(100);
  Rng rng(4);
  EXPECT_THROW(b.sample_indices(1, rng), ContractError);
  for (int i = 0; i < 10; ++i) b.store(tagged(i));
  EXPECT_EQ(b.sample_indices(10, rng).size(), 10u);
  EXPECT_THROW(b.sample_indices(11, rng), ContractError);
}

TEST(Replay, DrawsAreUniform) {
  ReplayBuffer b(1000);
  for (int i = 0; i < 1500; ++i) b.store(tagged(i));
  Rng rng(5);
  std::vector<long long> counts(1000, 0);
  for (int i = 0; i < 100; ++i) {
    for (auto idx : b.sample_indices(1000, rng)) ++counts[idx];
  }
  const double p = oracle::chi_square_sf(oracle::chi_square_uniform(counts), 999);
  EXPECT_GT(p, 0.01);
}

TEST(Env, DecisionCadence) {
  RampEnv env(small_env(40), 1);
  env.observe();
  int decisions = 0;
  while (!env.done()) {
    const StepResult r = env.step(SignalPhase::G);
    ASSERT_EQ(r.speeds.size(), 4u);
    ++decisions;
  }
  EXPECT_EQ(decisions, 10);
  EXPECT_DOUBLE_EQ(env.simulator().time(), 40.0);
}

TEST(Env, RejectsFractionalDecisionStep) {
  EnvConfig e = small_env();
  e.decision_step = 2.5;
  EXPECT_THROW(RampEnv(e, 1), ConfigError);
}

TEST(Warmup, FillsExactlyAndKeepsRewardIdentity) {
  const TrainerConfig cfg = small_trainer();
  const EnvFactory make = factory(small_env());
  {
    ReplayBuffer b(1000);
    Rng rng(1);
    warmup_fill(b, make, rng, 0, cfg);
    EXPECT_EQ(b.size(), 0u);
  }
  ReplayBuffer b(1000);
  Rng rng(1);
  warmup_fill(b, make, rng, 500, cfg);
  ASSERT_EQ(b.size(), 500u);
  int reds = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Transition& t = b.at(i);
    ASSERT_NEAR(t.reward, cfg.mu * t.speed + cfg.omega * t.queue, 1e-6);
    const Experience<float> e = to_experience(t, 3);
    ASSERT_EQ(e.state.size(), static_cast<std::size_t>(cfg.network.input_size()));
    ASSERT_EQ(e.next_state.size(), e.state.size());
    reds += t.action == SignalPhase::R;
  }
  EXPECT_GT(reds, 150);
  EXPECT_LT(reds, 350);
}

TEST(Learner, SyncCopiesAndFreezes) {
  const TrainerConfig cfg = small_trainer();
  Rng rng(2);
  Learner l(cfg.network, rng);
  EXPECT_EQ(l.weights, l.target);
  ReplayBuffer b(1000);
  Rng wrng(3);
  warmup_fill(b, factory(small_env()), wrng, 200, cfg);
  TrainerConfig c = cfg;
  c.freeze_interval = 1000;
  Rng brng(4);
  const auto frozen = l.target;
  for (int i = 0; i < 10; ++i) train_step(b, l, c, brng);
  EXPECT_EQ(l.target, frozen);
  EXPECT_NE(l.weights, frozen);
  l.sync_target();
  EXPECT_EQ(l.target, l.weights);
  std::vector<float> x(cfg.network.input_size(), 0.5f);
  EXPECT_EQ(l.net.evaluate(l.weights, x).q, l.net.evaluate(l.target, x).q);
}

TEST(TrainStep, FreezeIntervalOfOneSyncsEveryStep) {
  TrainerConfig cfg = small_trainer();
  cfg.freeze_interval = 1;
  Rng rng(2);
  Learner l(cfg.network, rng);
  ReplayBuffer b(1000);
  Rng wrng(3);
  warmup_fill(b, factory(small_env()), wrng, 100, cfg);
  Rng brng(4);
  for (int i = 0; i < 5; ++i) {
    train_step(b, l, cfg, brng);
    ASSERT_EQ(l.target, l.weights);
  }
}

TEST(TrainStep, SyncCountIsFloorOfUpdatesOverF) {
  TrainerConfig cfg = small_trainer();
  cfg.freeze_interval = 7;
  Rng rng(2);
  Learner l(cfg.network, rng);
  ReplayBuffer b(1000);
  Rng wrng(3);
  warmup_fill(b, factory(small_env()), wrng, 100, cfg);
  Rng brng(4);
  for (int f = 1; f <= 30; ++f) {
    train_step(b, l, cfg, brng);
    ASSERT_EQ(l.syncs, f / 7);
  }
  EXPECT_EQ(l.syncs, 4);
}

TEST(TrainStep, LossFallsOnStationaryBuffer) {
  TrainerConfig cfg = small_trainer();
  cfg.learning_rate = 1e-3;
  cfg.freeze_interval = 100000;  // fixed targets: plain regression
  cfg.speed_scale = 22.22;
  cfg.queue_scale = 300;
  Rng rng(5);
  Learner l(cfg.network, rng);
  ReplayBuffer b(1000);
  Rng wrng(6);
  warmup_fill(b, factory(small_env()), wrng, 300, cfg);
  Rng probe_rng(7);
  const auto probe = b.sample(64, probe_rng, 3);
  const double before = compute_loss<float>(l.net, l.weights, l.target, probe, cfg.loss()).total;
  Rng brng(8);
  for (int i = 0; i < 500; ++i) train_step(b, l, cfg, brng);
  const double after = compute_loss<float>(l.net, l.weights, l.target, probe, cfg.loss()).total;
  EXPECT_LT(after, before);
}

TEST(TrainLoop, RunsToFrameBudgetDeterministically) {
  const TrainerConfig cfg = small_trainer();
  const EnvFactory make = factory(small_env());
  std::vector<std::string> rows_a, rows_b;
  TrainHooks ha, hb;
  ha.on_episode = [&](const EpisodeLog& e) { rows_a.push_back(training_log_row(e)); };
  hb.on_episode = [&](const EpisodeLog& e) { rows_b.push_back(training_log_row(e)); };
  const TrainResult a = train_loop(make, cfg, ha);
  const TrainResult b = train_loop(make, cfg, hb);
  EXPECT_EQ(rows_a, rows_b);
  EXPECT_EQ(a.weights, b.weights);
  ASSERT_FALSE(a.log.empty());
  EXPECT_EQ(a.log.back().frames, cfg.total_frames);
  EXPECT_EQ(a.log.size(), 4u);  // 200 s episodes
  EXPECT_EQ(a.syncs, a.updates / cfg.freeze_interval);
  EXPECT_EQ(training_log_header(), "episode,frames,mean_reward,L1,L2,epsilon,syncs");
}

TEST(TrainLoop, CheckpointHookFollowsInterval) {
  TrainerConfig cfg = small_trainer();
  cfg.checkpoint_interval = 200;
  std::vector<std::int64_t> at;
  TrainHooks h;
  h.on_checkpoint = [&](std::int64_t frames, std::span<const float> w) {
    at.push_back(frames);
    EXPECT_EQ(w.size(), QNetwork<float>(cfg.network).parameter_count());
  };
  train_loop(factory(small_env()), cfg, h);
  EXPECT_EQ(at, (std::vector<std::int64_t>{200, 400, 600, 800}));
}

TEST(TrainLoop, RejectsMismatchedNetwork) {
  TrainerConfig cfg = small_trainer();
  cfg.network = NetworkSpec{};
  EXPECT_THROW(train_loop(factory(small_env()), cfg), ConfigError);
}

TEST(TrainerConfig, ValidatesSigns) {
  TrainerConfig c;
  c.mu = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.omega = 0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 300000;
  EXPECT_THROW(c.validate(), ConfigError);
}
