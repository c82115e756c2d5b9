#include "rampq/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "rampq/controllers.hpp"
#include "rampq/errors.hpp"

namespace rampq {

void TrainerConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string("trainer.") + key + ": " + what);
  };
  require(batch_size > 0, "batch_size", "must be positive");
  require(learning_rate > 0, "learning_rate", "must be positive");
  require(epsilon >= 0 && epsilon <= 1, "epsilon", "must lie in [0, 1]");
  require(freeze_interval > 0, "freeze_interval", "must be positive");
  require(decision_step > 0, "decision_step", "must be positive");
  require(mu > 0, "mu", "speed weight must be positive");
  require(omega < 0, "omega", "queue weight must be negative");
  require(gamma >= 0 && gamma < 1, "gamma", "must lie in [0, 1)");
  require(lambda >= 0, "lambda", "must be non-negative");
  require(total_frames >= 0, "total_frames", "must be non-negative");
  require(buffer_size > 0, "buffer_size", "must be positive");
  require(static_cast<std::size_t>(batch_size) <= buffer_size, "batch_size", "must not exceed buffer_size");
  require(warmup_transitions >= 0 && static_cast<std::size_t>(warmup_transitions) <= buffer_size,
          "warmup_transitions", "must lie in [0, buffer_size]");
  require(checkpoint_interval >= 0, "checkpoint_interval", "must be non-negative");
  network.validate();
}

RampEnv::RampEnv(const EnvConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      sim_(build_network(cfg.geometry), cfg.demand, cfg.drivers, seed),
      encoder_(sim_.network(), cfg.encoder) {
  const double ratio = cfg.decision_step / cfg.drivers.dt;
  steps_per_decision_ = static_cast<int>(std::lround(ratio));
  if (steps_per_decision_ < 1 || std::abs(ratio - steps_per_decision_) > 1e-9)
    throw ConfigError("trainer.decision_step: must be a whole number of simulation steps");
}

StateTensor RampEnv::observe() {
  const auto vehicles = sim_.vehicles();
  return encoder_.observe(vehicles, last_);
}

StepResult RampEnv::step(SignalPhase action) {
  sim_.apply_signal(action);
  last_ = action;
  StepResult r;
  r.speeds.reserve(steps_per_decision_);
  r.queues.reserve(steps_per_decision_);
  for (int i = 0; i < steps_per_decision_; ++i) {
    sim_.step();
    const ProbeSample& p = sim_.metrics().samples.back();
    r.speeds.push_back(p.merge_speed);
    r.queues.push_back(p.ramp_queue);
  }
  for (std::size_t i = 0; i < r.speeds.size(); ++i) {
    r.mean_speed += r.speeds[i];
    r.mean_queue += r.queues[i];
  }
  r.mean_speed /= static_cast<double>(r.speeds.size());
  r.mean_queue /= static_cast<double>(r.queues.size());
  return r;
}

double compute_reward(std::span<const double> speeds, std::span<const double> queues, double mu,
                      double omega, std::size_t expected) {
  if (speeds.size() != expected || queues.size() != expected || expected == 0)
    throw ContractError("compute_reward: window must hold exactly " + std::to_string(expected) + " samples");
  if (!(mu > 0) || !(omega < 0)) throw ContractError("compute_reward: need mu > 0 and omega < 0");
  double sum = 0.0;
  for (std::size_t j = 0; j < expected; ++j) sum += mu * speeds[j] + omega * queues[j];
  return sum / static_cast<double>(expected);
}

SignalPhase epsilon_greedy(std::span<const float> q_values, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) return phase_from_index(static_cast<int>(rng.index(kActionCount)));
  return dqn_decide(q_values);
}

SignalPhase epsilon_greedy(const QNetwork<float>& net, std::span<const float> weights,
                           const StateTensor& state, double epsilon, Rng& rng) {
  Activations<float> a;
  net.forward(weights, state.flat(), a);
  return epsilon_greedy(a.q, epsilon, rng);
}

Learner::Learner(const NetworkSpec& spec, Rng& rng)
    : net(spec), weights(net.init_weights(rng)), target(weights), adam(weights.size()),
      grad(weights.size(), 0.0f) {}

void Learner::sync_target() {
  target = weights;
  ++syncs;
}

void warmup_fill(ReplayBuffer& buffer, const EnvFactory& make_env, Rng& rng, std::int64_t n,
                 const TrainerConfig& cfg) {
  if (n < 0 || static_cast<std::size_t>(n) > buffer.capacity())
    throw ContractError("warmup_fill: n_warmup must lie in [0, B]");
  std::int64_t stored = 0;
  while (stored < n) {
    RampEnv env = make_env(rng.next());
    env.observe();
    auto state = env.compact_state();
    while (!env.done() && stored < n) {
      const SignalPhase a = phase_from_index(static_cast<int>(rng.index(kActionCount)));
      const StepResult res = env.step(a);
      const double r = compute_reward(res.speeds, res.queues, cfg.mu, cfg.omega,
                                      static_cast<std::size_t>(env.steps_per_decision()));
      env.observe();
      auto next = env.compact_state();
      buffer.store({state, a, r, res.mean_speed, res.mean_queue, next});
      state = std::move(next);
      ++stored;
    }
  }
}

LossTerms train_step(const ReplayBuffer& buffer, Learner& learner, const TrainerConfig& cfg, Rng& rng) {
  const auto batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size), rng, cfg.network.channels);
  const LossTerms terms = backward<float>(learner.net, learner.weights, learner.target, batch,
                                          cfg.loss(), learner.grad, learner.workspace);
  if (!std::isfinite(terms.total)) throw DivergenceError("train_step: non-finite loss");
  adam_step<float>(learner.weights, learner.adam, learner.grad, cfg.learning_rate);
  ++learner.updates;
  if (learner.updates % cfg.freeze_interval == 0) learner.sync_target();
  return terms;
}

TrainResult train_loop(const EnvFactory& make_env, const TrainerConfig& cfg_in, const TrainHooks& hooks) {
  cfg_in.validate();
  TrainerConfig cfg = cfg_in;
  {
    const RampEnv probe = make_env(0);
    const auto& net = probe.simulator().network();
    if (cfg.speed_scale <= 0) cfg.speed_scale = net.mainline_speed_limit();
    if (cfg.queue_scale <= 0) cfg.queue_scale = net.ramp_len();
    const auto& enc = probe.encoder();
    if (cfg.network.channels != enc.depth() || cfg.network.height != enc.rows() ||
        cfg.network.width != enc.cols())
      throw ConfigError("trainer.network: input shape does not match the encoder output");
  }

  Rng init_rng(derive_seed(cfg.seed, 1));
  Rng warm_rng(derive_seed(cfg.seed, 2));
  Rng act_rng(derive_seed(cfg.seed, 3));
  Rng batch_rng(derive_seed(cfg.seed, 4));
  Rng episode_rng(derive_seed(cfg.seed, 5));

  Learner learner(cfg.network, init_rng);
  ReplayBuffer buffer(cfg.buffer_size);
  warmup_fill(buffer, make_env, warm_rng, cfg.warmup_transitions, cfg);

  TrainResult result;
  result.spec = cfg.network;
  std::int64_t frames = 0;
  std::int64_t next_checkpoint = cfg.checkpoint_interval > 0 ? cfg.checkpoint_interval : -1;
  Activations<float> act;

  for (std::int64_t episode = 1; frames < cfg.total_frames; ++episode) {
    RampEnv env = make_env(episode_rng.next());
    const std::int64_t frames_per_decision = env.steps_per_decision();
    StateTensor state = env.observe();
    auto compact = env.compact_state();
    double reward_sum = 0.0, l1_sum = 0.0, l2_sum = 0.0;
    std::int64_t decisions = 0, updates = 0;

    while (!env.done() && frames < cfg.total_frames) {
      learner.net.forward(learner.weights, state.flat(), act);
      const SignalPhase a = epsilon_greedy(act.q, cfg.epsilon, act_rng);
      const StepResult res = env.step(a);
      frames += frames_per_decision;
      const double r = compute_reward(res.speeds, res.queues, cfg.mu, cfg.omega,
                                      static_cast<std::size_t>(frames_per_decision));
      StateTensor next = env.observe();
      auto next_compact = env.compact_state();
      buffer.store({compact, a, r, res.mean_speed, res.mean_queue, next_compact});
      reward_sum += r;
      ++decisions;
      if (buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
        const LossTerms t = train_step(buffer, learner, cfg, batch_rng);
        l1_sum += t.l1;
        l2_sum += t.l2;
        ++updates;
      }
      state = std::move(next);
      compact = std::move(next_compact);

      if (next_checkpoint > 0 && frames >= next_checkpoint) {
        if (hooks.on_checkpoint) hooks.on_checkpoint(frames, learner.weights);
        next_checkpoint += cfg.checkpoint_interval;
      }
    }

    EpisodeLog e{episode,
                 frames,
                 decisions ? reward_sum / static_cast<double>(decisions) : 0.0,
                 updates ? l1_sum / static_cast<double>(updates) : 0.0,
                 updates ? l2_sum / static_cast<double>(updates) : 0.0,
                 cfg.epsilon,
                 learner.syncs};
    result.log.push_back(e);
    if (hooks.on_episode) hooks.on_episode(e);
  }

  result.weights = learner.weights;
  result.updates = learner.updates;
  result.syncs = learner.syncs;
  return result;
}

std::string training_log_header() { return "episode,frames,mean_reward,L1,L2,epsilon,syncs"; }

std::string training_log_row(const EpisodeLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.9g,%.9g,%.9g,%.9g,%lld", static_cast<long long>(e.episode),
                static_cast<long long>(e.frames), e.mean_reward, e.l1, e.l2, e.epsilon,
                static_cast<long long>(e.syncs));
  return buf;
}

}  // namespace rampq
