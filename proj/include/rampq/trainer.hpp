#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rampq/adam.hpp"
#include "rampq/demand.hpp"
#include "rampq/encoder.hpp"
#include "rampq/loss.hpp"
#include "rampq/network.hpp"
#include "rampq/qnet.hpp"
#include "rampq/replay.hpp"
#include "rampq/simulator.hpp"

namespace rampq {

struct TrainerConfig {
  int batch_size = 32;                 // k
  double learning_rate = 2.5e-4;       // eta
  double epsilon = 0.1;
  std::int64_t freeze_interval = 10000;  // F, in updates
  double decision_step = 4.0;          // L, seconds
  double mu = 0.5;                     // reward weight on merge speed
  double omega = -0.1;                 // reward weight on ramp queue
  double gamma = 0.99;
  double lambda = 1.0;
  std::int64_t total_frames = 1000000;   // simulation steps of training
  std::int64_t warmup_transitions = 10000;
  std::size_t buffer_size = 200000;    // B
  std::int64_t checkpoint_interval = 0;  // frames; 0 disables periodic checkpoints
  std::uint64_t seed = 1;
  NetworkSpec network;
  // Normalisers of the auxiliary targets; 0 means "speed limit" and
  // "ramp length" of the environment.
  double speed_scale = 0.0;
  double queue_scale = 0.0;

  LossConfig loss() const { return {gamma, lambda, speed_scale > 0 ? speed_scale : 1.0, queue_scale > 0 ? queue_scale : 1.0}; }

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Everything needed to build one simulated episode.
struct EnvConfig {
  GeometryConfig geometry;
  DemandProfile demand = DemandProfile::morning_peak();
  DriverParams drivers;
  Encoder::Options encoder;
  double decision_step = 4.0;
  double episode_s = 4200.0;  // T, seconds
};

struct StepResult {
  std::vector<double> speeds;  // v_j, one per simulation step of the window
  std::vector<double> queues;  // q_j
  double mean_speed = 0.0;
  double mean_queue = 0.0;
};

// One episode of the control problem: a simulator, the state encoder and the
// last executed action.
class RampEnv {
 public:
  RampEnv(const EnvConfig& cfg, std::uint64_t seed);

  /// Encodes the current scene and returns the stacked state.
  StateTensor observe();
  /// Compact frames of the most recent observation.
  std::vector<FramePtr> compact_state() const { return encoder_.compact_state(); }
  /// Executes the action for one decision step.
  StepResult step(SignalPhase action);
  bool done() const { return sim_.time() >= cfg_.episode_s - 1e-9; }
  int steps_per_decision() const { return steps_per_decision_; }

  const Simulator& simulator() const { return sim_; }
  const Encoder& encoder() const { return encoder_; }

 private:
  EnvConfig cfg_;
  Simulator sim_;
  Encoder encoder_;
  SignalPhase last_ = SignalPhase::G;
  int steps_per_decision_;
};

using EnvFactory = std::function<RampEnv(std::uint64_t seed)>;

/// Window-averaged reward: mean over j of (mu * v_j + omega * q_j).
/// Throws ContractError unless both windows hold `expected` samples.
double compute_reward(std::span<const double> speeds, std::span<const double> queues, double mu,
                      double omega, std::size_t expected);

/// With probability epsilon a uniformly random phase, else the greedy one.
SignalPhase epsilon_greedy(std::span<const float> q_values, double epsilon, Rng& rng);
SignalPhase epsilon_greedy(const QNetwork<float>& net, std::span<const float> weights,
                           const StateTensor& state, double epsilon, Rng& rng);

/// Trainable weights, frozen target copy and optimizer state.
struct Learner {
  QNetwork<float> net;
  std::vector<float> weights;
  std::vector<float> target;
  AdamState<float> adam;
  std::int64_t updates = 0;  // f
  std::int64_t syncs = 0;

  Learner(const NetworkSpec& spec, Rng& rng);
  void sync_target();

  // reused buffers
  LossWorkspace<float> workspace;
  std::vector<float> grad;
};

/// Runs uniformly random actions until n transitions have been stored.
/// Fresh episodes are drawn from the factory with seeds from `rng`.
void warmup_fill(ReplayBuffer& buffer, const EnvFactory& make_env, Rng& rng, std::int64_t n,
                 const TrainerConfig& cfg);

/// One sampled batch, one backward pass and one ADAM update; syncs the
/// target whenever the update count reaches a multiple of F.
LossTerms train_step(const ReplayBuffer& buffer, Learner& learner, const TrainerConfig& cfg, Rng& rng);

struct EpisodeLog {
  std::int64_t episode;
  std::int64_t frames;  // cumulative training frames at episode end
  double mean_reward;
  double l1;
  double l2;
  double epsilon;
  std::int64_t syncs;
};

struct TrainResult {
  NetworkSpec spec;
  std::vector<float> weights;
  std::vector<EpisodeLog> log;
  std::int64_t updates = 0;
  std::int64_t syncs = 0;
};

struct TrainHooks {
  /// Called after each checkpoint_interval frames with (frames, weights).
  std::function<void(std::int64_t, std::span<const float>)> on_checkpoint;
  std::function<void(const EpisodeLog&)> on_episode;
};

/// Full deep Q-learning loop: warm-up fill, then episodes at decision
/// cadence until total_frames simulation steps have been played.
TrainResult train_loop(const EnvFactory& make_env, const TrainerConfig& cfg, const TrainHooks& hooks = {});

/// CSV header and row formatting of the training log.
std::string training_log_header();
std::string training_log_row(const EpisodeLog& e);

}  // namespace rampq
