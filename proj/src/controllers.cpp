#include "rampq/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "rampq/errors.hpp"

namespace rampq {

SignalPhase no_control() { return SignalPhase::G; }

SignalPhase fixed_time(double green_s, double red_s, double t) {
  if (!(green_s > 0) || !(red_s > 0)) throw ConfigError("fixed_time: durations must be positive");
  const double in_cycle = std::fmod(t, green_s + red_s);
  return in_cycle < green_s ? SignalPhase::G : SignalPhase::R;
}

void AlineaConfig::validate() const {
  if (!(r_min < r_max)) throw ConfigError("controllers.alinea.r_min: must be below r_max");
  if (!(o_target > 0 && o_target < 1)) throw ConfigError("controllers.alinea.o_target: must lie in (0, 1)");
  if (!(cycle_len > 0)) throw ConfigError("controllers.alinea.cycle_len: must be positive");
  if (!(discharge > 0)) throw ConfigError("controllers.alinea.discharge: must be positive");
}

double alinea_update(double prev_rate, double occupancy, const AlineaConfig& cfg) {
  return std::clamp(prev_rate + cfg.kr * (cfg.o_target - occupancy), cfg.r_min, cfg.r_max);
}

double quantize_to_step(double seconds, double step) {
  return step * std::round(seconds / step);
}

double red_from_rate(double rate, double cycle_len, double discharge, double step) {
  if (!(rate > 0)) throw ContractError("red_from_rate: rate must be positive");
  if (discharge < rate) return 0.0;
  return quantize_to_step(cycle_len * (1.0 - rate / discharge), step);
}

void PiAlineaConfig::validate() const {
  if (!(green_len > 0)) throw ConfigError("controllers.pi_alinea.green_len: must be positive");
  if (!(red_min >= 0 && red_min < red_max))
    throw ConfigError("controllers.pi_alinea.red_min: need 0 <= red_min < red_max");
  if (!(o_target > 0 && o_target < 1)) throw ConfigError("controllers.pi_alinea.o_target: must lie in (0, 1)");
}

PiAlineaStep pi_alinea_update(double prev_red, double o_k, double o_km1, const PiAlineaConfig& cfg,
                              double step) {
  const double raw = prev_red + cfg.kp * (o_k - o_km1) + cfg.ki * (o_k - cfg.o_target);
  const double state = std::clamp(raw, cfg.red_min, cfg.red_max);
  return {state, quantize_to_step(state, step)};
}

SignalPhase dqn_decide(std::span<const float> q_values) {
  if (q_values.size() != kActionCount) throw ContractError("dqn_decide: expected two Q-values");
  return phase_from_index(argmax_action<float>(q_values));
}

SignalPhase dqn_decide(const QNetwork<float>& net, std::span<const float> weights, const StateTensor& state) {
  Activations<float> a;
  net.forward(weights, state.flat(), a);
  return dqn_decide(a.q);
}

FixedTimeController::FixedTimeController(double green_s, double red_s) : green_(green_s), red_(red_s) {
  if (!(green_s > 0) || !(red_s > 0)) throw ConfigError("fixed_time: durations must be positive");
}

Decision FixedTimeController::decide(const Simulator& sim) {
  return {fixed_time(green_, red_, sim.time()), 0.0, red_};
}

AlineaController::AlineaController(AlineaConfig cfg, double step)
    : cfg_(cfg), step_(step), rate_(cfg.initial_rate) {
  cfg_.validate();
  red_ = red_from_rate(rate_, cfg_.cycle_len, cfg_.discharge, step_);
}

Decision AlineaController::decide(const Simulator& sim) {
  const double t = sim.time();
  if (!started_) {
    started_ = true;
    cycle_start_ = t;
  } else if (t - cycle_start_ >= cfg_.cycle_len - 1e-9) {
    occupancy_ = sim.probe_occupancy(cfg_.cycle_len);
    rate_ = alinea_update(rate_, occupancy_, cfg_);
    red_ = red_from_rate(rate_, cfg_.cycle_len, cfg_.discharge, step_);
    cycle_start_ = t;
  }
  const double green = cfg_.cycle_len - red_;
  const SignalPhase p = (t - cycle_start_) < green - 1e-9 ? SignalPhase::G : SignalPhase::R;
  return {p, occupancy_, red_};
}

PiAlineaController::PiAlineaController(PiAlineaConfig cfg, double step)
    : cfg_(cfg), step_(step), red_state_(cfg.initial_red), red_(quantize_to_step(cfg.initial_red, step)) {
  cfg_.validate();
}

Decision PiAlineaController::decide(const Simulator& sim) {
  const double t = sim.time();
  if (!started_) {
    started_ = true;
    cycle_start_ = t;
  } else if (t - cycle_start_ >= cfg_.green_len + red_ - 1e-9) {
    const double cycle = t - cycle_start_;
    occupancy_ = sim.probe_occupancy(cycle);
    const double o_prev = o_prev_ < 0 ? occupancy_ : o_prev_;
    const PiAlineaStep next = pi_alinea_update(red_state_, occupancy_, o_prev, cfg_, step_);
    red_state_ = next.red_state;
    red_ = next.red;
    o_prev_ = occupancy_;
    cycle_start_ = t;
  }
  const SignalPhase p = (t - cycle_start_) < cfg_.green_len - 1e-9 ? SignalPhase::G : SignalPhase::R;
  return {p, occupancy_, red_};
}

DqnController::DqnController(const MergeNetwork& net, Encoder::Options enc, NetworkSpec spec,
                             std::vector<float> weights)
    : encoder_(net, enc), qnet_(spec), weights_(std::move(weights)) {
  if (weights_.size() != qnet_.parameter_count())
    throw ContractError("DqnController: weights do not match the network spec");
  if (spec.channels != encoder_.depth() || spec.height != encoder_.rows() || spec.width != encoder_.cols())
    throw ContractError("DqnController: network input does not match the encoder output");
}

Decision DqnController::decide(const Simulator& sim) {
  const auto vehicles = sim.vehicles();
  const StateTensor s = encoder_.observe(vehicles, last_);
  qnet_.forward(weights_, s.flat(), act_);
  last_ = dqn_decide(act_.q);
  return {last_, 0.0, 0.0};
}

}  // namespace rampq
