#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rampq/encoder.hpp"
#include "rampq/phase.hpp"
#include "rampq/qnet.hpp"
#include "rampq/simulator.hpp"

namespace rampq {

/// Always green.
SignalPhase no_control();

/// Periodic plan: green for green_s, then red for red_s. Throws ConfigError
/// for non-positive durations.
SignalPhase fixed_time(double green_s, double red_s, double t);

struct AlineaConfig {
  double kr = 7000.0;        // veh/h per unit occupancy
  double o_target = 0.12;
  double r_min = 200.0;      // veh/h
  double r_max = 1800.0;     // veh/h
  double cycle_len = 40.0;   // s
  double discharge = 1800.0; // green discharge rate of the ramp (veh/h)
  double initial_rate = 1800.0;
  void validate() const;
};

/// r(k) = clamp(r(k-1) + K_R * (o_target - o(k)), r_min, r_max).
double alinea_update(double prev_rate, double occupancy, const AlineaConfig& cfg);

/// Rounds a duration to the nearest multiple of the decision step.
double quantize_to_step(double seconds, double step);

/// Red time that realises `rate` in a cycle of cycle_len:
/// cycle_len * (1 - rate / discharge), quantized to the decision step; 0 when
/// the rate exceeds the discharge rate.
double red_from_rate(double rate, double cycle_len, double discharge, double step);

struct PiAlineaConfig {
  double kp = 40.0;        // s per unit occupancy
  double ki = 120.0;       // s per unit occupancy
  double o_target = 0.12;
  double green_len = 8.0;  // s
  double red_min = 0.0;    // s
  double red_max = 32.0;   // s
  double initial_red = 0.0;
  void validate() const;
};

struct PiAlineaStep {
  double red_state;  // clamped, unquantized integrator value
  double red;        // red length executed this cycle (multiple of the step)
};

/// red = clamp(prev_red + K_P (o_k - o_km1) + K_I (o_k - o_target),
/// red_min, red_max), quantized to the decision step for execution.
PiAlineaStep pi_alinea_update(double prev_red, double o_k, double o_km1,
                              const PiAlineaConfig& cfg, double step);

/// Greedy phase over a Q-value pair; an exact tie goes to G.
SignalPhase dqn_decide(std::span<const float> q_values);
/// Runs the network on the state. Throws ContractError on shape mismatch.
SignalPhase dqn_decide(const QNetwork<float>& net, std::span<const float> weights,
                       const StateTensor& state);

struct Decision {
  SignalPhase phase = SignalPhase::G;
  double occupancy = 0.0;  // last occupancy measurement used (if any)
  double red = 0.0;        // current red length (cycle-based controllers)
};

// Closed-loop policy polled once per decision step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual Decision decide(const Simulator& sim) = 0;
};

class NoControlController final : public Controller {
 public:
  std::string name() const override { return "none"; }
  Decision decide(const Simulator&) override { return {no_control(), 0.0, 0.0}; }
};

class FixedTimeController final : public Controller {
 public:
  FixedTimeController(double green_s, double red_s);
  std::string name() const override { return "fixed"; }
  Decision decide(const Simulator& sim) override;

 private:
  double green_, red_;
};

class AlineaController final : public Controller {
 public:
  AlineaController(AlineaConfig cfg, double step);
  std::string name() const override { return "alinea"; }
  Decision decide(const Simulator& sim) override;
  double rate() const { return rate_; }

 private:
  AlineaConfig cfg_;
  double step_;
  double rate_;
  double red_ = 0.0;
  double occupancy_ = 0.0;
  double cycle_start_ = 0.0;
  bool started_ = false;
};

class PiAlineaController final : public Controller {
 public:
  PiAlineaController(PiAlineaConfig cfg, double step);
  std::string name() const override { return "pi_alinea"; }
  Decision decide(const Simulator& sim) override;

 private:
  PiAlineaConfig cfg_;
  double step_;
  double red_state_;
  double red_;
  double o_prev_ = -1.0;
  double occupancy_ = 0.0;
  double cycle_start_ = 0.0;
  bool started_ = false;
};

class DqnController final : public Controller {
 public:
  DqnController(const MergeNetwork& net, Encoder::Options enc, NetworkSpec spec,
                std::vector<float> weights);
  std::string name() const override { return "drl"; }
  Decision decide(const Simulator& sim) override;

 private:
  Encoder encoder_;
  QNetwork<float> qnet_;
  std::vector<float> weights_;
  Activations<float> act_;
  SignalPhase last_ = SignalPhase::G;
};

}  // namespace rampq
