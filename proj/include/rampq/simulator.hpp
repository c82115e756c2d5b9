#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "rampq/demand.hpp"
#include "rampq/network.hpp"
#include "rampq/phase.hpp"
#include "rampq/rng.hpp"

namespace rampq {

enum class Origin : int { Mainline = 0, Ramp = 1 };

struct Vehicle {
  std::int64_t id = 0;
  int lane = 0;        // 0..mainline_lanes-1 mainline, mainline_lanes = ramp
  double pos = 0.0;    // front bumper on the lane's axis
  double speed = 0.0;  // m/s
  double length = 5.0;
  Origin origin = Origin::Mainline;
  double entry_time = 0.0;  // arrival (demand) time; includes entry deferral
};

/// Krauss car-following parameters and probe settings.
struct DriverParams {
  double dt = 1.0;          // simulation step (s)
  double tau = 1.0;         // reaction time (s)
  double accel = 2.6;       // m/s^2
  double decel = 4.5;       // m/s^2
  double sigma = 0.3;       // driver imperfection
  double min_gap = 2.5;     // m
  double length = 5.0;      // m
  double queue_speed = 3.0; // v_queue for the ramp queue probe (m/s)
  double heat_cell_m = 50.0;
  double heat_bin_s = 60.0;
};

struct TravelRecord {
  std::int64_t id;
  Origin origin;
  double entry_time;
  double exit_time;
  double travel_time() const { return exit_time - entry_time; }
};

struct ProbeSample {
  double t;
  double merge_speed;        // m/s
  double ramp_queue;         // m
  double occupancy;          // share of the step the detector was covered, lane mean
  std::int64_t downstream_count;  // cumulative detector crossings
};

// Space-time accumulator of mainline speeds (sum and count per cell).
struct SpeedGrid {
  double cell_m = 50.0;
  double bin_s = 60.0;
  int cells = 0;
  std::vector<double> sum;         // [bin * cells + cell]
  std::vector<std::int64_t> count;
  int bins() const { return cells == 0 ? 0 : static_cast<int>(sum.size()) / cells; }
  void add(double t, double x, double v);
};

struct MetricSeries {
  std::vector<ProbeSample> samples;
  std::vector<TravelRecord> travel;
  SpeedGrid speed_grid;
};

struct SimCounters {
  std::int64_t demanded = 0;  // arrivals drawn
  std::int64_t spawned = 0;   // vehicles inserted
  std::int64_t exited = 0;
  std::int64_t pending() const { return demanded - spawned; }
};

// Discrete-time microscopic simulator of a single on-ramp merge. One instance
// is single-threaded and owns its RNG; independent instances share nothing.
class Simulator {
 public:
  Simulator(MergeNetwork net, DemandProfile demand, DriverParams drivers, std::uint64_t seed);

  /// Sets the ramp signal for subsequent steps.
  void apply_signal(SignalPhase phase) { phase_ = phase; }
  SignalPhase phase() const { return phase_; }

  /// Draws arrivals for the current step and inserts queued arrivals where
  /// the entry has room. Returns the vehicles inserted this call.
  std::vector<Vehicle> spawn_arrivals();
  /// Moves every vehicle by one step, performs merges and exits, checks the
  /// invariants (SimulationFault on breach) and samples the probes.
  void advance();
  /// spawn_arrivals() followed by advance().
  void step();

  double probe_merge_speed() const;
  double probe_ramp_queue() const;
  /// Fraction of the last `window_s` seconds with the detector covered.
  double probe_occupancy(double window_s) const;
  /// Detector crossings over the last `window_s` seconds, in veh/h.
  double probe_downstream_flow(double window_s) const;

  /// Places a vehicle directly (scenario setup and tests). Throws
  /// ContractError if it would overlap a neighbour or sit off the lane.
  const Vehicle& add_vehicle(int lane, double pos, double speed,
                             Origin origin = Origin::Mainline);

  std::vector<Vehicle> vehicles() const;
  const std::vector<std::vector<Vehicle>>& lanes() const { return lanes_; }
  std::size_t vehicle_count() const;

  double time() const { return t_; }
  std::int64_t steps() const { return steps_; }
  const MergeNetwork& network() const { return net_; }
  const DriverParams& drivers() const { return drv_; }
  const SimCounters& counters() const { return counters_; }
  const MetricSeries& metrics() const { return metrics_; }
  MetricSeries take_metrics() { return std::move(metrics_); }

  /// Verifies conservation, spacing and speed bounds; throws SimulationFault.
  void check_invariants() const;

 private:
  double safe_speed(double v, double gap, double leader_speed) const;
  double yield_speed(const Vehicle& v) const;
  double sync_speed(const Vehicle& v) const;
  double next_speed(const Vehicle& v, double v_safe);
  void insert_sorted(int lane, const Vehicle& v);
  void perform_merges();

  MergeNetwork net_;
  DemandProfile demand_;
  DriverParams drv_;
  Rng rng_;
  SignalPhase phase_ = SignalPhase::G;
  double t_ = 0.0;
  std::int64_t steps_ = 0;
  std::int64_t next_id_ = 0;
  std::int64_t downstream_count_ = 0;
  double covered_ = 0.0;  // detector coverage of the current step, summed over lanes
  std::vector<std::vector<Vehicle>> lanes_;        // sorted by pos, front first
  std::vector<std::deque<double>> pending_;        // deferred arrival times per entry lane
  SimCounters counters_;
  MetricSeries metrics_;
};

}  // namespace rampq
