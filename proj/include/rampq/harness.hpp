#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rampq/checkpoint.hpp"
#include "rampq/config.hpp"
#include "rampq/controllers.hpp"
#include "rampq/simulator.hpp"
#include "rampq/stats.hpp"

namespace rampq {

/// Controller names accepted by make_controller and the eval command.
const std::vector<std::string>& controller_names();

/// Builds a controller from the experiment settings. "drl" needs a checkpoint
/// (ConfigError otherwise); unknown names are a ConfigError as well.
std::unique_ptr<Controller> make_controller(const ExperimentConfig& cfg, const std::string& kind,
                                            const std::optional<Checkpoint>& checkpoint = std::nullopt);

struct DecisionRecord {
  double t;
  SignalPhase phase;
  double occupancy;
  double red;
};

struct RunResult {
  std::string controller;
  std::uint64_t seed = 0;
  MetricSeries metrics;
  std::vector<DecisionRecord> decisions;
};

/// One simulated horizon. The controller is consulted every decision step and
/// its phase held until the next one.
RunResult run_scenario(const ExperimentConfig& cfg, Controller& controller, std::uint64_t seed);

/// Mean travel time of mainline-origin vehicles that entered after the
/// warm-up window; 0 when there are none.
double mean_mainline_travel_time(const MetricSeries& m, double warmup_s);

struct SeedSummary {
  std::uint64_t seed = 0;
  double mean_tt = 0.0;  // s, mainline origin
  std::int64_t mainline_vehicles = 0;
  double ramp_mean_tt = 0.0;
  std::int64_t ramp_vehicles = 0;
  double red_ratio = 0.0;
  double mean_queue = 0.0;  // m
  double max_queue = 0.0;
};

struct MinuteSeries {
  double occupancy = 0.0;  // mean over seeds and the minute's samples
  double queue = 0.0;
};

struct FlowBin {
  double start_s;
  std::vector<double> flow;  // veh/h per seed, in summary order
  double mean;
};

struct HeatCell {
  double t_start;
  double x_start;
  double mean_speed;  // m/s, NaN when the cell saw no vehicle
  std::int64_t samples;
};

struct RunSummary {
  std::string controller;
  double horizon_s = 0.0;
  std::vector<SeedSummary> seeds;
  // Travel-time quartiles by vehicle exit minute, mainline origin only.
  std::vector<Quartiles> tt_pooled;                // all seeds pooled per minute
  std::vector<std::vector<Quartiles>> tt_per_seed;  // [seed][minute]
  std::vector<Quartiles> queue;                    // per minute, all samples of all seeds
  std::vector<MinuteSeries> minute_series;
  std::vector<FlowBin> downstream_flow;            // 5-min bins
  std::vector<HeatCell> heatmap;                   // 50 m x 1 min

  double mean_tt() const;
  double mean_red_ratio() const;
};

RunSummary metrics_aggregate(const std::vector<RunResult>& runs, const ExperimentConfig& cfg);

/// Runs every configured seed with a fresh controller per seed. Uses up to
/// cfg.jobs threads; the result does not depend on the job count.
std::vector<RunResult> evaluate_seeds(const ExperimentConfig& cfg, const std::string& kind,
                                      const std::optional<Checkpoint>& checkpoint = std::nullopt);

struct TrainOutputs {
  std::string dir;
  std::string final_checkpoint;
  std::string log_path;
  std::int64_t frames = 0;
};

/// Trains with cfg.trainer and writes <root>/<name>/train_seed<N>/ holding the
/// resolved config snapshot, training_log.csv, periodic and final checkpoints.
TrainOutputs cmd_train(const ExperimentConfig& cfg);

/// Evaluates one controller over all seeds and writes one directory per seed
/// plus an aggregate directory under <root>/<name>/<controller>/.
RunSummary cmd_eval(const ExperimentConfig& cfg, const std::string& kind,
                    const std::optional<std::string>& checkpoint_path = std::nullopt);

/// Per-seed mean travel times as written by cmd_eval (aggregate/summary.csv).
struct SummaryTable {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<double> mean_tt;
};

/// Reads a summary CSV, or the aggregate summary of an eval directory.
SummaryTable read_summary(const std::string& path);

struct Comparison {
  std::vector<std::uint64_t> seeds;
  std::vector<SummaryTable> tables;           // reference first
  std::vector<std::vector<double>> change;    // [table][seed] percent vs reference
  std::vector<double> mean_change;            // [table], mean of the per-seed changes
};

/// Throws ConfigError unless there are two or more tables over the same seeds.
Comparison compare_summaries(const std::vector<SummaryTable>& tables);
/// "171 [-8%]" cells; reference column shows the plain value.
std::string format_comparison(const Comparison& c);
std::string format_change_cell(double value, double percent);

// CSV writers, exposed for tests.
std::string series_csv(const MetricSeries& m);
std::string summary_csv(const RunSummary& s);

}  // namespace rampq
