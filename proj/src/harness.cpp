#include "rampq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "rampq/errors.hpp"
#include "rampq/trainer.hpp"

namespace rampq {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

const char* phase_text(SignalPhase p) { return p == SignalPhase::R ? "R" : "G"; }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

int minute_count(double horizon_s) { return static_cast<int>(std::ceil(horizon_s / 60.0 - 1e-9)); }

// Sample i covers [i*dt, (i+1)*dt).
int sample_bin(std::size_t i, double dt, double bin_s) {
  return static_cast<int>(std::floor(static_cast<double>(i) * dt / bin_s + 1e-9));
}

SeedSummary summarize_seed(const RunResult& r, double warmup_s) {
  SeedSummary s;
  s.seed = r.seed;
  double ramp_sum = 0.0;
  for (const auto& t : r.metrics.travel) {
    if (t.entry_time < warmup_s) continue;
    if (t.origin == Origin::Mainline) {
      ++s.mainline_vehicles;
    } else {
      ramp_sum += t.travel_time();
      ++s.ramp_vehicles;
    }
  }
  s.mean_tt = mean_mainline_travel_time(r.metrics, warmup_s);
  s.ramp_mean_tt = s.ramp_vehicles ? ramp_sum / static_cast<double>(s.ramp_vehicles) : 0.0;
  std::int64_t reds = 0;
  for (const auto& d : r.decisions) reds += d.phase == SignalPhase::R;
  s.red_ratio = r.decisions.empty() ? 0.0 : static_cast<double>(reds) / static_cast<double>(r.decisions.size());
  for (const auto& p : r.metrics.samples) {
    s.mean_queue += p.ramp_queue;
    s.max_queue = std::max(s.max_queue, p.ramp_queue);
  }
  if (!r.metrics.samples.empty()) s.mean_queue /= static_cast<double>(r.metrics.samples.size());
  return s;
}

std::string quartile_rows(const std::vector<Quartiles>& qs, const std::string& prefix) {
  std::string out;
  for (std::size_t m = 0; m < qs.size(); ++m) {
    const auto& q = qs[m];
    out += prefix + std::to_string(m) + ',' + num(q.q1) + ',' + num(q.q2) + ',' + num(q.q3) + ',' +
           std::to_string(q.n) + '\n';
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

const std::vector<std::string>& controller_names() {
  static const std::vector<std::string> names = {"none", "fixed", "alinea", "pi_alinea", "drl"};
  return names;
}

std::unique_ptr<Controller> make_controller(const ExperimentConfig& cfg, const std::string& kind,
                                            const std::optional<Checkpoint>& checkpoint) {
  if (kind == "none") return std::make_unique<NoControlController>();
  if (kind == "fixed") return std::make_unique<FixedTimeController>(cfg.fixed_green, cfg.fixed_red);
  if (kind == "alinea") return std::make_unique<AlineaController>(cfg.alinea, cfg.decision_step);
  if (kind == "pi_alinea") return std::make_unique<PiAlineaController>(cfg.pi_alinea, cfg.decision_step);
  if (kind == "drl") {
    if (!checkpoint) throw ConfigError("controller 'drl' requires a checkpoint");
    return std::make_unique<DqnController>(build_network(cfg.geometry), cfg.encoder, checkpoint->spec,
                                           checkpoint->weights);
  }
  throw ConfigError("unknown controller '" + kind + "'");
}

RunResult run_scenario(const ExperimentConfig& cfg, Controller& controller, std::uint64_t seed) {
  Simulator sim(build_network(cfg.geometry), cfg.demand(), cfg.drivers, seed);
  const auto every = static_cast<std::int64_t>(std::llround(cfg.decision_step / cfg.drivers.dt));
  const auto steps = static_cast<std::int64_t>(std::llround(cfg.horizon_s / cfg.drivers.dt));
  RunResult r;
  r.controller = controller.name();
  r.seed = seed;
  r.decisions.reserve(static_cast<std::size_t>(steps / every + 1));
  for (std::int64_t i = 0; i < steps; ++i) {
    if (i % every == 0) {
      const Decision d = controller.decide(sim);
      sim.apply_signal(d.phase);
      r.decisions.push_back({sim.time(), d.phase, d.occupancy, d.red});
    }
    sim.step();
  }
  r.metrics = sim.take_metrics();
  return r;
}

double mean_mainline_travel_time(const MetricSeries& m, double warmup_s) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& t : m.travel) {
    if (t.origin != Origin::Mainline || t.entry_time < warmup_s) continue;
    sum += t.travel_time();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double RunSummary::mean_tt() const {
  std::vector<double> v;
  for (const auto& s : seeds) v.push_back(s.mean_tt);
  return mean(v);
}

double RunSummary::mean_red_ratio() const {
  std::vector<double> v;
  for (const auto& s : seeds) v.push_back(s.red_ratio);
  return mean(v);
}

RunSummary metrics_aggregate(const std::vector<RunResult>& runs, const ExperimentConfig& cfg) {
  RunSummary out;
  out.horizon_s = cfg.horizon_s;
  if (!runs.empty()) out.controller = runs.front().controller;
  const int minutes = minute_count(cfg.horizon_s);
  const double dt = cfg.drivers.dt;

  std::vector<std::vector<double>> tt_pool(minutes), queue_pool(minutes);
  std::vector<double> occ_sum(minutes, 0.0), queue_sum(minutes, 0.0);
  std::vector<std::int64_t> minute_n(minutes, 0);
  const double flow_bin = 300.0;
  const int flow_bins = static_cast<int>(std::ceil(cfg.horizon_s / flow_bin - 1e-9));
  out.downstream_flow.resize(flow_bins);
  for (int b = 0; b < flow_bins; ++b) out.downstream_flow[b].start_s = b * flow_bin;
  SpeedGrid heat;

  for (const auto& r : runs) {
    out.seeds.push_back(summarize_seed(r, cfg.warmup_s));

    std::vector<std::vector<double>> tt_seed(minutes);
    for (const auto& t : r.metrics.travel) {
      if (t.origin != Origin::Mainline || t.entry_time < cfg.warmup_s) continue;
      const int m = std::clamp(static_cast<int>(t.exit_time / 60.0), 0, minutes - 1);
      tt_seed[m].push_back(t.travel_time());
      tt_pool[m].push_back(t.travel_time());
    }
    std::vector<Quartiles> per_seed;
    for (const auto& v : tt_seed) per_seed.push_back(quartiles(v));
    out.tt_per_seed.push_back(std::move(per_seed));

    const auto& s = r.metrics.samples;
    std::vector<std::int64_t> crossings(flow_bins, 0);
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int m = std::min(sample_bin(i, dt, 60.0), minutes - 1);
      queue_pool[m].push_back(s[i].ramp_queue);
      occ_sum[m] += s[i].occupancy;
      queue_sum[m] += s[i].ramp_queue;
      ++minute_n[m];
      const int b = std::min(sample_bin(i, dt, flow_bin), flow_bins - 1);
      crossings[b] += s[i].downstream_count - prev;
      prev = s[i].downstream_count;
    }
    for (int b = 0; b < flow_bins; ++b) {
      const double len = std::min(flow_bin, cfg.horizon_s - b * flow_bin);
      out.downstream_flow[b].flow.push_back(static_cast<double>(crossings[b]) * 3600.0 / len);
    }

    const SpeedGrid& g = r.metrics.speed_grid;
    if (heat.cells == 0) {
      heat.cells = g.cells;
      heat.cell_m = g.cell_m;
      heat.bin_s = g.bin_s;
    }
    if (g.sum.size() > heat.sum.size()) {
      heat.sum.resize(g.sum.size(), 0.0);
      heat.count.resize(g.count.size(), 0);
    }
    for (std::size_t k = 0; k < g.sum.size(); ++k) {
      heat.sum[k] += g.sum[k];
      heat.count[k] += g.count[k];
    }
  }

  for (int m = 0; m < minutes; ++m) {
    out.tt_pooled.push_back(quartiles(tt_pool[m]));
    out.queue.push_back(quartiles(queue_pool[m]));
    MinuteSeries ms;
    if (minute_n[m] > 0) {
      ms.occupancy = occ_sum[m] / static_cast<double>(minute_n[m]);
      ms.queue = queue_sum[m] / static_cast<double>(minute_n[m]);
    }
    out.minute_series.push_back(ms);
  }
  for (auto& b : out.downstream_flow) b.mean = mean(b.flow);
  for (int bin = 0; bin < heat.bins(); ++bin) {
    for (int c = 0; c < heat.cells; ++c) {
      const std::size_t k = static_cast<std::size_t>(bin) * heat.cells + c;
      const double v = heat.count[k] ? heat.sum[k] / static_cast<double>(heat.count[k])
                                     : std::numeric_limits<double>::quiet_NaN();
      out.heatmap.push_back({bin * heat.bin_s, c * heat.cell_m, v, heat.count[k]});
    }
  }
  return out;
}

std::vector<RunResult> evaluate_seeds(const ExperimentConfig& cfg, const std::string& kind,
                                      const std::optional<Checkpoint>& checkpoint) {
  make_controller(cfg, kind, checkpoint);  // fail fast on bad settings
  const std::size_t n = cfg.seeds.size();
  std::vector<RunResult> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        auto controller = make_controller(cfg, kind, checkpoint);
        results[i] = run_scenario(cfg, *controller, cfg.seeds[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto jobs = static_cast<std::size_t>(std::max(1, cfg.jobs));
  if (jobs == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::min(jobs, n); ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::string series_csv(const MetricSeries& m) {
  std::string out = "t_s,merge_speed_mps,ramp_queue_m,occupancy_sample,downstream_count\n";
  for (const auto& p : m.samples) {
    out += num(p.t) + ',' + num(p.merge_speed) + ',' + num(p.ramp_queue) + ',' + num(p.occupancy) + ',' +
           std::to_string(p.downstream_count) + '\n';
  }
  return out;
}

std::string summary_csv(const RunSummary& s) {
  std::string out = "seed,mean_tt_s,mainline_vehicles,ramp_mean_tt_s,ramp_vehicles,red_ratio,mean_queue_m,max_queue_m\n";
  for (const auto& r : s.seeds) {
    out += std::to_string(r.seed) + ',' + num(r.mean_tt) + ',' + std::to_string(r.mainline_vehicles) + ',' +
           num(r.ramp_mean_tt) + ',' + std::to_string(r.ramp_vehicles) + ',' + num(r.red_ratio) + ',' +
           num(r.mean_queue) + ',' + num(r.max_queue) + '\n';
  }
  return out;
}

TrainOutputs cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  TrainOutputs out;
  const fs::path dir = fs::path(output_root(cfg)) / cfg.name / ("train_seed" + std::to_string(cfg.trainer.seed));
  fs::create_directories(dir);
  out.dir = dir.string();
  write_file(dir / "config.snapshot", config_snapshot(cfg));

  out.log_path = (dir / "training_log.csv").string();
  std::ofstream log(out.log_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + out.log_path);
  log << training_log_header() << '\n';

  const EnvConfig env = cfg.env();
  const NetworkSpec spec = cfg.trainer.network;
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeLog& e) { log << training_log_row(e) << '\n' << std::flush; };
  hooks.on_checkpoint = [&](std::int64_t frames, std::span<const float> w) {
    save_checkpoint((dir / ("checkpoint_" + std::to_string(frames) + ".ckpt")).string(), spec, w);
  };
  const TrainResult result = train_loop([&env](std::uint64_t seed) { return RampEnv(env, seed); }, cfg.trainer, hooks);
  out.final_checkpoint = (dir / "final.ckpt").string();
  save_checkpoint(out.final_checkpoint, result.spec, result.weights);
  out.frames = result.log.empty() ? 0 : result.log.back().frames;
  return out;
}

RunSummary cmd_eval(const ExperimentConfig& cfg, const std::string& kind,
                    const std::optional<std::string>& checkpoint_path) {
  cfg.validate();
  if (kind == "drl" && !checkpoint_path) throw ConfigError("controller 'drl' requires --checkpoint");
  std::optional<Checkpoint> ckpt;
  if (checkpoint_path) ckpt = load_checkpoint(*checkpoint_path);

  const std::vector<RunResult> runs = evaluate_seeds(cfg, kind, ckpt);
  const fs::path root = fs::path(output_root(cfg)) / cfg.name / kind;

  for (const auto& r : runs) {
    const fs::path d = root / ("seed_" + std::to_string(r.seed));
    fs::create_directories(d);
    write_file(d / "series.csv", series_csv(r.metrics));
    std::string travel = "id,origin,entry_time_s,exit_time_s,travel_time_s\n";
    for (const auto& t : r.metrics.travel) {
      travel += std::to_string(t.id) + ',' + (t.origin == Origin::Mainline ? "mainline" : "ramp") + ',' +
                num(t.entry_time) + ',' + num(t.exit_time) + ',' + num(t.travel_time()) + '\n';
    }
    write_file(d / "travel.csv", travel);
    std::string decisions = "t_s,controller,phase,occupancy,red_s\n";
    for (const auto& x : r.decisions) {
      decisions += num(x.t) + ',' + r.controller + ',' + phase_text(x.phase) + ',' + num(x.occupancy) + ',' +
                   num(x.red) + '\n';
    }
    write_file(d / "decisions.csv", decisions);
  }

  RunSummary s = metrics_aggregate(runs, cfg);
  s.controller = kind;
  const fs::path agg = root / "aggregate";
  fs::create_directories(agg);
  write_file(agg / "summary.csv", summary_csv(s));
  write_file(agg / "travel_time_quartiles.csv", "exit_minute,q1_s,q2_s,q3_s,n\n" + quartile_rows(s.tt_pooled, ""));
  std::string per_seed = "seed,exit_minute,q1_s,q2_s,q3_s,n\n";
  for (std::size_t i = 0; i < s.tt_per_seed.size(); ++i)
    per_seed += quartile_rows(s.tt_per_seed[i], std::to_string(s.seeds[i].seed) + ',');
  write_file(agg / "travel_time_quartiles_per_seed.csv", per_seed);
  write_file(agg / "queue_quartiles.csv", "minute,q1_m,q2_m,q3_m,n\n" + quartile_rows(s.queue, ""));
  std::string series = "minute,mean_occupancy,mean_queue_m\n";
  for (std::size_t m = 0; m < s.minute_series.size(); ++m)
    series += std::to_string(m) + ',' + num(s.minute_series[m].occupancy) + ',' + num(s.minute_series[m].queue) + '\n';
  write_file(agg / "occupancy_queue.csv", series);
  std::string flow = "start_s";
  for (const auto& r : s.seeds) flow += ",seed_" + std::to_string(r.seed) + "_vph";
  flow += ",mean_vph\n";
  for (const auto& b : s.downstream_flow) {
    flow += num(b.start_s);
    for (double f : b.flow) flow += ',' + num(f);
    flow += ',' + num(b.mean) + '\n';
  }
  write_file(agg / "downstream_flow.csv", flow);
  std::string heat = "t_start_s,x_start_m,mean_speed_mps,samples\n";
  for (const auto& c : s.heatmap)
    heat += num(c.t_start) + ',' + num(c.x_start) + ',' + num(c.mean_speed) + ',' + std::to_string(c.samples) + '\n';
  write_file(agg / "speed_heatmap.csv", heat);
  write_file(agg / "config.snapshot", config_snapshot(cfg));
  return s;
}

SummaryTable read_summary(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p = fs::exists(p / "aggregate" / "summary.csv") ? p / "aggregate" / "summary.csv" : p / "summary.csv";
  std::ifstream in(p);
  if (!in) throw ConfigError(p.string() + ": cannot open summary");
  SummaryTable t;
  t.label = path;
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError(p.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t seed_col = col("seed");
  const std::size_t tt_col = col("mean_tt_s");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    try {
      t.seeds.push_back(std::stoull(cells.at(seed_col)));
      t.mean_tt.push_back(std::stod(cells.at(tt_col)));
    } catch (const std::exception&) {
      throw ConfigError(p.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return t;
}

Comparison compare_summaries(const std::vector<SummaryTable>& tables) {
  if (tables.size() < 2) throw ConfigError("compare needs a reference and at least one other summary");
  Comparison c;
  c.seeds = tables.front().seeds;
  for (const auto& t : tables) {
    if (t.seeds != c.seeds) throw ConfigError(t.label + ": seed list differs from the reference");
  }
  c.tables = tables;
  for (const auto& t : tables) {
    std::vector<double> ch;
    for (std::size_t i = 0; i < c.seeds.size(); ++i)
      ch.push_back(percent_change(tables.front().mean_tt[i], t.mean_tt[i]));
    c.mean_change.push_back(mean(ch));
    c.change.push_back(std::move(ch));
  }
  return c;
}

std::string format_change_cell(double value, double percent) {
  char buf[64];
  const double p = std::round(percent);
  if (p == 0.0)
    std::snprintf(buf, sizeof buf, "%.0f [0%%]", value);
  else
    std::snprintf(buf, sizeof buf, "%.0f [%+.0f%%]", value, p);
  return buf;
}

std::string format_comparison(const Comparison& c) {
  std::ostringstream os;
  os << "seed";
  for (const auto& t : c.tables) os << ',' << t.label;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.0f", c.tables[0].mean_tt[i]);
    os << c.seeds[i] << ',' << buf;
    for (std::size_t k = 1; k < c.tables.size(); ++k)
      os << ',' << format_change_cell(c.tables[k].mean_tt[i], c.change[k][i]);
    os << '\n';
  }
  os << "mean";
  for (std::size_t k = 0; k < c.tables.size(); ++k) {
    const double m = mean(c.tables[k].mean_tt);
    if (k == 0) {
      std::snprintf(buf, sizeof buf, "%.0f", m);
      os << ',' << buf;
    } else {
      os << ',' << format_change_cell(m, c.mean_change[k]);
    }
  }
  os << '\n';
  return os.str();
}

}  // namespace rampq
