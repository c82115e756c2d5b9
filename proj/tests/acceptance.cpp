// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Expect a long runtime: criteria 5 and
// 6 train three desk-scale agents.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rampq/checkpoint.hpp"
#include "rampq/config.hpp"
#include "rampq/controllers.hpp"
#include "rampq/errors.hpp"
#include "rampq/harness.hpp"
#include "rampq/replay.hpp"
#include "rampq/stats.hpp"
#include "rampq/trainer.hpp"

using namespace rampq;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig scenario() { return load_config(RAMPQ_SOURCE_DIR "/configs/default.conf"); }

Verdict gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t checked = 0, kinks = 0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const oracle::GradCheck g = oracle::finite_difference_check(1000 + s);
    worst = std::max(worst, g.max_rel_error);
    checked += g.checked;
    kinks += g.kinks;
  }
  const double t = seconds_since(t0);
  const double coverage = static_cast<double>(checked) / static_cast<double>(checked + kinks);
  return {worst < 1e-4 && t < 60 && coverage >= 0.9,
          fmt("max rel error %.2e over 20 draws, %zu coordinates (%.1f%% smooth), %.1f s", worst, checked,
              100 * coverage, t)};
}

Verdict simulator_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t steps = 100000;
  const DemandProfile peak = DemandProfile::constant(4500, 500, static_cast<double>(steps) + 1);
  std::int64_t violations = 0, red_steps = 0, vehicles = 0;
  std::string first;
  auto flag = [&](const std::string& what) {
    if (violations++ == 0) first = what;
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Simulator sim(build_network(), peak, DriverParams{}, seed);
    const auto& net = sim.network();
    const int ramp = net.ramp_lane();
    const double stop = net.stop_line_pos();
    Rng phases(seed + 5000);
    for (std::int64_t i = 0; i < steps; ++i) {
      if (i % 4 == 0) sim.apply_signal(phases.uniform() < 0.5 ? SignalPhase::R : SignalPhase::G);
      std::vector<std::int64_t> held;  // ramp vehicles behind the stop line
      if (sim.phase() == SignalPhase::R) {
        ++red_steps;
        for (const auto& v : sim.lanes()[ramp])
          if (v.pos <= stop) held.push_back(v.id);
      }
      try {
        sim.step();
      } catch (const SimulationFault& e) {
        flag(fmt("seed %llu step %lld: %s", static_cast<unsigned long long>(seed), static_cast<long long>(i), e.what()));
        break;
      }
      const SimCounters& c = sim.counters();
      if (c.spawned != static_cast<std::int64_t>(sim.vehicle_count()) + c.exited || c.pending() < 0)
        flag(fmt("seed %llu step %lld: conservation", static_cast<unsigned long long>(seed), static_cast<long long>(i)));
      for (int l = 0; l < net.lane_count(); ++l) {
        const auto& vs = sim.lanes()[l];
        for (std::size_t k = 0; k < vs.size(); ++k) {
          if (vs[k].speed < 0 || vs[k].speed > net.speed_limit(l) + 1e-9)
            flag(fmt("seed %llu step %lld: speed bound", static_cast<unsigned long long>(seed), static_cast<long long>(i)));
          if (k > 0 && vs[k].pos > vs[k - 1].pos - vs[k - 1].length + 1e-9)
            flag(fmt("seed %llu step %lld: overlap", static_cast<unsigned long long>(seed), static_cast<long long>(i)));
        }
      }
      if (!held.empty()) {
        std::map<std::int64_t, double> now;
        for (const auto& v : sim.lanes()[ramp]) now[v.id] = v.pos;
        for (auto id : held) {
          const auto it = now.find(id);
          if (it == now.end() || it->second > stop + 1e-9)
            flag(fmt("seed %llu step %lld: vehicle %lld ran the red", static_cast<unsigned long long>(seed),
                     static_cast<long long>(i), static_cast<long long>(id)));
        }
      }
      if (i % 10000 == 9999) sim.take_metrics();
    }
    vehicles += sim.counters().spawned;
  }
  const double t = seconds_since(t0);
  return {violations == 0 && t < 300,
          fmt("%lld violations%s%s, %lld vehicles, %lld red steps, %.0f s", static_cast<long long>(violations),
              first.empty() ? "" : "; first: ", first.c_str(), static_cast<long long>(vehicles),
              static_cast<long long>(red_steps), t)};
}

Verdict alinea_closed_loop(const AlineaConfig& cfg) {
  const DemandProfile d = DemandProfile::constant(4500, 800, 3600);
  std::ostringstream detail;
  bool pass = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    Simulator open(build_network(), d, DriverParams{}, seed);
    Simulator closed(build_network(), d, DriverParams{}, seed);
    AlineaController ctl(cfg, 4.0);
    double open_sum = 0;
    int open_n = 0;
    int settled_at = -1;
    double at_15 = 0;
    for (int i = 0; i < 1800; ++i) {
      if (i % 4 == 0) closed.apply_signal(ctl.decide(closed).phase);
      open.step();
      closed.step();
      const int minute = (i + 1) / 60;
      if ((i + 1) % 60 == 0 && minute >= 10) {
        open_sum += open.probe_occupancy(60);
        ++open_n;
      }
      if ((i + 1) % 60 == 0 && minute >= 5 && minute <= 15) {
        const double m5 = closed.probe_occupancy(300);
        if (settled_at < 0 && std::abs(m5 - cfg.o_target) <= 0.05) settled_at = minute;
        if (minute == 15) at_15 = m5;
      }
    }
    const double open_occ = open_sum / open_n;
    const bool ok = open_occ >= cfg.o_target + 0.1 && settled_at > 0 && std::abs(at_15 - cfg.o_target) <= 0.05;
    pass = pass && ok;
    detail << fmt("seed %llu: open %.3f, controlled 5-min mean in band from minute %d, %.3f at minute 15; ",
                  static_cast<unsigned long long>(seed), open_occ, settled_at, at_15);
  }
  detail << fmt("target %.2f", cfg.o_target);
  return {pass, detail.str()};
}

Verdict pi_alinea_fixed_points() {
  PiAlineaConfig c;
  bool fixed = true;
  for (double red = c.red_min; red <= c.red_max; red += 4) {
    const PiAlineaStep s = pi_alinea_update(red, c.o_target, c.o_target, c, 4);
    fixed = fixed && s.red_state == red && s.red == red;
  }
  int worst_margin = 1 << 30;
  bool bounded = true;
  // Dyadic occupancies keep every update exact, so the bound applies as derived.
  for (double ki : {5.0, 20.0, 120.0}) {
    for (double dO : {1.0 / 64, 1.0 / 16, 1.0 / 8}) {
      PiAlineaConfig p = c;
      p.ki = ki;
      p.o_target = 0.25;
      const int bound = static_cast<int>(std::ceil((p.red_max - p.red_min) / (p.ki * dO)));
      const double o = p.o_target - dO;
      double red = p.red_max;
      int cycles = 0;
      while (red > p.red_min && cycles <= bound) {
        red = pi_alinea_update(red, o, o, p, 4).red_state;
        ++cycles;
      }
      bounded = bounded && red == p.red_min && cycles <= bound;
      worst_margin = std::min(worst_margin, bound - cycles);
    }
  }
  return {fixed && bounded, fmt("fixed point exact: %s; red_min reached within the bound in all 9 (K_I, do) cases: %s "
                                "(smallest slack %d cycles)",
                                fixed ? "yes" : "no", bounded ? "yes" : "no", worst_margin)};
}

struct Snapshot {
  std::int64_t frames;
  std::vector<float> weights;
};

struct Trained {
  std::uint64_t seed;
  TrainResult result;
  std::vector<Snapshot> snapshots;  // every 2e4 frames, final included
  double first_decile;
  double last_decile;
};

double decile_mean(const std::vector<EpisodeLog>& log, bool last) {
  const std::size_t n = std::max<std::size_t>(1, log.size() / 10);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += log[last ? log.size() - 1 - i : i].mean_reward;
  return s / static_cast<double>(n);
}

std::vector<Trained> train_desk_scale(const ExperimentConfig& base) {
  std::vector<Trained> out;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainerConfig tc = base.trainer;
    tc.total_frames = 200000;
    tc.seed = seed;
    tc.checkpoint_interval = 20000;
    const EnvConfig env = base.env();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Snapshot> snaps;
    TrainHooks hooks;
    hooks.on_checkpoint = [&](std::int64_t frames, std::span<const float> w) {
      snaps.push_back({frames, std::vector<float>(w.begin(), w.end())});
    };
    TrainResult r = train_loop([&env](std::uint64_t s) { return RampEnv(env, s); }, tc, hooks);
    if (snaps.empty() || snaps.back().frames != tc.total_frames) snaps.push_back({tc.total_frames, r.weights});
    Trained t{seed, std::move(r), std::move(snaps), 0, 0};
    t.first_decile = decile_mean(t.result.log, false);
    t.last_decile = decile_mean(t.result.log, true);
    std::printf("  trained seed %llu: %zu episodes, first decile %.3f, last decile %.3f, %.0f s\n",
                static_cast<unsigned long long>(seed), t.result.log.size(), t.first_decile, t.last_decile,
                seconds_since(t0));
    std::fflush(stdout);
    out.push_back(std::move(t));
  }
  return out;
}

Verdict learning_signal(const std::vector<Trained>& runs) {
  int improved = 0;
  std::string detail;
  for (const auto& t : runs) {
    improved += t.last_decile > t.first_decile;
    detail += fmt("seed %llu %.2f -> %.2f; ", static_cast<unsigned long long>(t.seed), t.first_decile, t.last_decile);
  }
  detail += fmt("%d of %zu improved", improved, runs.size());
  return {improved >= 2, detail};
}

std::vector<double> per_seed_tt(const ExperimentConfig& cfg, const std::string& kind,
                                const std::optional<Checkpoint>& ck = std::nullopt) {
  std::vector<double> tt;
  for (const auto& r : evaluate_seeds(cfg, kind, ck)) tt.push_back(mean_mainline_travel_time(r.metrics, cfg.warmup_s));
  return tt;
}

Verdict directional_reproduction(const ExperimentConfig& base, const std::vector<Trained>& runs) {
  // Model selection over all training snapshots on validation seeds that are
  // disjoint from the held-out test seeds.
  ExperimentConfig val = base;
  val.seeds = parse_seed_list("901-910");
  const double val_none = mean(per_seed_tt(val, "none"));
  const Trained* best_run = nullptr;
  const Snapshot* best = nullptr;
  double best_tt = INFINITY;
  std::size_t candidates = 0;
  for (const auto& t : runs) {
    for (const auto& s : t.snapshots) {
      const double m = mean(per_seed_tt(val, "drl", Checkpoint{t.result.spec, s.weights}));
      ++candidates;
      if (m < best_tt) best_tt = m, best = &s, best_run = &t;
    }
  }
  std::string detail = fmt("selected seed %llu at %lld frames out of %zu snapshots (validation %.1f s vs %.1f s "
                           "uncontrolled)",
                           static_cast<unsigned long long>(best_run->seed), static_cast<long long>(best->frames),
                           candidates, best_tt, val_none);

  ExperimentConfig test = base;
  test.seeds = parse_seed_list("1001-1010");
  const Checkpoint chosen{best_run->result.spec, best->weights};
  const std::vector<double> none = per_seed_tt(test, "none");
  const std::vector<double> drl = per_seed_tt(test, "drl", chosen);
  int better = 0;
  std::vector<double> change;
  for (std::size_t i = 0; i < none.size(); ++i) {
    better += drl[i] < none[i];
    change.push_back(percent_change(none[i], drl[i]));
  }
  const double mean_change = mean(change);
  detail += fmt("; held-out seeds 1001-1010: DRL faster on %d of 10, mean per-seed change %+.1f%% "
                "(mean tt %.1f s -> %.1f s)",
                better, mean_change, mean(none), mean(drl));
  return {better >= 7 && mean_change <= -5.0, detail};
}

Verdict queue_property(const ExperimentConfig& base) {
  const RunSummary none = metrics_aggregate(evaluate_seeds(base, "none"), base);
  double none_worst = 0;
  for (const auto& q : none.queue) none_worst = std::max(none_worst, q.q2);
  bool metered_ok = true;
  std::string detail = fmt("no-control worst per-minute median queue %.1f m", none_worst);
  for (const char* kind : {"fixed", "alinea", "pi_alinea"}) {
    const RunSummary s = metrics_aggregate(evaluate_seeds(base, kind), base);
    // peak: 8:10 to 8:40, i.e. minutes 20 to 50 of the horizon
    double peak = 0;
    for (std::size_t m = 20; m < 50 && m < s.queue.size(); ++m) peak = std::max(peak, s.queue[m].q2);
    metered_ok = metered_ok && peak > 0;
    detail += fmt("; %s peak median %.1f m", kind, peak);
  }
  return {none_worst < 5.0 && metered_ok, detail};
}

Verdict stochastic_machinery() {
  ReplayBuffer b(1000);
  for (int i = 0; i < 1000; ++i) {
    Transition t;
    t.reward = i;
    b.store(std::move(t));
  }
  Rng rng(77);
  std::vector<long long> counts(1000, 0);
  for (int i = 0; i < 100; ++i)
    for (auto idx : b.sample_indices(1000, rng)) ++counts[idx];
  const double p = oracle::chi_square_sf(oracle::chi_square_uniform(counts), 999);

  const std::vector<float> q = {0.1f, 0.4f};  // greedy choice is R
  const int n = 100000;
  int r = 0;
  Rng erng(78);
  for (int i = 0; i < n; ++i) r += epsilon_greedy(q, 0.1, erng) == SignalPhase::R;
  const double fr = static_cast<double>(r) / n, fg = 1 - fr;
  const bool eps_ok = std::abs(fr - 0.95) <= 0.01 && std::abs(fg - 0.05) <= 0.01;
  return {p > 0.01 && eps_ok, fmt("replay chi-square p = %.3f over 1e5 draws; epsilon 0.1: greedy %.4f, other %.4f",
                                  p, fr, fg)};
}

Verdict determinism_and_persistence(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  cfg.seeds = {7};
  std::string detail;
  bool ok = true;

  const auto a = evaluate_seeds(cfg, "pi_alinea"), b = evaluate_seeds(cfg, "pi_alinea");
  const bool metrics_same = series_csv(a[0].metrics) == series_csv(b[0].metrics) &&
                            summary_csv(metrics_aggregate(a, cfg)) == summary_csv(metrics_aggregate(b, cfg));
  ok = ok && metrics_same;
  detail += fmt("scenario metrics identical: %s", metrics_same ? "yes" : "no");

  TrainerConfig tc = cfg.trainer;
  tc.total_frames = 8400;
  tc.warmup_transitions = 500;
  const EnvConfig env = cfg.env();
  auto train = [&] {
    std::string log;
    TrainHooks h;
    h.on_episode = [&](const EpisodeLog& e) { log += training_log_row(e) + "\n"; };
    TrainResult r = train_loop([&env](std::uint64_t s) { return RampEnv(env, s); }, tc, h);
    return std::make_pair(log, r);
  };
  const auto [log1, r1] = train();
  const auto [log2, r2] = train();
  const bool train_same = log1 == log2 && r1.weights == r2.weights;
  ok = ok && train_same;
  detail += fmt("; training logs and weights identical: %s", train_same ? "yes" : "no");

  std::stringstream ss;
  save_checkpoint(ss, r1.spec, r1.weights);
  const std::string bytes = ss.str();
  ss.seekg(0);
  const Checkpoint ck = load_checkpoint(ss);
  std::stringstream again;
  save_checkpoint(again, ck.spec, ck.weights);
  const bool bits = ck.spec == r1.spec &&
                    std::memcmp(ck.weights.data(), r1.weights.data(), r1.weights.size() * sizeof(float)) == 0 &&
                    again.str() == bytes;
  QNetwork<float> net(ck.spec);
  Rng rng(3);
  bool forward_same = true;
  for (int i = 0; i < 20; ++i) {
    std::vector<float> x(static_cast<std::size_t>(ck.spec.input_size()));
    for (auto& v : x) v = static_cast<float>(rng.index(3)) - 1.0f;
    const auto qa = net.evaluate(r1.weights, x), qb = net.evaluate(ck.weights, x);
    forward_same = forward_same && qa.q == qb.q && qa.speed == qb.speed && qa.queue == qb.queue;
  }
  ok = ok && bits && forward_same;
  detail += fmt("; checkpoint round trip bit-exact: %s; reloaded forward identical: %s", bits ? "yes" : "no",
                forward_same ? "yes" : "no");
  return {ok, detail};
}

Verdict reward_oracle() {
  Rng rng(2024);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t L = 1 + rng.index(10);
    std::vector<double> v(L), q(L);
    for (auto& x : v) x = rng.uniform(0, 30);
    for (auto& x : q) x = rng.uniform(0, 400);
    const double mu = rng.uniform(0.01, 3), omega = -rng.uniform(0.01, 3);
    const double ref = oracle::window_reward(v, q, mu, omega);
    const double got = compute_reward(v, q, mu, omega, L);
    worst = std::max(worst, std::abs(got - ref) / std::max(std::abs(ref), 1e-300));
  }
  return {worst < 1e-9, fmt("max relative error %.2e over 1000 windows", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number; default is all ten.
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  const ExperimentConfig base = scenario();
  int failures = 0;
  auto report = [&](int n, const char* title, const std::function<Verdict()>& run) {
    if (!wanted(n)) return;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("criterion %2d %s: %s  (%s)\n", n, v.pass ? "PASS" : "FAIL", title, v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient correctness", gradient_correctness);
  report(2, "simulator soundness", simulator_soundness);
  report(3, "ALINEA closed loop", [&] { return alinea_closed_loop(base.alinea); });
  report(4, "PI-ALINEA fixed points", pi_alinea_fixed_points);
  std::vector<Trained> trained;
  if (wanted(5) || wanted(6)) {
    try {
      trained = train_desk_scale(base);
    } catch (const std::exception& e) {
      std::printf("  training failed: %s\n", e.what());
    }
  }
  report(5, "learning signal", [&] { return trained.empty() ? Verdict{false, "no training runs"} : learning_signal(trained); });
  report(6, "directional reproduction", [&] {
    return trained.empty() ? Verdict{false, "no training runs"} : directional_reproduction(base, trained);
  });
  report(7, "ramp queue property", [&] { return queue_property(base); });
  report(8, "stochastic machinery", stochastic_machinery);
  report(9, "determinism and persistence", [&] { return determinism_and_persistence(base); });
  report(10, "reward oracle", reward_oracle);
  return failures == 0 ? 0 : 1;
}
