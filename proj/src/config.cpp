#include "rampq/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "rampq/errors.hpp"

namespace rampq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x)) throw ConfigError("expected a number, got '" + v + "'");
  return x;
}

template <class Int>
Int to_int(const std::string& v) {
  Int x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError("expected an integer, got '" + v + "'");
  return x;
}

std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item)));
  if (out.empty()) throw ConfigError("expected a comma-separated list of numbers");
  return out;
}

ConvSpec to_conv(const std::string& v) {
  std::istringstream is(v);
  ConvSpec c;
  is >> c.filters >> c.kernel_h >> c.kernel_w >> c.stride_h >> c.stride_w;
  std::string rest;
  if (!is || (is >> rest)) throw ConfigError("expected 'filters kernel_h kernel_w stride_h stride_w'");
  return c;
}

std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

template <class Int>
std::string fmt_int(Int x) {
  return std::to_string(x);
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

std::string fmt_conv(const ConvSpec& c) {
  std::ostringstream os;
  os << c.filters << ' ' << c.kernel_h << ' ' << c.kernel_w << ' ' << c.stride_h << ' ' << c.stride_w;
  return os.str();
}

std::string fmt_seeds(const std::vector<std::uint64_t>& seeds) {
  // compress consecutive runs into ranges
  std::string s;
  for (std::size_t i = 0; i < seeds.size();) {
    std::size_t j = i;
    while (j + 1 < seeds.size() && seeds[j + 1] == seeds[j] + 1) ++j;
    if (!s.empty()) s += ',';
    s += std::to_string(seeds[i]);
    if (j > i) s += '-' + std::to_string(seeds[j]);
    i = j + 1;
  }
  return s;
}

struct Key {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define RQ_DOUBLE(key, field, help)                                                         \
  Key {                                                                                     \
    key, help, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const ExperimentConfig& c) { return fmt(c.field); }                              \
  }
#define RQ_INT(key, type, field, help)                                                          \
  Key {                                                                                         \
    key, help, [](ExperimentConfig& c, const std::string& v) { c.field = to_int<type>(v); }, \
        [](const ExperimentConfig& c) { return fmt_int(c.field); }                              \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      {"experiment.name", "run name; names the output directory (required)",
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty() || v.find('/') != std::string::npos) throw ConfigError("expected a plain name");
         c.name = v;
       },
       [](const ExperimentConfig& c) { return c.name; }},
      {"experiment.seeds", "evaluation seeds, e.g. 1-20 or 1,4,9",
       [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); },
       [](const ExperimentConfig& c) { return fmt_seeds(c.seeds); }},
      RQ_DOUBLE("experiment.horizon_s", horizon_s, "simulated seconds per run"),
      RQ_DOUBLE("experiment.warmup_s", warmup_s, "initial seconds excluded from travel-time statistics"),
      RQ_DOUBLE("experiment.decision_step", decision_step, "seconds between control decisions"),
      {"experiment.output_dir", "output root (RAMPQ_OUTPUT_DIR takes precedence)",
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty()) throw ConfigError("expected a directory");
         c.output_dir = v;
       },
       [](const ExperimentConfig& c) { return c.output_dir; }},
      RQ_INT("experiment.jobs", int, jobs, "seeds evaluated concurrently"),

      RQ_INT("geometry.mainline_lanes", int, geometry.mainline_lanes, "mainline lanes"),
      RQ_INT("geometry.ramp_lanes", int, geometry.ramp_lanes, "on-ramp lanes"),
      RQ_DOUBLE("geometry.upstream_len", geometry.upstream_len, "mainline upstream of the merge (m)"),
      RQ_DOUBLE("geometry.merge_start", geometry.merge_start, "merge zone start on the mainline axis (m)"),
      RQ_DOUBLE("geometry.merge_end", geometry.merge_end, "merge zone end on the mainline axis (m)"),
      RQ_DOUBLE("geometry.downstream_len", geometry.downstream_len, "mainline downstream of the merge (m)"),
      RQ_DOUBLE("geometry.ramp_len", geometry.ramp_len, "ramp length up to the gore (m)"),
      RQ_DOUBLE("geometry.stop_line_pos", geometry.stop_line_pos, "signal stop line on the ramp axis (m)"),
      RQ_DOUBLE("geometry.detector_pos", geometry.detector_pos, "occupancy detector on the mainline axis (m)"),
      RQ_INT("geometry.detector_lane", int, geometry.detector_lane, "detector lane, -1 for all lanes"),
      RQ_DOUBLE("geometry.mainline_speed_limit", geometry.mainline_speed_limit, "m/s"),
      RQ_DOUBLE("geometry.ramp_speed_limit", geometry.ramp_speed_limit, "m/s"),

      RQ_DOUBLE("demand.bin_s", demand_bin_s, "length of one demand bin (s)"),
      {"demand.mainline", "mainline veh/h per bin, comma separated",
       [](ExperimentConfig& c, const std::string& v) { c.demand_mainline = to_list(v); },
       [](const ExperimentConfig& c) { return fmt_list(c.demand_mainline); }},
      {"demand.ramp", "ramp veh/h per bin, comma separated",
       [](ExperimentConfig& c, const std::string& v) { c.demand_ramp = to_list(v); },
       [](const ExperimentConfig& c) { return fmt_list(c.demand_ramp); }},

      RQ_DOUBLE("drivers.dt", drivers.dt, "simulation step (s)"),
      RQ_DOUBLE("drivers.tau", drivers.tau, "reaction time (s)"),
      RQ_DOUBLE("drivers.accel", drivers.accel, "m/s^2"),
      RQ_DOUBLE("drivers.decel", drivers.decel, "m/s^2"),
      RQ_DOUBLE("drivers.sigma", drivers.sigma, "driver imperfection in [0, 1]"),
      RQ_DOUBLE("drivers.min_gap", drivers.min_gap, "m"),
      RQ_DOUBLE("drivers.length", drivers.length, "vehicle length (m)"),
      RQ_DOUBLE("drivers.queue_speed", drivers.queue_speed, "speed below which ramp vehicles count as queued (m/s)"),
      RQ_DOUBLE("drivers.heat_cell_m", drivers.heat_cell_m, "speed heatmap cell length (m)"),
      RQ_DOUBLE("drivers.heat_bin_s", drivers.heat_bin_s, "speed heatmap time bin (s)"),

      RQ_INT("encoder.rows", int, encoder.rows_out, "rows of the position matrix, 0 = mainline lanes + 1"),
      RQ_INT("encoder.cols", int, encoder.cols_out, "columns of the position matrix"),
      RQ_INT("encoder.supersample", int, encoder.supersample, "raster refinement before pooling"),
      RQ_INT("encoder.depth", int, encoder.depth, "frames per state"),

      RQ_DOUBLE("controllers.fixed.green", fixed_green, "s"),
      RQ_DOUBLE("controllers.fixed.red", fixed_red, "s"),
      RQ_DOUBLE("controllers.alinea.kr", alinea.kr, "veh/h per unit occupancy"),
      RQ_DOUBLE("controllers.alinea.o_target", alinea.o_target, "target occupancy"),
      RQ_DOUBLE("controllers.alinea.r_min", alinea.r_min, "veh/h"),
      RQ_DOUBLE("controllers.alinea.r_max", alinea.r_max, "veh/h"),
      RQ_DOUBLE("controllers.alinea.cycle_len", alinea.cycle_len, "s"),
      RQ_DOUBLE("controllers.alinea.discharge", alinea.discharge, "ramp discharge during green (veh/h)"),
      RQ_DOUBLE("controllers.alinea.initial_rate", alinea.initial_rate, "veh/h"),
      RQ_DOUBLE("controllers.pi_alinea.kp", pi_alinea.kp, "s per unit occupancy"),
      RQ_DOUBLE("controllers.pi_alinea.ki", pi_alinea.ki, "s per unit occupancy"),
      RQ_DOUBLE("controllers.pi_alinea.o_target", pi_alinea.o_target, "target occupancy"),
      RQ_DOUBLE("controllers.pi_alinea.green_len", pi_alinea.green_len, "s"),
      RQ_DOUBLE("controllers.pi_alinea.red_min", pi_alinea.red_min, "s"),
      RQ_DOUBLE("controllers.pi_alinea.red_max", pi_alinea.red_max, "s"),
      RQ_DOUBLE("controllers.pi_alinea.initial_red", pi_alinea.initial_red, "s"),

      RQ_INT("trainer.batch_size", int, trainer.batch_size, "minibatch size k"),
      RQ_DOUBLE("trainer.learning_rate", trainer.learning_rate, "ADAM step size"),
      RQ_DOUBLE("trainer.epsilon", trainer.epsilon, "exploration rate"),
      RQ_INT("trainer.freeze_interval", std::int64_t, trainer.freeze_interval, "updates between target syncs"),
      RQ_DOUBLE("trainer.mu", trainer.mu, "reward weight on merge speed (> 0)"),
      RQ_DOUBLE("trainer.omega", trainer.omega, "reward weight on ramp queue (< 0)"),
      RQ_DOUBLE("trainer.gamma", trainer.gamma, "discount factor"),
      RQ_DOUBLE("trainer.lambda", trainer.lambda, "weight of the auxiliary loss"),
      RQ_INT("trainer.total_frames", std::int64_t, trainer.total_frames, "simulation steps of training"),
      RQ_INT("trainer.warmup_transitions", std::int64_t, trainer.warmup_transitions,
             "random-policy transitions stored before learning"),
      {"trainer.buffer_size", "replay capacity",
       [](ExperimentConfig& c, const std::string& v) { c.trainer.buffer_size = to_int<std::size_t>(v); },
       [](const ExperimentConfig& c) { return fmt_int(c.trainer.buffer_size); }},
      RQ_INT("trainer.checkpoint_interval", std::int64_t, trainer.checkpoint_interval,
             "frames between periodic checkpoints, 0 for none"),
      RQ_INT("trainer.seed", std::uint64_t, trainer.seed, "training seed"),
      RQ_DOUBLE("trainer.speed_scale", trainer.speed_scale, "speed normaliser of the auxiliary head, 0 = speed limit"),
      RQ_DOUBLE("trainer.queue_scale", trainer.queue_scale, "queue normaliser of the auxiliary head, 0 = ramp length"),

      {"network.conv1", "filters kernel_h kernel_w stride_h stride_w",
       [](ExperimentConfig& c, const std::string& v) { c.trainer.network.conv1 = to_conv(v); },
       [](const ExperimentConfig& c) { return fmt_conv(c.trainer.network.conv1); }},
      {"network.conv2", "filters kernel_h kernel_w stride_h stride_w",
       [](ExperimentConfig& c, const std::string& v) { c.trainer.network.conv2 = to_conv(v); },
       [](const ExperimentConfig& c) { return fmt_conv(c.trainer.network.conv2); }},
      RQ_INT("network.hidden", int, trainer.network.hidden, "units of the shared dense layer"),
  };
  return keys;
}

#undef RQ_DOUBLE
#undef RQ_INT

const Key* find_key(const std::string& name) {
  for (const auto& k : registry()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const std::set<std::string>& required_keys() {
  static const std::set<std::string> keys = {"experiment.name"};
  return keys;
}

// The network input follows the encoder; everything time-related follows the
// experiment horizon and decision step.
void sync_derived(ExperimentConfig& c) {
  c.trainer.decision_step = c.decision_step;
  c.trainer.network.channels = c.encoder.depth;
  c.trainer.network.height = c.encoder.rows_out > 0 ? c.encoder.rows_out : c.geometry.mainline_lanes + 1;
  c.trainer.network.width = c.encoder.cols_out;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  seeds = parse_seed_list("1-20");
  const DemandProfile d = DemandProfile::morning_peak();
  demand_bin_s = d.bins().front().end_s - d.bins().front().start_s;
  for (const auto& b : d.bins()) {
    demand_mainline.push_back(b.mainline_rate);
    demand_ramp.push_back(b.ramp_rate);
  }
  sync_derived(*this);
}

DemandProfile ExperimentConfig::demand() const {
  return DemandProfile::from_rates(demand_bin_s, demand_mainline, demand_ramp);
}

EnvConfig ExperimentConfig::env() const {
  EnvConfig e;
  e.geometry = geometry;
  e.demand = demand();
  e.drivers = drivers;
  e.encoder = encoder;
  e.decision_step = decision_step;
  e.episode_s = horizon_s;
  return e;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + ": " + what);
  };
  require(!name.empty(), "experiment.name", "missing required key");
  require(!seeds.empty(), "experiment.seeds", "seed list must not be empty");
  require(horizon_s > 0, "experiment.horizon_s", "must be positive");
  require(warmup_s >= 0 && warmup_s < horizon_s, "experiment.warmup_s", "must lie in [0, horizon_s)");
  require(decision_step > 0, "experiment.decision_step", "must be positive");
  require(jobs >= 1, "experiment.jobs", "must be at least 1");
  require(fixed_green > 0, "controllers.fixed.green", "must be positive");
  require(fixed_red > 0, "controllers.fixed.red", "must be positive");
  require(drivers.sigma >= 0 && drivers.sigma <= 1, "drivers.sigma", "must lie in [0, 1]");
  require(drivers.accel > 0, "drivers.accel", "must be positive");
  require(drivers.decel > 0, "drivers.decel", "must be positive");
  require(drivers.length > 0, "drivers.length", "must be positive");
  require(drivers.min_gap >= 0, "drivers.min_gap", "must be non-negative");
  require(drivers.heat_cell_m > 0, "drivers.heat_cell_m", "must be positive");
  require(drivers.heat_bin_s > 0, "drivers.heat_bin_s", "must be positive");
  const double steps = decision_step / drivers.dt;
  require(std::abs(steps - std::round(steps)) < 1e-9 && steps >= 1, "experiment.decision_step",
          "must be a whole number of simulation steps");
  build_network(geometry);
  demand();
  alinea.validate();
  pi_alinea.validate();
  trainer.validate();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const auto& k : registry()) names.push_back(k.name);
  return names;
}

std::string config_key_help(const std::string& key) {
  const Key* k = find_key(key);
  return k ? k->help : std::string();
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown key '" + key + "'");
  try {
    k->set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
  sync_derived(cfg);
}

ExperimentConfig parse_config(std::istream& in, const std::string& source,
                              const std::vector<Override>& overrides) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end())
      throw ConfigError(where + "key '" + key + "' already set on line " + std::to_string(it->second));
    seen[key] = lineno;
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (in.bad()) throw ConfigError(source + ": read error");
  for (const auto& [key, value] : overrides) {
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("command line: ") + e.what());
    }
    seen[key] = 0;
  }
  for (const auto& key : required_keys()) {
    if (!seen.count(key)) throw ConfigError(source + ": missing required key '" + key + "'");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    const std::string key = msg.substr(0, colon);
    auto it = seen.find(key);
    if (it != seen.end() && it->second > 0)
      throw ConfigError(source + ":" + std::to_string(it->second) + ": " + msg);
    throw ConfigError(source + ": " + msg);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<Override>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse_config(in, path, overrides);
}

std::string config_snapshot(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# resolved configuration\n";
  std::string section;
  for (const auto& k : registry()) {
    const std::string head = k.name.substr(0, k.name.find('.'));
    if (head != section) {
      if (!section.empty()) os << '\n';
      section = head;
    }
    os << k.name << " = " << k.get(cfg) << '\n';
  }
  return os.str();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(to_int<std::uint64_t>(item));
      continue;
    }
    const auto lo = to_int<std::uint64_t>(trim(item.substr(0, dash)));
    const auto hi = to_int<std::uint64_t>(trim(item.substr(dash + 1)));
    if (hi < lo) throw ConfigError("seed range '" + item + "' is descending");
    if (hi - lo > 100000) throw ConfigError("seed range '" + item + "' is too large");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("seed list repeats a seed");
  return seeds;
}

std::string output_root(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("RAMPQ_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

}  // namespace rampq
