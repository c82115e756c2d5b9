#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rampq/controllers.hpp"
#include "rampq/demand.hpp"
#include "rampq/encoder.hpp"
#include "rampq/network.hpp"
#include "rampq/simulator.hpp"
#include "rampq/trainer.hpp"

namespace rampq {

// Everything one experiment needs: scenario, controllers, trainer and the
// seed list. Read from a flat `key = value` file; see config_keys().
struct ExperimentConfig {
  std::string name;  // required; names the output directory
  std::vector<std::uint64_t> seeds;
  double horizon_s = 4200.0;  // 7:50 to 9:00
  double warmup_s = 600.0;    // discarded from travel-time statistics
  double decision_step = 4.0;
  std::string output_dir = "runs";
  int jobs = 1;

  GeometryConfig geometry;
  double demand_bin_s = 600.0;
  std::vector<double> demand_mainline;
  std::vector<double> demand_ramp;
  DriverParams drivers;
  Encoder::Options encoder;

  double fixed_green = 8.0;
  double fixed_red = 8.0;
  AlineaConfig alinea;
  PiAlineaConfig pi_alinea;

  TrainerConfig trainer;

  ExperimentConfig();

  DemandProfile demand() const;
  EnvConfig env() const;
  /// Cross-field checks; throws ConfigError naming the key.
  void validate() const;
};

using Override = std::pair<std::string, std::string>;

/// Every recognised key, in snapshot order.
std::vector<std::string> config_keys();
/// One-line description of a key (used for --help).
std::string config_key_help(const std::string& key);

/// Sets one key from its textual value. Throws ConfigError naming the key.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parses a config text. `source` prefixes diagnostics ("file:line: ...").
/// Overrides are applied after the file, then the result is validated.
ExperimentConfig parse_config(std::istream& in, const std::string& source,
                              const std::vector<Override>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::vector<Override>& overrides = {});

/// Fully resolved configuration; parse_config() of it yields an identical
/// configuration.
std::string config_snapshot(const ExperimentConfig& cfg);

/// "1-3,7" -> {1,2,3,7}.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Output root: $RAMPQ_OUTPUT_DIR when set, else cfg.output_dir.
std::string output_root(const ExperimentConfig& cfg);

}  // namespace rampq
