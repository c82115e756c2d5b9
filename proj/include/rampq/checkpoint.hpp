#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rampq/qnet.hpp"

namespace rampq {

struct Checkpoint {
  NetworkSpec spec;
  std::vector<float> weights;
};

// Layout: "RMQN1\n", "spec <descriptor>\n", "params <count>\n", then the
// parameters as little-endian IEEE-754 binary32 in declaration order.
void save_checkpoint(std::ostream& os, const NetworkSpec& spec, std::span<const float> weights);
void save_checkpoint(const std::string& path, const NetworkSpec& spec, std::span<const float> weights);
/// Throws ConfigError for a bad magic, malformed header or truncated data.
Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rampq
