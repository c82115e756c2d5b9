#include "rampq/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace rampq {

namespace {

constexpr const char* kMagic = "RMQN1";

std::string read_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("checkpoint: truncated header");
  return line;
}

std::string strip_prefix(const std::string& line, const std::string& prefix) {
  if (line.rfind(prefix, 0) != 0) throw ConfigError("checkpoint: expected '" + prefix + "' line");
  return line.substr(prefix.size());
}

}  // namespace

void save_checkpoint(std::ostream& os, const NetworkSpec& spec, std::span<const float> weights) {
  if (weights.size() != ParamLayout::of(spec).total)
    throw ContractError("save_checkpoint: weight count does not match the spec");
  os << kMagic << '\n' << "spec " << spec.descriptor() << '\n' << "params " << weights.size() << '\n';
  std::vector<char> buf(weights.size() * 4);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(weights[i]);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw ConfigError("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const NetworkSpec& spec, std::span<const float> weights) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(os, spec, weights);
}

Checkpoint load_checkpoint(std::istream& is) {
  if (read_line(is) != kMagic) throw ConfigError("checkpoint: bad magic (expected RMQN1)");
  Checkpoint c;
  c.spec = NetworkSpec::from_descriptor(strip_prefix(read_line(is), "spec "));
  const std::string count_text = strip_prefix(read_line(is), "params ");
  std::size_t count = 0;
  try {
    count = std::stoull(count_text);
  } catch (const std::exception&) {
    throw ConfigError("checkpoint: bad parameter count '" + count_text + "'");
  }
  if (count != ParamLayout::of(c.spec).total)
    throw ConfigError("checkpoint: parameter count does not match the spec");
  std::vector<unsigned char> buf(count * 4);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw ConfigError("checkpoint: truncated parameters");
  c.weights.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
    c.weights[i] = std::bit_cast<float>(bits);
  }
  return c;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace rampq
