#include "rampq/qnet.hpp"

#include <sstream>

namespace rampq {

void NetworkSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("network: " + what);
  };
  require(channels > 0 && height > 0 && width > 0, "input dimensions must be positive");
  for (const ConvSpec* c : {&conv1, &conv2}) {
    require(c->filters > 0 && c->kernel_h > 0 && c->kernel_w > 0 && c->stride_h > 0 && c->stride_w > 0,
            "convolution sizes must be positive");
  }
  require(conv1.kernel_h <= height && conv1.kernel_w <= width, "conv1 kernel larger than the input");
  require(conv2.kernel_h <= conv1_h() && conv2.kernel_w <= conv1_w(),
          "conv2 kernel larger than the conv1 output");
  require(hidden > 0, "hidden width must be positive");
  require(actions == 2, "the Q head must have one output per action (2)");
  require(aux == 2, "the auxiliary head predicts speed and queue (2 outputs)");
}

std::string NetworkSpec::descriptor() const {
  std::ostringstream os;
  os << channels << ' ' << height << ' ' << width;
  for (const ConvSpec* c : {&conv1, &conv2}) {
    os << ' ' << c->filters << ' ' << c->kernel_h << ' ' << c->kernel_w << ' ' << c->stride_h << ' '
       << c->stride_w;
  }
  os << ' ' << hidden << ' ' << actions << ' ' << aux;
  return os.str();
}

NetworkSpec NetworkSpec::from_descriptor(const std::string& text) {
  std::istringstream is(text);
  NetworkSpec s;
  is >> s.channels >> s.height >> s.width;
  for (ConvSpec* c : {&s.conv1, &s.conv2}) is >> c->filters >> c->kernel_h >> c->kernel_w >> c->stride_h >> c->stride_w;
  is >> s.hidden >> s.actions >> s.aux;
  if (!is) throw ConfigError("network: malformed descriptor '" + text + "'");
  std::string rest;
  if (is >> rest) throw ConfigError("network: trailing data in descriptor '" + text + "'");
  s.validate();
  return s;
}

NetworkSpec NetworkSpec::reduced() {
  NetworkSpec s;
  s.width = 16;
  s.conv1 = {4, 2, 4, 1, 2};
  s.conv2 = {8, 2, 3, 1, 2};
  s.hidden = 16;
  return s;
}

ParamLayout ParamLayout::of(const NetworkSpec& s) {
  ParamLayout l{};
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  l.conv1_w = take(static_cast<std::size_t>(s.conv1.filters) * s.channels * s.conv1.kernel_h * s.conv1.kernel_w);
  l.conv1_b = take(s.conv1.filters);
  l.conv2_w = take(static_cast<std::size_t>(s.conv2.filters) * s.conv1.filters * s.conv2.kernel_h * s.conv2.kernel_w);
  l.conv2_b = take(s.conv2.filters);
  l.fc_w = take(static_cast<std::size_t>(s.hidden) * s.conv2_size());
  l.fc_b = take(s.hidden);
  l.q_w = take(static_cast<std::size_t>(s.actions) * s.hidden);
  l.q_b = take(s.actions);
  l.aux_w = take(static_cast<std::size_t>(s.aux) * s.hidden);
  l.aux_b = take(s.aux);
  l.total = at;
  return l;
}

}  // namespace rampq
