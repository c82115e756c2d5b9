#include "rampq/network.hpp"

#include <string>

#include "rampq/errors.hpp"

namespace rampq {

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(std::string("geometry.") + field + ": " + what);
}

}  // namespace

MergeNetwork build_network(const GeometryConfig& c) {
  require(c.mainline_lanes >= 1, "mainline_lanes", "need at least one mainline lane");
  require(c.ramp_lanes == 1, "ramp_lanes", "exactly one ramp lane is supported");
  require(c.upstream_len > 0, "upstream_len", "must be positive");
  require(c.downstream_len > 0, "downstream_len", "must be positive");
  require(c.ramp_len > 0, "ramp_len", "must be positive");
  require(c.merge_start == c.upstream_len, "merge_start",
          "merge zone must start where the upstream section ends");
  require(c.merge_start < c.merge_end, "merge_end", "must lie downstream of merge_start");
  require(c.detector_pos > c.merge_end, "detector_pos", "must lie downstream of the merge zone");
  require(c.detector_pos < c.merge_end + c.downstream_len, "detector_pos",
          "must lie inside the downstream section");
  require(c.detector_lane >= -1 && c.detector_lane < c.mainline_lanes, "detector_lane",
          "must be a mainline lane index or -1");
  require(c.stop_line_pos > 0 && c.stop_line_pos <= c.ramp_len, "stop_line_pos",
          "must lie on the ramp, in (0, ramp_len]");
  require(c.stop_line_pos <= c.merge_start, "stop_line_pos",
          "ramp upstream of the stop line must fit beside the upstream section");
  require(c.mainline_speed_limit > 0, "mainline_speed_limit", "must be positive");
  require(c.ramp_speed_limit > 0, "ramp_speed_limit", "must be positive");

  MergeNetwork net(c);
  require(net.ramp_end() + net.ramp_raster_offset() < net.mainline_length(), "stop_line_pos",
          "acceleration lane would extend past the end of the network");
  return net;
}

}  // namespace rampq
