#pragma once

namespace rampq {

/// Raw geometry settings as read from configuration. Lengths in meters,
/// speeds in m/s.
struct GeometryConfig {
  int mainline_lanes = 3;
  int ramp_lanes = 1;
  double upstream_len = 800.0;
  double merge_start = 800.0;
  double merge_end = 1000.0;
  double downstream_len = 650.0;
  double ramp_len = 300.0;
  double stop_line_pos = 300.0;
  double detector_pos = 1005.0;
  int detector_lane = 0;  // mainline lane of the occupancy loop; -1 averages all lanes
  double mainline_speed_limit = 80.0 / 3.6;
  double ramp_speed_limit = 40.0 / 3.6;
};

// Merge section: N mainline lanes on a shared axis starting at 0, and one
// on-ramp whose own axis runs from 0 (ramp entry) to ramp_len (gore), then
// continues as an acceleration lane alongside the merge zone.
class MergeNetwork {
 public:
  int mainline_lanes() const { return cfg_.mainline_lanes; }
  int ramp_lanes() const { return cfg_.ramp_lanes; }
  /// Lane index used for the ramp; mainline lanes are 0..mainline_lanes-1.
  int ramp_lane() const { return cfg_.mainline_lanes; }
  int lane_count() const { return cfg_.mainline_lanes + cfg_.ramp_lanes; }

  double upstream_len() const { return cfg_.upstream_len; }
  double merge_start() const { return cfg_.merge_start; }
  double merge_end() const { return cfg_.merge_end; }
  double merge_len() const { return cfg_.merge_end - cfg_.merge_start; }
  double downstream_len() const { return cfg_.downstream_len; }
  double mainline_length() const { return cfg_.merge_end + cfg_.downstream_len; }

  double ramp_len() const { return cfg_.ramp_len; }
  /// End of the acceleration lane on the ramp axis.
  double ramp_end() const { return cfg_.ramp_len + merge_len(); }
  double stop_line_pos() const { return cfg_.stop_line_pos; }
  double detector_pos() const { return cfg_.detector_pos; }
  int detector_lane() const { return cfg_.detector_lane; }

  double mainline_speed_limit() const { return cfg_.mainline_speed_limit; }
  double ramp_speed_limit() const { return cfg_.ramp_speed_limit; }
  double speed_limit(int lane) const {
    return lane == ramp_lane() ? cfg_.ramp_speed_limit : cfg_.mainline_speed_limit;
  }
  double lane_end(int lane) const {
    return lane == ramp_lane() ? ramp_end() : mainline_length();
  }

  /// Physical mainline coordinate of a point on the acceleration lane.
  double accel_to_mainline(double ramp_pos) const {
    return cfg_.merge_start + (ramp_pos - cfg_.ramp_len);
  }
  /// Mainline-axis coordinate used for drawing ramp positions: the stop line
  /// lands on the merge-zone start.
  double ramp_raster_offset() const { return cfg_.merge_start - cfg_.stop_line_pos; }

  const GeometryConfig& config() const { return cfg_; }

 private:
  friend MergeNetwork build_network(const GeometryConfig&);
  explicit MergeNetwork(const GeometryConfig& cfg) : cfg_(cfg) {}
  GeometryConfig cfg_;
};

/// Validates the geometry and returns the immutable network description.
/// Throws ConfigError naming the offending field.
MergeNetwork build_network(const GeometryConfig& cfg = {});

}  // namespace rampq
