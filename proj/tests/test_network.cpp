#include <gtest/gtest.h>

#include "rampq/demand.hpp"
#include "rampq/errors.hpp"
#include "rampq/network.hpp"

using namespace rampq;

TEST(Network, DefaultHasThreeMainlineLanesAndOneRamp) {
  const MergeNetwork net = build_network();
  EXPECT_EQ(net.mainline_lanes(), 3);
  EXPECT_EQ(net.ramp_lanes(), 1);
  EXPECT_EQ(net.lane_count(), 4);
  EXPECT_NEAR(net.mainline_speed_limit(), 22.22, 0.01);
  EXPECT_NEAR(net.ramp_speed_limit(), 11.11, 0.01);
}

TEST(Network, DetectorInsideMergeZoneIsRejected) {
  GeometryConfig g;
  g.detector_pos = g.merge_end - 1.0;
  try {
    build_network(g);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("detector_pos"), std::string::npos);
  }
}

TEST(Network, HandCheckedGeometryIsValid) {
  GeometryConfig g;
  g.upstream_len = 800;
  g.merge_start = 800;
  g.merge_end = 950;
  g.downstream_len = 650;
  g.detector_pos = 1000;
  const MergeNetwork net = build_network(g);
  EXPECT_DOUBLE_EQ(net.merge_len(), 150.0);
  EXPECT_DOUBLE_EQ(net.mainline_length(), 1600.0);
}

TEST(Network, RejectsBrokenGeometry) {
  auto rejects = [](auto mutate) {
    GeometryConfig g;
    mutate(g);
    EXPECT_THROW(build_network(g), ConfigError);
  };
  rejects([](GeometryConfig& g) { g.merge_end = g.merge_start; });
  rejects([](GeometryConfig& g) { g.ramp_len = 0; });
  rejects([](GeometryConfig& g) { g.downstream_len = -1; });
  rejects([](GeometryConfig& g) { g.mainline_lanes = 0; });
  rejects([](GeometryConfig& g) { g.detector_lane = 3; });
  rejects([](GeometryConfig& g) { g.stop_line_pos = g.ramp_len + 1; });
}

TEST(Network, AccelerationLaneMapsOntoMainlineAxis) {
  const MergeNetwork net = build_network();
  EXPECT_DOUBLE_EQ(net.accel_to_mainline(net.ramp_len()), net.merge_start());
  EXPECT_DOUBLE_EQ(net.accel_to_mainline(net.ramp_end()), net.merge_end());
}

TEST(Demand, BinsAreContiguousAndLookupIsPiecewiseConstant) {
  const DemandProfile d = DemandProfile::from_rates(600, {1000, 2000}, {100, 200});
  ASSERT_EQ(d.bins().size(), 2u);
  EXPECT_DOUBLE_EQ(d.horizon(), 1200.0);
  EXPECT_DOUBLE_EQ(d.rates_at(0).mainline, 1000.0);
  EXPECT_DOUBLE_EQ(d.rates_at(599.5).ramp, 100.0);
  EXPECT_DOUBLE_EQ(d.rates_at(600).mainline, 2000.0);
}

TEST(Demand, RejectsNegativeRatesAndGaps) {
  EXPECT_THROW(DemandProfile::from_rates(600, {-1}, {0}), ConfigError);
  EXPECT_THROW(DemandProfile::from_rates(600, {1, 2}, {0}), ConfigError);
  EXPECT_THROW(DemandProfile({{0, 10, 1, 1}, {20, 30, 1, 1}}), ConfigError);
}

TEST(Demand, MorningPeakSpansSeventyMinutes) {
  const DemandProfile d = DemandProfile::morning_peak();
  EXPECT_DOUBLE_EQ(d.horizon(), 4200.0);
  double peak = 0;
  for (const auto& b : d.bins()) peak = std::max(peak, b.mainline_rate);
  EXPECT_GT(peak, d.bins().front().mainline_rate);
  EXPECT_GT(peak, d.bins().back().mainline_rate);
}
