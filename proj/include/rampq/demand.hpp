#pragma once

#include <vector>

namespace rampq {

struct DemandBin {
  double start_s;
  double end_s;
  double mainline_rate;  // veh/h summed over all mainline lanes
  double ramp_rate;      // veh/h
};

struct DemandRates {
  double mainline = 0.0;
  double ramp = 0.0;
};

// Piecewise-constant arrival rates. Times are seconds since simulation start.
class DemandProfile {
 public:
  DemandProfile() = default;
  /// Throws ConfigError for gaps, overlaps or negative rates.
  explicit DemandProfile(std::vector<DemandBin> bins);

  /// Rates in effect at time t; zero outside the covered span.
  DemandRates rates_at(double t) const;
  double horizon() const { return bins_.empty() ? 0.0 : bins_.back().end_s; }
  const std::vector<DemandBin>& bins() const { return bins_; }

  static DemandProfile constant(double mainline_rate, double ramp_rate, double horizon_s);
  /// Equal-width bins starting at t = 0.
  static DemandProfile from_rates(double bin_s, const std::vector<double>& mainline,
                                  const std::vector<double>& ramp);
  /// 70-minute morning profile in 10-minute bins.
  static DemandProfile morning_peak();

 private:
  std::vector<DemandBin> bins_;
};

}  // namespace rampq
