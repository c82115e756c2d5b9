#include "rampq/demand.hpp"

#include <string>

#include "rampq/errors.hpp"

namespace rampq {

DemandProfile::DemandProfile(std::vector<DemandBin> bins) : bins_(std::move(bins)) {
  for (std::size_t i = 0; i < bins_.size(); ++i) {
    const auto& b = bins_[i];
    const std::string where = "demand bin " + std::to_string(i);
    if (!(b.end_s > b.start_s)) throw ConfigError(where + ": end must follow start");
    if (b.mainline_rate < 0 || b.ramp_rate < 0) throw ConfigError(where + ": negative rate");
    if (i > 0 && b.start_s != bins_[i - 1].end_s)
      throw ConfigError(where + ": bins must be contiguous and non-overlapping");
  }
}

DemandRates DemandProfile::rates_at(double t) const {
  for (const auto& b : bins_) {
    if (t >= b.start_s && t < b.end_s) return {b.mainline_rate, b.ramp_rate};
  }
  return {};
}

DemandProfile DemandProfile::constant(double mainline_rate, double ramp_rate, double horizon_s) {
  return DemandProfile({{0.0, horizon_s, mainline_rate, ramp_rate}});
}

DemandProfile DemandProfile::from_rates(double bin_s, const std::vector<double>& mainline,
                                        const std::vector<double>& ramp) {
  if (mainline.size() != ramp.size())
    throw ConfigError("demand: mainline and ramp rate lists differ in length");
  if (!(bin_s > 0)) throw ConfigError("demand.bin_s: must be positive");
  std::vector<DemandBin> bins;
  for (std::size_t i = 0; i < mainline.size(); ++i) {
    bins.push_back({bin_s * static_cast<double>(i), bin_s * static_cast<double>(i + 1),
                    mainline[i], ramp[i]});
  }
  return DemandProfile(std::move(bins));
}

DemandProfile DemandProfile::morning_peak() {
  return from_rates(600.0, {2400, 3300, 4500, 4500, 4500, 3300, 2400},
                    {250, 400, 500, 500, 500, 350, 250});
}

}  // namespace rampq
