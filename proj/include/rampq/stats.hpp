#pragma once

#include <span>
#include <vector>

namespace rampq {

/// Quantile by linear interpolation between order statistics: position
/// p * (n - 1) in the sorted sample. Throws ContractError on an empty sample
/// or p outside [0, 1].
double quantile(std::span<const double> values, double p);

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
  std::size_t n = 0;
};

/// Q1/Q2/Q3 of the sample; all zero with n = 0 for an empty sample.
Quartiles quartiles(std::span<const double> values);

double mean(std::span<const double> values);

/// Percent change of `value` relative to `reference`.
double percent_change(double reference, double value);

}  // namespace rampq
