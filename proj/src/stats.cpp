#include "rampq/stats.hpp"

#include <algorithm>
#include <cmath>

#include "rampq/errors.hpp"

namespace rampq {

namespace {

double sorted_quantile(const std::vector<double>& s, double p) {
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

}  // namespace

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw ContractError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("quantile: p must lie in [0, 1]");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return sorted_quantile(s, p);
}

Quartiles quartiles(std::span<const double> values) {
  Quartiles q;
  if (values.empty()) return q;
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  q.q1 = sorted_quantile(s, 0.25);
  q.q2 = sorted_quantile(s, 0.50);
  q.q3 = sorted_quantile(s, 0.75);
  q.n = s.size();
  return q;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double percent_change(double reference, double value) {
  if (reference == 0.0) throw ContractError("percent_change: zero reference");
  return 100.0 * (value - reference) / reference;
}

}  // namespace rampq
