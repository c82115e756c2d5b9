#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rampq/errors.hpp"

namespace rampq {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class Real>
struct AdamState {
  std::vector<Real> m;
  std::vector<Real> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, Real(0)), v(n, Real(0)) {}
};

/// Bias-corrected ADAM update of w in place. A non-finite gradient is
/// rejected with DivergenceError before anything is modified.
template <class Real>
void adam_step(std::span<Real> w, AdamState<Real>& st, std::span<const Real> g, double lr,
               const AdamConfig& cfg = {}) {
  if (w.size() != g.size() || st.m.size() != w.size() || st.v.size() != w.size())
    throw ContractError("adam_step: shape mismatch");
  for (Real x : g) {
    if (!std::isfinite(static_cast<double>(x))) throw DivergenceError("adam_step: non-finite gradient");
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  const Real b1 = static_cast<Real>(cfg.beta1), b2 = static_cast<Real>(cfg.beta2);
  const Real step_size = static_cast<Real>(lr / c1);
  const Real inv_sqrt_c2 = static_cast<Real>(1.0 / std::sqrt(c2));
  const Real eps = static_cast<Real>(cfg.epsilon);
  for (std::size_t i = 0; i < w.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (Real(1) - b1) * g[i];
    st.v[i] = b2 * st.v[i] + (Real(1) - b2) * g[i] * g[i];
    // w -= lr * m_hat / (sqrt(v_hat) + eps)
    w[i] -= step_size * st.m[i] / (std::sqrt(st.v[i]) * inv_sqrt_c2 + eps);
  }
}

}  // namespace rampq
