#pragma once

#include <span>
#include <vector>

#include "rampq/errors.hpp"
#include "rampq/qnet.hpp"

namespace rampq {

/// One training sample with dense states. Speed and queue are raw (m/s, m).
template <class Real>
struct Experience {
  std::vector<Real> state;
  int action = 0;
  double reward = 0.0;
  double speed = 0.0;
  double queue = 0.0;
  std::vector<Real> next_state;
};

struct LossConfig {
  double gamma = 0.99;
  double lambda = 1.0;
  // Prediction targets are divided by these before the auxiliary loss.
  double speed_scale = 1.0;
  double queue_scale = 1.0;
};

struct LossTerms {
  double l1 = 0.0;  // Bellman term
  double l2 = 0.0;  // auxiliary prediction term
  double lambda = 0.0;
  double total = 0.0;
};

template <class Real>
struct LossWorkspace {
  Activations<Real> online;
  Activations<Real> target;
  Gradients<Real> scratch;
};

namespace detail {

template <class Real>
LossTerms loss_impl(const QNetwork<Real>& net, std::span<const Real> w,
                    std::span<const Real> w_target, std::span<const Experience<Real>> batch,
                    const LossConfig& cfg, std::span<Real> grad, LossWorkspace<Real>& ws) {
  if (batch.empty()) throw ContractError("loss: empty batch");
  if (!(cfg.gamma >= 0 && cfg.gamma < 1)) throw ContractError("loss: gamma must lie in [0, 1)");
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), Real(0));
  const double k = static_cast<double>(batch.size());
  double l1 = 0.0, l2 = 0.0;
  std::vector<Real> dq(net.spec().actions), daux(net.spec().aux);
  for (const auto& e : batch) {
    if (e.action < 0 || e.action >= net.spec().actions) throw ContractError("loss: action out of range");
    // target network is held fixed: no gradient flows through it
    net.forward(w_target, e.next_state, ws.target);
    const auto& qt = ws.target.q;
    const double best_next = static_cast<double>(qt[argmax_action<Real>(qt)]);
    const double y = e.reward + cfg.gamma * best_next;

    net.forward(w, e.state, ws.online);
    const double td = y - static_cast<double>(ws.online.q[e.action]);
    const double ev = static_cast<double>(ws.online.aux[0]) - e.speed / cfg.speed_scale;
    const double eu = static_cast<double>(ws.online.aux[1]) - e.queue / cfg.queue_scale;
    l1 += td * td;
    l2 += ev * ev + eu * eu;
    if (want_grad) {
      std::fill(dq.begin(), dq.end(), Real(0));
      dq[e.action] = static_cast<Real>(-2.0 * td / k);
      daux[0] = static_cast<Real>(cfg.lambda * 2.0 * ev / k);
      daux[1] = static_cast<Real>(cfg.lambda * 2.0 * eu / k);
      net.backward(w, ws.online, dq, daux, grad, ws.scratch);
    }
  }
  LossTerms t;
  t.l1 = l1 / k;
  t.l2 = l2 / k;
  t.lambda = cfg.lambda;
  t.total = t.l1 + cfg.lambda * t.l2;
  return t;
}

}  // namespace detail

/// L1 = mean (y - Q0(s,a))^2 with y = r + gamma * max_a' Q0(s',a'; w_target);
/// L2 = mean (Q1 - v)^2 + (Q2 - u)^2; total = L1 + lambda * L2.
template <class Real>
LossTerms compute_loss(const QNetwork<Real>& net, std::span<const Real> w,
                       std::span<const Real> w_target, std::span<const Experience<Real>> batch,
                       const LossConfig& cfg) {
  LossWorkspace<Real> ws;
  return detail::loss_impl<Real>(net, w, w_target, batch, cfg, {}, ws);
}

/// Exact gradient of the total loss with respect to w, written into grad.
template <class Real>
LossTerms backward(const QNetwork<Real>& net, std::span<const Real> w,
                   std::span<const Real> w_target, std::span<const Experience<Real>> batch,
                   const LossConfig& cfg, std::span<Real> grad, LossWorkspace<Real>& ws) {
  if (grad.size() != net.parameter_count()) throw ContractError("backward: gradient size mismatch");
  return detail::loss_impl<Real>(net, w, w_target, batch, cfg, grad, ws);
}

template <class Real>
LossTerms backward(const QNetwork<Real>& net, std::span<const Real> w,
                   std::span<const Real> w_target, std::span<const Experience<Real>> batch,
                   const LossConfig& cfg, std::span<Real> grad) {
  LossWorkspace<Real> ws;
  return backward<Real>(net, w, w_target, batch, cfg, grad, ws);
}

}  // namespace rampq
