#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rampq/errors.hpp"
#include "rampq/rng.hpp"

namespace rampq {

struct ConvSpec {
  int filters = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride_h = 1;
  int stride_w = 1;
  bool operator==(const ConvSpec&) const = default;
};

// Two convolutions, a shared rectified dense layer, then two linear heads:
// Q-values (one per action) and the auxiliary (speed, queue) predictions.
struct NetworkSpec {
  int channels = 3;
  int height = 4;
  int width = 512;
  ConvSpec conv1{16, 2, 16, 1, 8};
  ConvSpec conv2{32, 2, 8, 1, 4};
  int hidden = 256;
  int actions = 2;
  int aux = 2;

  int conv1_h() const { return (height - conv1.kernel_h) / conv1.stride_h + 1; }
  int conv1_w() const { return (width - conv1.kernel_w) / conv1.stride_w + 1; }
  int conv2_h() const { return (conv1_h() - conv2.kernel_h) / conv2.stride_h + 1; }
  int conv2_w() const { return (conv1_w() - conv2.kernel_w) / conv2.stride_w + 1; }
  int input_size() const { return channels * height * width; }
  int conv2_size() const { return conv2.filters * conv2_h() * conv2_w(); }

  /// Throws ConfigError when the layer shapes do not chain.
  void validate() const;
  /// Layer sizes as whitespace-separated decimal text.
  std::string descriptor() const;
  static NetworkSpec from_descriptor(const std::string& text);
  /// Small network for gradient checks: 3x4x16 input, 4 and 8 filters.
  static NetworkSpec reduced();

  bool operator==(const NetworkSpec&) const = default;
};

/// Offsets of each parameter block inside the flat weight vector, in
/// declaration order.
struct ParamLayout {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b, q_w, q_b, aux_w, aux_b, total;
  static ParamLayout of(const NetworkSpec& s);
};

template <class Real>
struct Activations {
  std::vector<Real> col1, a1, col2, a2, h, q, aux;
};

template <class Real>
struct Gradients {
  // scratch buffers for one backward pass
  std::vector<Real> dh, da2, dcol2, da1;
};

template <class Real>
struct QOutputs {
  std::vector<Real> q;
  Real speed{};
  Real queue{};
};

namespace detail {

template <class Real>
inline Real dot(const Real* a, const Real* b, int n) {
  // eight independent partial sums so the loop vectorizes without reassociation flags
  Real p[8] = {};
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) p[k] += a[i + k] * b[i + k];
  }
  Real s = ((p[0] + p[4]) + (p[1] + p[5])) + ((p[2] + p[6]) + (p[3] + p[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class Real>
inline void axpy(Real alpha, const Real* x, Real* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct ConvGeom {
  int c, h, w;      // input
  int f, kh, kw, sh, sw;
  int oh, ow;       // output
  int patches() const { return oh * ow; }
  int patch_size() const { return c * kh * kw; }
};

template <class Real>
void im2col(const ConvGeom& g, const Real* x, Real* col) {
  const int k = g.patch_size();
  for (int oy = 0; oy < g.oh; ++oy) {
    for (int ox = 0; ox < g.ow; ++ox) {
      Real* row = col + static_cast<std::ptrdiff_t>(oy * g.ow + ox) * k;
      for (int c = 0; c < g.c; ++c) {
        for (int i = 0; i < g.kh; ++i) {
          const Real* src = x + (static_cast<std::ptrdiff_t>(c) * g.h + oy * g.sh + i) * g.w + ox * g.sw;
          std::copy(src, src + g.kw, row + (c * g.kh + i) * g.kw);
        }
      }
    }
  }
}

template <class Real>
void col2im_add(const ConvGeom& g, const Real* col, Real* dx) {
  const int k = g.patch_size();
  for (int oy = 0; oy < g.oh; ++oy) {
    for (int ox = 0; ox < g.ow; ++ox) {
      const Real* row = col + static_cast<std::ptrdiff_t>(oy * g.ow + ox) * k;
      for (int c = 0; c < g.c; ++c) {
        for (int i = 0; i < g.kh; ++i) {
          Real* dst = dx + (static_cast<std::ptrdiff_t>(c) * g.h + oy * g.sh + i) * g.w + ox * g.sw;
          const Real* src = row + (c * g.kh + i) * g.kw;
          for (int j = 0; j < g.kw; ++j) dst[j] += src[j];
        }
      }
    }
  }
}

}  // namespace detail

template <class Real>
class QNetwork {
 public:
  explicit QNetwork(NetworkSpec spec = {}) : spec_(spec) {
    spec_.validate();
    layout_ = ParamLayout::of(spec_);
    g1_ = {spec_.channels, spec_.height, spec_.width, spec_.conv1.filters, spec_.conv1.kernel_h,
           spec_.conv1.kernel_w, spec_.conv1.stride_h, spec_.conv1.stride_w,
           spec_.conv1_h(), spec_.conv1_w()};
    g2_ = {spec_.conv1.filters, spec_.conv1_h(), spec_.conv1_w(), spec_.conv2.filters,
           spec_.conv2.kernel_h, spec_.conv2.kernel_w, spec_.conv2.stride_h, spec_.conv2.stride_w,
           spec_.conv2_h(), spec_.conv2_w()};
  }

  const NetworkSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.total; }

  /// Glorot-uniform kernels, zero biases.
  std::vector<Real> init_weights(Rng& rng) const {
    std::vector<Real> w(layout_.total, Real(0));
    auto fill = [&](std::size_t offset, std::size_t n, double fan_in, double fan_out) {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (std::size_t i = 0; i < n; ++i) w[offset + i] = static_cast<Real>(rng.uniform(-bound, bound));
    };
    const double k1 = spec_.conv1.kernel_h * spec_.conv1.kernel_w;
    const double k2 = spec_.conv2.kernel_h * spec_.conv2.kernel_w;
    fill(layout_.conv1_w, layout_.conv1_b - layout_.conv1_w, spec_.channels * k1, spec_.conv1.filters * k1);
    fill(layout_.conv2_w, layout_.conv2_b - layout_.conv2_w, spec_.conv1.filters * k2, spec_.conv2.filters * k2);
    fill(layout_.fc_w, layout_.fc_b - layout_.fc_w, spec_.conv2_size(), spec_.hidden);
    fill(layout_.q_w, layout_.q_b - layout_.q_w, spec_.hidden, spec_.actions);
    fill(layout_.aux_w, layout_.aux_b - layout_.aux_w, spec_.hidden, spec_.aux);
    return w;
  }

  void forward(std::span<const Real> w, std::span<const Real> x, Activations<Real>& a) const {
    check_shapes(w, x);
    const Real* wp = w.data();
    const int p1 = g1_.patches(), k1 = g1_.patch_size();
    const int p2 = g2_.patches(), k2 = g2_.patch_size();
    a.col1.resize(static_cast<std::size_t>(p1) * k1);
    a.a1.resize(static_cast<std::size_t>(g1_.f) * p1);
    a.col2.resize(static_cast<std::size_t>(p2) * k2);
    a.a2.resize(static_cast<std::size_t>(g2_.f) * p2);
    a.h.resize(spec_.hidden);
    a.q.resize(spec_.actions);
    a.aux.resize(spec_.aux);

    detail::im2col(g1_, x.data(), a.col1.data());
    conv_forward(g1_, wp + layout_.conv1_w, wp + layout_.conv1_b, a.col1.data(), a.a1.data());
    detail::im2col(g2_, a.a1.data(), a.col2.data());
    conv_forward(g2_, wp + layout_.conv2_w, wp + layout_.conv2_b, a.col2.data(), a.a2.data());

    const int in = spec_.conv2_size();
    for (int o = 0; o < spec_.hidden; ++o) {
      const Real z = wp[layout_.fc_b + o] +
                     detail::dot(wp + layout_.fc_w + static_cast<std::size_t>(o) * in, a.a2.data(), in);
      a.h[o] = z > 0 ? z : Real(0);
    }
    for (int j = 0; j < spec_.actions; ++j) {
      a.q[j] = wp[layout_.q_b + j] +
               detail::dot(wp + layout_.q_w + static_cast<std::size_t>(j) * spec_.hidden, a.h.data(), spec_.hidden);
    }
    for (int j = 0; j < spec_.aux; ++j) {
      a.aux[j] = wp[layout_.aux_b + j] +
                 detail::dot(wp + layout_.aux_w + static_cast<std::size_t>(j) * spec_.hidden, a.h.data(), spec_.hidden);
    }
  }

  QOutputs<Real> evaluate(std::span<const Real> w, std::span<const Real> x) const {
    Activations<Real> a;
    forward(w, x, a);
    return {a.q, a.aux[0], a.aux[1]};
  }

  /// Accumulates into `grad` the gradient of a loss whose derivatives with
  /// respect to the outputs are dq (per action) and daux. `a` must hold the
  /// activations of forward() on the same weights and input.
  void backward(std::span<const Real> w, const Activations<Real>& a, std::span<const Real> dq,
                std::span<const Real> daux, std::span<Real> grad, Gradients<Real>& s) const {
    if (grad.size() != layout_.total) throw ContractError("backward: gradient size mismatch");
    const Real* wp = w.data();
    Real* gp = grad.data();
    const int hid = spec_.hidden;

    s.dh.assign(hid, Real(0));
    for (int j = 0; j < spec_.actions; ++j) {
      if (dq[j] == Real(0)) continue;
      gp[layout_.q_b + j] += dq[j];
      detail::axpy(dq[j], a.h.data(), gp + layout_.q_w + static_cast<std::size_t>(j) * hid, hid);
      detail::axpy(dq[j], wp + layout_.q_w + static_cast<std::size_t>(j) * hid, s.dh.data(), hid);
    }
    for (int j = 0; j < spec_.aux; ++j) {
      if (daux[j] == Real(0)) continue;
      gp[layout_.aux_b + j] += daux[j];
      detail::axpy(daux[j], a.h.data(), gp + layout_.aux_w + static_cast<std::size_t>(j) * hid, hid);
      detail::axpy(daux[j], wp + layout_.aux_w + static_cast<std::size_t>(j) * hid, s.dh.data(), hid);
    }

    const int in = spec_.conv2_size();
    s.da2.assign(in, Real(0));
    for (int o = 0; o < hid; ++o) {
      if (a.h[o] <= Real(0)) continue;  // rectifier
      const Real d = s.dh[o];
      if (d == Real(0)) continue;
      gp[layout_.fc_b + o] += d;
      detail::axpy(d, a.a2.data(), gp + layout_.fc_w + static_cast<std::size_t>(o) * in, in);
      detail::axpy(d, wp + layout_.fc_w + static_cast<std::size_t>(o) * in, s.da2.data(), in);
    }
    for (int i = 0; i < in; ++i) {
      if (a.a2[i] <= Real(0)) s.da2[i] = Real(0);
    }

    s.dcol2.assign(a.col2.size(), Real(0));
    conv_backward(g2_, wp + layout_.conv2_w, a.col2.data(), s.da2.data(), gp + layout_.conv2_w,
                  gp + layout_.conv2_b, s.dcol2.data());
    s.da1.assign(a.a1.size(), Real(0));
    detail::col2im_add(g2_, s.dcol2.data(), s.da1.data());
    for (std::size_t i = 0; i < s.da1.size(); ++i) {
      if (a.a1[i] <= Real(0)) s.da1[i] = Real(0);
    }
    conv_backward(g1_, wp + layout_.conv1_w, a.col1.data(), s.da1.data(), gp + layout_.conv1_w,
                  gp + layout_.conv1_b, nullptr);
  }

 private:
  void check_shapes(std::span<const Real> w, std::span<const Real> x) const {
    if (w.size() != layout_.total) throw ContractError("QNetwork: weight vector has the wrong size");
    if (x.size() != static_cast<std::size_t>(spec_.input_size()))
      throw ContractError("QNetwork: input is " + std::to_string(x.size()) + " values, expected " +
                          std::to_string(spec_.input_size()));
  }

  static void conv_forward(const detail::ConvGeom& g, const Real* kernel, const Real* bias,
                           const Real* col, Real* out) {
    const int p = g.patches(), k = g.patch_size();
    for (int f = 0; f < g.f; ++f) {
      const Real* wf = kernel + static_cast<std::size_t>(f) * k;
      for (int i = 0; i < p; ++i) {
        const Real z = bias[f] + detail::dot(wf, col + static_cast<std::size_t>(i) * k, k);
        out[static_cast<std::size_t>(f) * p + i] = z > 0 ? z : Real(0);
      }
    }
  }

  // dout is already masked by the rectifier. dcol may be null.
  static void conv_backward(const detail::ConvGeom& g, const Real* kernel, const Real* col,
                            const Real* dout, Real* dkernel, Real* dbias, Real* dcol) {
    const int p = g.patches(), k = g.patch_size();
    for (int f = 0; f < g.f; ++f) {
      const Real* wf = kernel + static_cast<std::size_t>(f) * k;
      Real* dwf = dkernel + static_cast<std::size_t>(f) * k;
      for (int i = 0; i < p; ++i) {
        const Real d = dout[static_cast<std::size_t>(f) * p + i];
        if (d == Real(0)) continue;
        dbias[f] += d;
        detail::axpy(d, col + static_cast<std::size_t>(i) * k, dwf, k);
        if (dcol) detail::axpy(d, wf, dcol + static_cast<std::size_t>(i) * k, k);
      }
    }
  }

  NetworkSpec spec_;
  ParamLayout layout_{};
  detail::ConvGeom g1_{}, g2_{};
};

/// Greedy action: index of the largest Q-value, ties to the lowest index.
template <class Real>
int argmax_action(std::span<const Real> q) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(q.size()); ++j) {
    if (q[j] > q[best]) best = j;
  }
  return best;
}

}  // namespace rampq
