#pragma once

#include <cmath>
#include <cstdint>

#include "stcsnn/common.hpp"
#include "stcsnn/tensor.hpp"

namespace stcsnn {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double sigmoid_deriv(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

// Multi-threshold spike function: 0 below V_th, floor(u/V_th) between,
// saturated at S_max from u >= S_max*V_th on.
inline int spike_count(double u, double v_th, int s_max) {
  if (u < v_th) return 0;
  if (u >= s_max * v_th) return s_max;
  return static_cast<int>(std::floor(u / v_th));
}

// Surrogate derivative: sum of S_max Gaussians centered at i*V_th.
inline double surrogate_grad(double u, double v_th, int s_max, double alpha_h,
                             double alpha_w) {
  if (alpha_w <= 0) throw ArgumentError("surrogate_grad: alpha_W must be > 0");
  double acc = 0.0;
  for (int i = 1; i <= s_max; ++i) {
    const double d = u - i * v_th;
    acc += alpha_h * std::exp(-d * d / alpha_w);
  }
  return acc;
}

// First-order synaptic filter with adaptive time constant: the decay
// factor (1 - 1/tau_syn) collapses to C_valid/C_total, the fraction of
// input channels carrying any nonzero current this step.
template <typename R>
double synaptic_decay_factor(const Tensor<R>& input) {
  if (input.shape.empty()) throw ShapeError("synaptic_decay_factor: rank 0");
  const std::size_t channels = input.shape[0];
  const std::size_t per_channel = input.size() / channels;
  std::size_t valid = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const R* p = input.data.data() + c * per_channel;
    for (std::size_t i = 0; i < per_channel; ++i) {
      if (p[i] != R(0)) {
        ++valid;
        break;
      }
    }
  }
  return static_cast<double>(valid) / static_cast<double>(channels);
}

// I_syn[t_k] = d * I_syn[t_k-1] + I_in[t_k]. The decay is a function of
// the incoming current and is treated as constant in backprop.
template <typename R>
Tensor<R> synaptic_step(const Tensor<R>& i_syn_prev, const Tensor<R>& i_in,
                        double* decay_out = nullptr) {
  i_syn_prev.require_same(i_in, "synaptic_step");
  const double d = synaptic_decay_factor(i_in);
  if (decay_out) *decay_out = d;
  Tensor<R> out(i_in.shape);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] =
        static_cast<R>(d) * i_syn_prev.data[i] + i_in.data[i];
  return out;
}

// One PMLIF update. Spikes are decided on the pre-reset potential
//   u_pre = sigmoid(w_m) * u_prev + I
// and the stored state is the soft-reset u_pre - s*V_th.
template <typename R>
struct PmlifResult {
  Tensor<R> spikes;  // integer-valued counts in [0, S_max]
  Tensor<R> u_pre;
  Tensor<R> u_post;
};

template <typename R>
PmlifResult<R> pmlif_step(const Tensor<R>& u_prev, const Tensor<R>& w_m,
                          const Tensor<R>& input, double v_th, int s_max) {
  u_prev.require_same(input, "pmlif_step");
  u_prev.require_same(w_m, "pmlif_step");
  if (v_th <= 0 || s_max < 1)
    throw ArgumentError("pmlif_step: V_th must be > 0 and S_max >= 1");
  PmlifResult<R> r{Tensor<R>(input.shape), Tensor<R>(input.shape),
                   Tensor<R>(input.shape)};
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double leak = sigmoid(static_cast<double>(w_m.data[i]));
    const double u_pre =
        leak * static_cast<double>(u_prev.data[i]) +
        static_cast<double>(input.data[i]);
    const int s = spike_count(u_pre, v_th, s_max);
    r.u_pre.data[i] = static_cast<R>(u_pre);
    r.spikes.data[i] = static_cast<R>(s);
    r.u_post.data[i] = static_cast<R>(u_pre - s * v_th);
  }
  return r;
}

}  // namespace stcsnn
