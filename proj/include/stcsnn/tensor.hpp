#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stcsnn/common.hpp"

namespace stcsnn {

// Dense row-major tensor. No autodiff graph; each op ships its own
// explicit backward.
template <typename R>
struct Tensor {
  std::vector<R> data;
  std::vector<std::size_t> shape;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : data(count(s), R(0)), shape(std::move(s)) {}
  Tensor(std::vector<std::size_t> s, std::vector<R> d)
      : data(std::move(d)), shape(std::move(s)) {
    if (data.size() != count(shape))
      throw ShapeError("tensor: data size does not match shape");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  R* begin() { return data.data(); }
  R* end() { return data.data() + data.size(); }

  R& operator[](std::size_t i) { return data[i]; }
  R operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(R v) { std::fill(data.begin(), data.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    require_same(o, "+=");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }

  Tensor& operator*=(R v) {
    for (R& x : data) x *= v;
    return *this;
  }

  void require_same(const Tensor& o, const char* what) const {
    if (!same_shape(o))
      throw ShapeError(std::string("tensor shape mismatch in ") + what);
  }

#ifndef NDEBUG
  void check_finite() const {
    for (R v : data) assert(std::isfinite(static_cast<double>(v)));
  }
#else
  void check_finite() const {}
#endif
};

// --- 2-D convolution (cross-correlation, zero padding) ----------------

// input [Cin,H,W], kernels [Cout,Cin,kH,kW], bias [Cout] (may be empty).
template <typename R>
Tensor<R> conv2d(const Tensor<R>& input, const Tensor<R>& kernels,
                 const Tensor<R>& bias, int stride = 1, int padding = 0) {
  if (input.shape.size() != 3 || kernels.shape.size() != 4)
    throw ShapeError("conv2d: expected input [C,H,W] and kernels [O,C,kH,kW]");
  const std::size_t c_in = input.shape[0], h = input.shape[1],
                    w = input.shape[2];
  const std::size_t c_out = kernels.shape[0];
  const std::size_t kh = kernels.shape[2], kw = kernels.shape[3];
  if (kernels.shape[1] != c_in)
    throw ShapeError("conv2d: kernel channel count mismatch");
  if (kh > h + 2 * padding || kw > w + 2 * padding)
    throw ShapeError("conv2d: kernel larger than padded input");
  const std::size_t h_out = (h + 2 * padding - kh) / stride + 1;
  const std::size_t w_out = (w + 2 * padding - kw) / stride + 1;

  Tensor<R> out({c_out, h_out, w_out});
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    const R b = bias.size() ? bias[oc] : R(0);
    for (std::size_t oy = 0; oy < h_out; ++oy) {
      for (std::size_t ox = 0; ox < w_out; ++ox) {
        R acc = b;
        for (std::size_t ic = 0; ic < c_in; ++ic) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride + ky) - padding;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride + kx) - padding;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += input.data[(ic * h + iy) * w + ix] *
                     kernels.data[((oc * c_in + ic) * kh + ky) * kw + kx];
            }
          }
        }
        out.data[(oc * h_out + oy) * w_out + ox] = acc;
      }
    }
  }
  return out;
}

template <typename R>
struct Conv2dGrads {
  Tensor<R> input;
  Tensor<R> kernels;
  Tensor<R> bias;
};

template <typename R>
Conv2dGrads<R> conv2d_backward(const Tensor<R>& input,
                               const Tensor<R>& kernels,
                               const Tensor<R>& grad_out, int stride = 1,
                               int padding = 0) {
  const std::size_t c_in = input.shape[0], h = input.shape[1],
                    w = input.shape[2];
  const std::size_t c_out = kernels.shape[0];
  const std::size_t kh = kernels.shape[2], kw = kernels.shape[3];
  const std::size_t h_out = grad_out.shape[1], w_out = grad_out.shape[2];
  if (grad_out.shape[0] != c_out)
    throw ShapeError("conv2d_backward: grad_out channel mismatch");

  Conv2dGrads<R> g{Tensor<R>(input.shape), Tensor<R>(kernels.shape),
                   Tensor<R>({c_out})};
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    for (std::size_t oy = 0; oy < h_out; ++oy) {
      for (std::size_t ox = 0; ox < w_out; ++ox) {
        const R go = grad_out.data[(oc * h_out + oy) * w_out + ox];
        if (go == R(0)) continue;
        g.bias.data[oc] += go;
        for (std::size_t ic = 0; ic < c_in; ++ic) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy * stride + ky) - padding;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * stride + kx) - padding;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              const std::size_t in_idx = (ic * h + iy) * w + ix;
              const std::size_t k_idx =
                  ((oc * c_in + ic) * kh + ky) * kw + kx;
              g.input.data[in_idx] += go * kernels.data[k_idx];
              g.kernels.data[k_idx] += go * input.data[in_idx];
            }
          }
        }
      }
    }
  }
  return g;
}

// --- average pooling --------------------------------------------------

template <typename R>
Tensor<R> avgpool2d(const Tensor<R>& input, int k) {
  if (input.shape.size() != 3) throw ShapeError("avgpool2d: expected [C,H,W]");
  const std::size_t c = input.shape[0], h = input.shape[1], w = input.shape[2];
  if (k < 1 || h % k != 0 || w % k != 0)
    throw ShapeError("avgpool2d: dims not divisible by window");
  const std::size_t ho = h / k, wo = w / k;
  Tensor<R> out({c, ho, wo});
  const R inv = R(1) / static_cast<R>(k * k);
  for (std::size_t ic = 0; ic < c; ++ic)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        R acc = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            acc += input.data[(ic * h + oy * k + dy) * w + ox * k + dx];
        out.data[(ic * ho + oy) * wo + ox] = acc * inv;
      }
  return out;
}

template <typename R>
Tensor<R> avgpool2d_backward(const Tensor<R>& grad_out, int k,
                             const std::vector<std::size_t>& in_shape) {
  const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
  const std::size_t ho = h / k, wo = w / k;
  if (grad_out.shape != std::vector<std::size_t>{c, ho, wo})
    throw ShapeError("avgpool2d_backward: grad shape mismatch");
  Tensor<R> g(in_shape);
  const R inv = R(1) / static_cast<R>(k * k);
  for (std::size_t ic = 0; ic < c; ++ic)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const R go = grad_out.data[(ic * ho + oy) * wo + ox] * inv;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            g.data[(ic * h + oy * k + dy) * w + ox * k + dx] = go;
      }
  return g;
}

// --- dense ------------------------------------------------------------

// weights [N_out, N_in] times x [N_in], plus bias.
template <typename R>
Tensor<R> dense(const Tensor<R>& weights, const Tensor<R>& x,
                const Tensor<R>& bias) {
  if (weights.shape.size() != 2 || weights.shape[1] != x.size())
    throw ShapeError("dense: weight/input shape mismatch");
  const std::size_t n_out = weights.shape[0], n_in = weights.shape[1];
  Tensor<R> out({n_out});
  for (std::size_t i = 0; i < n_out; ++i) {
    R acc = bias.size() ? bias[i] : R(0);
    const R* row = weights.data.data() + i * n_in;
    for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * x.data[j];
    out.data[i] = acc;
  }
  return out;
}

// grad_x = W^T g; grad_W = g x^T; grad_b = g.
template <typename R>
Tensor<R> dense_backward_input(const Tensor<R>& weights,
                               const Tensor<R>& grad_out) {
  const std::size_t n_out = weights.shape[0], n_in = weights.shape[1];
  if (grad_out.size() != n_out)
    throw ShapeError("dense_backward_input: grad shape mismatch");
  Tensor<R> g({n_in});
  for (std::size_t i = 0; i < n_out; ++i) {
    const R go = grad_out.data[i];
    if (go == R(0)) continue;
    const R* row = weights.data.data() + i * n_in;
    for (std::size_t j = 0; j < n_in; ++j) g.data[j] += row[j] * go;
  }
  return g;
}

// --- relu -------------------------------------------------------------

template <typename R>
Tensor<R> relu(const Tensor<R>& input) {
  Tensor<R> out(input.shape);
  for (std::size_t i = 0; i < input.size(); ++i)
    out.data[i] = input.data[i] > R(0) ? input.data[i] : R(0);
  return out;
}

template <typename R>
Tensor<R> relu_backward(const Tensor<R>& pre, const Tensor<R>& grad_out) {
  pre.require_same(grad_out, "relu_backward");
  Tensor<R> g(pre.shape);
  for (std::size_t i = 0; i < pre.size(); ++i)
    g.data[i] = pre.data[i] > R(0) ? grad_out.data[i] : R(0);
  return g;
}

// --- dropout ----------------------------------------------------------

// Inverted dropout: entries are 0 with probability `rate`, otherwise
// 1/(1-rate) so the mask is unbiased. Deterministic per seed.
template <typename R>
Tensor<R> dropout_mask(const std::vector<std::size_t>& shape, double rate,
                       std::uint64_t seed) {
  if (rate < 0 || rate >= 1)
    throw ArgumentError("dropout_mask: rate must be in [0,1)");
  Tensor<R> mask(shape);
  if (rate == 0) {
    mask.fill(R(1));
    return mask;
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(rate);
  const R keep = static_cast<R>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data[i] = drop(rng) ? R(0) : keep;
  return mask;
}

}  // namespace stcsnn
