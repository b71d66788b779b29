#pragma once

// Straight-line reference for the learning rule on stacks of dense
// PMLIF layers, written independently of the production kernels: plain
// double loops, no Tensor, no shared forward code. Used by grad_check
// and the gradient-equivalence tests.

#include <cmath>
#include <cstddef>
#include <vector>

namespace stcsnn::reference {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // [rows][cols]

struct DenseNet {
  std::vector<Mat> weights;  // layer l: [n_l][n_{l-1}]
  std::vector<Vec> bias;     // [n_l]
  std::vector<Vec> w_m;      // [n_l]
  double v_th = 10.0;
  int s_max = 15;
  double alpha_h = 1.0;
  double alpha_w = 20.0;
  bool learn_wm = true;
};

struct DenseGrads {
  std::vector<Mat> weights;
  std::vector<Vec> bias;
  std::vector<Vec> w_m;
  double loss = 0;
};

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double ref_spike(double u, double v_th, int s_max) {
  if (u < v_th) return 0.0;
  if (u >= s_max * v_th) return static_cast<double>(s_max);
  return std::floor(u / v_th);
}

inline double ref_f1(double u, const DenseNet& net) {
  double acc = 0;
  for (int i = 1; i <= net.s_max; ++i) {
    const double d = u - i * net.v_th;
    acc += net.alpha_h * std::exp(-d * d / net.alpha_w);
  }
  return acc;
}

// inputs[t] is the layer-0 activation at step t; targets[t] the desired
// firing counts of the top layer. Returns accumulated gradients over
// all steps plus the summed loss.
inline DenseGrads run(const DenseNet& net, const std::vector<Vec>& inputs,
                      const std::vector<Vec>& targets) {
  const std::size_t layers = net.weights.size();
  const std::size_t T = inputs.size();

  DenseGrads g;
  g.weights.resize(layers);
  g.bias.resize(layers);
  g.w_m.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    g.weights[l].assign(net.weights[l].size(),
                        Vec(net.weights[l][0].size(), 0.0));
    g.bias[l].assign(net.bias[l].size(), 0.0);
    g.w_m[l].assign(net.w_m[l].size(), 0.0);
  }

  std::vector<Vec> u_post(layers), spikes(layers);
  std::vector<Mat> elig_w(layers);
  std::vector<Vec> elig_b(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    u_post[l].assign(net.weights[l].size(), 0.0);
    spikes[l].assign(net.weights[l].size(), 0.0);
    elig_w[l].assign(net.weights[l].size(),
                     Vec(net.weights[l][0].size(), 0.0));
    elig_b[l].assign(net.weights[l].size(), 0.0);
  }

  for (std::size_t t = 0; t < T; ++t) {
    // forward
    std::vector<Vec> u_pre(layers), u_prev(layers), layer_in(layers);
    Vec x = inputs[t];
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t n = net.weights[l].size();
      layer_in[l] = x;
      u_prev[l] = u_post[l];
      u_pre[l].assign(n, 0.0);
      Vec out(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double current = net.bias[l][i];
        for (std::size_t j = 0; j < x.size(); ++j)
          current += net.weights[l][i][j] * x[j];
        const double u =
            ref_sigmoid(net.w_m[l][i]) * u_post[l][i] + current;
        const double s = ref_spike(u, net.v_th, net.s_max);
        u_pre[l][i] = u;
        out[i] = s;
        u_post[l][i] = u - s * net.v_th;
        spikes[l][i] = s;
      }
      x = out;
    }

    // per-step loss and top-layer error
    const std::size_t top = layers - 1;
    Vec delta(net.weights[top].size(), 0.0);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const double d = spikes[top][i] - targets[t][i];
      g.loss += 0.5 * d * d;
      delta[i] = d * ref_f1(u_pre[top][i], net);
    }

    // backward through layers, eligibility update per layer
    for (std::size_t li = layers; li-- > 0;) {
      const std::size_t n = net.weights[li].size();
      const std::size_t fan = net.weights[li][0].size();
      for (std::size_t i = 0; i < n; ++i) {
        const double f1 = ref_f1(u_pre[li][i], net);
        const double denom = 1.0 + f1 * net.v_th;
        const double leak = ref_sigmoid(net.w_m[li][i]);
        for (std::size_t j = 0; j < fan; ++j) {
          elig_w[li][i][j] =
              (leak * elig_w[li][i][j] + layer_in[li][j]) / denom;
          g.weights[li][i][j] += delta[i] * elig_w[li][i][j];
        }
        elig_b[li][i] = (leak * elig_b[li][i] + 1.0) / denom;
        g.bias[li][i] += delta[i] * elig_b[li][i];
        if (net.learn_wm) {
          const double sd = leak * (1.0 - leak);
          g.w_m[li][i] += delta[i] * sd * u_prev[li][i] / denom;
        }
      }
      if (li > 0) {
        // delta for the layer below: (W^T delta) * f1(u_pre below)
        Vec lower(net.weights[li - 1].size(), 0.0);
        for (std::size_t j = 0; j < lower.size(); ++j) {
          double acc = 0;
          for (std::size_t i = 0; i < n; ++i)
            acc += net.weights[li][i][j] * delta[i];
          lower[j] = acc * ref_f1(u_pre[li - 1][j], net);
        }
        delta = std::move(lower);
      }
    }
  }
  return g;
}

}  // namespace stcsnn::reference
