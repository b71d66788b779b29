#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stcsnn/network.hpp"
#include "stcsnn/reference_backward.hpp"
#include "stcsnn/train.hpp"

namespace stcsnn {

struct GradCheckReport {
  double max_rel_oracle = 0;
  double max_rel_fd = 0;
  std::string worst_block;
  double tol_oracle = 1e-10;
  double tol_fd = 1e-4;

  bool pass() const {
    return max_rel_oracle < tol_oracle && max_rel_fd < tol_fd;
  }
  std::string summary() const {
    std::ostringstream os;
    os << "oracle max rel err " << max_rel_oracle << " (tol " << tol_oracle
       << "), finite-difference max rel err " << max_rel_fd << " (tol "
       << tol_fd << ")";
    if (!pass()) os << "; worst block: " << worst_block;
    return os.str();
  }
};

namespace detail {

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-12) return 0.0;
  return std::abs(a - b) / std::max(scale, 1e-12);
}

// Production backward on a dense-only net vs the straight-line
// reference, one random instance.
inline void oracle_case(std::uint64_t seed, int t_steps, bool learn_wm,
                        GradCheckReport& rep, int perturb_block = -1) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width_dist(2, 4);
  const int w0 = 2 * width_dist(rng);  // input units (2 channels x 1 x w)
  const int w1 = width_dist(rng);
  const int classes = width_dist(rng) > 3 ? 2 : 1;
  const int w2 = width_dist(rng) * classes;

  AblationFlags flags;
  flags.use_learnable_wm = learn_wm;
  NetworkConfig cfg = parse_arch(
      std::to_string(w1) + "FC-" + std::to_string(w2) + "FC-" +
          std::to_string(classes) + "Voting",
      t_steps, flags);
  Network<double> net(cfg, Hyper{}, 1, w0 / 2);
  net.init_params(seed);

  std::normal_distribution<double> w_dist(1.0, 2.0);
  std::normal_distribution<double> wm_dist(0.0, 1.0);
  for (LayerParams<double>& lp : net.params().layers) {
    for (double& v : lp.weights.data) v = w_dist(rng);
    for (double& v : lp.bias.data) v = 0.3 * w_dist(rng);
    for (double& v : lp.w_m.data) v = wm_dist(rng);
  }

  FrameTensor frames(t_steps, 1, w0 / 2);
  std::uniform_real_distribution<double> in_dist(0.0, 6.0);
  for (float& v : frames.data) v = static_cast<float>(in_dist(rng));

  std::uniform_int_distribution<int> label_dist(0, classes - 1);
  const int label = label_dist(rng);

  Params<double> grads = net.zero_grads();
  train_sample(net, frames, label, 1, 0, grads);

  // Mirror everything into the reference net.
  reference::DenseNet ref;
  ref.learn_wm = learn_wm;
  std::vector<std::size_t> dense_layers;
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    if (cfg.layers[l].kind != LayerKind::DensePmlif) continue;
    dense_layers.push_back(l);
    const Tensor<double>& W = net.params().layers[l].weights;
    reference::Mat m(W.shape[0], reference::Vec(W.shape[1]));
    for (std::size_t i = 0; i < W.shape[0]; ++i)
      for (std::size_t j = 0; j < W.shape[1]; ++j)
        m[i][j] = W.data[i * W.shape[1] + j];
    ref.weights.push_back(std::move(m));
    ref.bias.push_back(reference::Vec(net.params().layers[l].bias.data.begin(),
                                      net.params().layers[l].bias.data.end()));
    ref.w_m.push_back(reference::Vec(net.params().layers[l].w_m.data.begin(),
                                     net.params().layers[l].w_m.data.end()));
  }
  std::vector<reference::Vec> inputs(t_steps), targets(t_steps);
  Tensor<double> y =
      target_encode<double>(label, net.params().group_map, classes, 1);
  for (int t = 0; t < t_steps; ++t) {
    inputs[t].resize(w0);
    for (int j = 0; j < w0; ++j)
      inputs[t][j] =
          static_cast<double>(frames.data[static_cast<std::size_t>(t) * w0 + j]);
    targets[t] = reference::Vec(y.data.begin(), y.data.end());
  }
  reference::DenseGrads rg = reference::run(ref, inputs, targets);

  auto note = [&](double prod, double refv, const std::string& block) {
    const double e = rel_err(prod, refv);
    if (e > rep.max_rel_oracle) {
      rep.max_rel_oracle = e;
      if (e >= rep.tol_oracle) rep.worst_block = block;
    }
  };
  for (std::size_t d = 0; d < dense_layers.size(); ++d) {
    const std::size_t l = dense_layers[d];
    Tensor<double>& gw = grads.layers[l].weights;
    const std::string tag = "dense" + std::to_string(d);
    if (perturb_block == static_cast<int>(d)) gw.data[0] += 1e-3;
    for (std::size_t i = 0; i < gw.shape[0]; ++i)
      for (std::size_t j = 0; j < gw.shape[1]; ++j)
        note(gw.data[i * gw.shape[1] + j], rg.weights[d][i][j], tag + ".W");
    for (std::size_t i = 0; i < grads.layers[l].bias.size(); ++i)
      note(grads.layers[l].bias[i], rg.bias[d][i], tag + ".bias");
    for (std::size_t i = 0; i < grads.layers[l].w_m.size(); ++i)
      note(grads.layers[l].w_m[i], rg.w_m[d][i], tag + ".w_m");
  }
}

// Finite differences on the fully differentiable composite
// conv -> relu -> avgpool -> dense -> MSE, double precision.
inline void fd_case(std::uint64_t seed, GradCheckReport& rep,
                    double eps = 1e-3) {
  const std::size_t C = 2, H = 6, W = 6, C2 = 3, M = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);

  Tensor<double> x({C, H, W});
  for (double& v : x.data) v = dist(rng);
  Tensor<double> kernels({C2, C, 3, 3});
  for (double& v : kernels.data) v = dist(rng);
  Tensor<double> cbias({C2});
  for (double& v : cbias.data) v = 0.1 * dist(rng);
  const std::size_t flat = C2 * (H / 2) * (W / 2);
  Tensor<double> dw({M, flat});
  for (double& v : dw.data) v = 0.3 * dist(rng);
  Tensor<double> db({M});
  Tensor<double> y({M});
  for (double& v : y.data) v = dist(rng);

  auto loss = [&]() {
    Tensor<double> pre = conv2d(x, kernels, cbias, 1, 1);
    Tensor<double> act = relu(pre);
    Tensor<double> pooled = avgpool2d(act, 2);
    pooled.shape = {flat};
    Tensor<double> out = dense(dw, pooled, db);
    double l = 0;
    for (std::size_t i = 0; i < M; ++i) {
      const double d = out[i] - y[i];
      l += 0.5 * d * d;
    }
    return l;
  };

  // analytic gradients through the explicit backward maps
  Tensor<double> pre = conv2d(x, kernels, cbias, 1, 1);
  Tensor<double> act = relu(pre);
  Tensor<double> pooled = avgpool2d(act, 2);
  Tensor<double> pooled_flat = pooled;
  pooled_flat.shape = {flat};
  Tensor<double> out = dense(dw, pooled_flat, db);
  Tensor<double> dl({M});
  for (std::size_t i = 0; i < M; ++i) dl[i] = out[i] - y[i];

  Tensor<double> g_dw({M, flat}), g_db({M});
  for (std::size_t i = 0; i < M; ++i) {
    g_db[i] = dl[i];
    for (std::size_t j = 0; j < flat; ++j)
      g_dw.data[i * flat + j] = dl[i] * pooled_flat[j];
  }
  Tensor<double> g_flat = dense_backward_input(dw, dl);
  g_flat.shape = pooled.shape;
  Tensor<double> g_act = avgpool2d_backward(g_flat, 2, act.shape);
  Tensor<double> g_pre = relu_backward(pre, g_act);
  Conv2dGrads<double> cg = conv2d_backward(x, kernels, g_pre, 1, 1);

  auto check = [&](Tensor<double>& param, const Tensor<double>& analytic,
                   const std::string& block) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double keep = param[i];
      param.data[i] = keep + eps;
      const double lp = loss();
      param.data[i] = keep - eps;
      const double lm = loss();
      param.data[i] = keep;
      const double fd = (lp - lm) / (2 * eps);
      const double e = rel_err(fd, analytic[i]);
      if (e > rep.max_rel_fd) {
        rep.max_rel_fd = e;
        if (e >= rep.tol_fd) rep.worst_block = block;
      }
    }
  };
  check(kernels, cg.kernels, "conv.kernels");
  check(cbias, cg.bias, "conv.bias");
  check(dw, g_dw, "dense.W");
  check(db, g_db, "dense.bias");
}

}  // namespace detail

// Compares the production backward against (i) the straight-line
// reference on random tiny dense nets and (ii) central finite
// differences on the differentiable conv/relu/pool/dense path.
// `perturb_block` >= 0 injects an error into that dense block's weight
// gradient (test hook).
inline GradCheckReport grad_check(std::uint64_t seed, int oracle_cases = 10,
                                  int fd_cases = 3, double fd_eps = 1e-3,
                                  int perturb_block = -1) {
  GradCheckReport rep;
  for (int c = 0; c < oracle_cases; ++c) {
    const int t_steps = 1 + c % 3;
    detail::oracle_case(mix_seed(seed, c), t_steps, c % 2 == 0, rep,
                        perturb_block);
  }
  for (int c = 0; c < fd_cases; ++c)
    detail::fd_case(mix_seed(seed, 1000 + c), rep, fd_eps);
  return rep;
}

}  // namespace stcsnn
