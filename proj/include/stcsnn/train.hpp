#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stcsnn/common.hpp"
#include "stcsnn/network.hpp"
#include "stcsnn/neuron.hpp"
#include "stcsnn/tensor.hpp"

namespace stcsnn {

// --- loss -------------------------------------------------------------

// Per-step MSE: L = 1/2 * sum_i (y_i - s_i)^2, dL/ds_i = s_i - y_i.
template <typename R>
std::pair<double, Tensor<R>> loss_mse(const Tensor<R>& s_out,
                                      const Tensor<R>& target) {
  s_out.require_same(target, "loss_mse");
  double loss = 0;
  Tensor<R> grad(s_out.shape);
  for (std::size_t i = 0; i < s_out.size(); ++i) {
    const double d = static_cast<double>(s_out[i]) -
                     static_cast<double>(target[i]);
    loss += 0.5 * d * d;
    grad[i] = static_cast<R>(d);
  }
  return {loss, std::move(grad)};
}

// Desired firing counts: every neuron in the true class's voting group
// fires `desired_count` at every step, all others stay silent.
template <typename R>
Tensor<R> target_encode(int label, const std::vector<std::uint32_t>& group_map,
                        int n_class, int desired_count) {
  if (label < 0 || label >= n_class)
    throw ArgumentError("target_encode: label " + std::to_string(label) +
                        " out of range");
  const std::size_t n = group_map.size();
  Tensor<R> y({n});
  auto [lo, hi] = voting_group_bounds(n, n_class, label);
  for (std::size_t i = lo; i < hi; ++i)
    y[group_map[i]] = static_cast<R>(desired_count);
  return y;
}

// --- eligibility traces -----------------------------------------------

// Recurrent accumulators d(u)/d(W) and d(u)/d(bias) per dense layer,
// reset to zero at sequence start. The w_m trace is not recurrent (the
// previous membrane state is treated as a constant) and is recomputed
// each step.
template <typename R>
struct Eligibility {
  std::vector<Tensor<R>> w;  // [units, fan_in] per dense layer
  std::vector<Tensor<R>> b;  // [units] per dense layer
};

template <typename R>
Eligibility<R> make_eligibility(const Network<R>& net) {
  Eligibility<R> e;
  const NetworkConfig& cfg = net.config();
  e.w.resize(cfg.layers.size());
  e.b.resize(cfg.layers.size());
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    if (cfg.layers[l].kind == LayerKind::DensePmlif) {
      e.w[l] = Tensor<R>(net.params().layers[l].weights.shape);
      e.b[l] = Tensor<R>(net.params().layers[l].bias.shape);
    }
  }
  return e;
}

// --- per-step backward ------------------------------------------------

// Spatial error propagation for one time step plus the eligibility
// update. The error delta carries no cross-time terms; temporal credit
// flows only through the eligibility recursions.
template <typename R>
void backward_step(const Network<R>& net, const ForwardTrace<R>& trace, int t,
                   const Tensor<R>& dl_ds_out, Eligibility<R>& elig,
                   Params<R>& grads) {
  const NetworkConfig& cfg = net.config();
  const Hyper& hp = net.hyper();
  const typename ForwardTrace<R>::Step& step = trace.steps[t];

  Tensor<R> gs = dl_ds_out;  // dL/d(output of current layer)
  for (std::size_t li = cfg.layers.size(); li-- > 0;) {
    const LayerSpec& s = cfg.layers[li];
    const LayerParams<R>& p = net.params().layers[li];
    switch (s.kind) {
      case LayerKind::Voting:
        break;  // inference-only
      case LayerKind::DensePmlif: {
        const Tensor<R>& u_pre = step.u_pre[li];
        const Tensor<R>& in = step.inputs[li];
        const Tensor<R>& u_prev = step.u_prev_post[li];
        if (!elig.w[li].same_shape(p.weights))
          throw ShapeError("backward_step: eligibility shape mismatch");
        const std::size_t units = p.weights.shape[0];
        const std::size_t fan_in = p.weights.shape[1];
        Tensor<R> delta({units});
        for (std::size_t i = 0; i < units; ++i) {
          const double f1 = surrogate_grad(static_cast<double>(u_pre[i]),
                                           hp.v_th, hp.s_max, hp.alpha_h,
                                           hp.alpha_w);
          const double d = static_cast<double>(gs[i]) * f1;
          delta[i] = static_cast<R>(d);
          const double wm = static_cast<double>(p.w_m[i]);
          const double leak = sigmoid(wm);
          const double denom = 1.0 + f1 * hp.v_th;
          R* erow = elig.w[li].data.data() + i * fan_in;
          R* grow = grads.layers[li].weights.data.data() + i * fan_in;
          for (std::size_t j = 0; j < fan_in; ++j) {
            const double e =
                (leak * static_cast<double>(erow[j]) +
                 static_cast<double>(in[j])) /
                denom;
            erow[j] = static_cast<R>(e);
            grow[j] += static_cast<R>(d * e);
          }
          const double eb =
              (leak * static_cast<double>(elig.b[li][i]) + 1.0) / denom;
          elig.b[li][i] = static_cast<R>(eb);
          grads.layers[li].bias[i] += static_cast<R>(d * eb);
          if (cfg.ablation.use_learnable_wm) {
            const double em =
                sigmoid_deriv(wm) * static_cast<double>(u_prev[i]) / denom;
            grads.layers[li].w_m[i] += static_cast<R>(d * em);
          }
        }
        gs = dense_backward_input(p.weights, delta);
        gs.shape = step.input_shapes[li];  // undo flatten
        break;
      }
      case LayerKind::Dropout:
        if (trace.dropout_masks[li].size()) {
          for (std::size_t i = 0; i < gs.size(); ++i)
            gs[i] *= trace.dropout_masks[li][i];
        }
        break;
      case LayerKind::AvgPool:
        gs = avgpool2d_backward(gs, s.pool, step.input_shapes[li]);
        break;
      case LayerKind::Conv:
      case LayerKind::SynapticConv: {
        // Synaptic filter: within-step it is the identity on the conv
        // output; the decayed carry-over is a stop-gradient.
        Tensor<R> g_pre;
        const bool synaptic = s.kind == LayerKind::SynapticConv &&
                              cfg.ablation.use_synaptic_block;
        if (synaptic)
          g_pre = gs;
        else
          g_pre = relu_backward(step.conv_pre[li], gs);
        Conv2dGrads<R> cg = conv2d_backward(step.inputs[li], p.weights, g_pre,
                                            1, s.kernel / 2);
        grads.layers[li].weights += cg.kernels;
        grads.layers[li].bias += cg.bias;
        gs = std::move(cg.input);
        break;
      }
    }
  }
}

// --- full sample forward+backward -------------------------------------

template <typename R>
struct SampleResult {
  double loss = 0;
  int predicted = -1;
};

// Total loss is the sum of the per-step losses; gradients from every
// step are accumulated into `grads` before the optimizer runs.
template <typename R>
SampleResult<R> train_sample(const Network<R>& net, const FrameTensor& frames,
                             int label, int desired_count,
                             std::uint64_t dropout_seed, Params<R>& grads) {
  ForwardTrace<R> trace = net.forward(frames, RunMode::Train, dropout_seed);
  Tensor<R> target = target_encode<R>(label, net.params().group_map,
                                      net.n_class(), desired_count);
  Eligibility<R> elig = make_eligibility(net);
  SampleResult<R> result;
  for (int t = 0; t < net.config().time_steps; ++t) {
    auto [l, dl] = loss_mse(trace.out_spikes[t], target);
    result.loss += l;
    backward_step(net, trace, t, dl, elig, grads);
  }
  result.predicted =
      voting(net.accumulate_output(trace), net.params().group_map,
             net.n_class());
  return result;
}

// --- Adam -------------------------------------------------------------

template <typename R>
struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor<R>> m, v;

  void init(Params<R>& params) {
    m.clear();
    v.clear();
    for (Tensor<R>* t : params.tensors()) {
      m.emplace_back(t->shape);
      v.emplace_back(t->shape);
    }
    step = 0;
  }
};

template <typename R>
void adam_update(Params<R>& params, Params<R>& grads, AdamState<R>& state) {
  auto ps = params.tensors();
  auto gs = grads.tensors();
  if (ps.size() != gs.size() || ps.size() != state.m.size())
    throw ShapeError("adam_update: parameter/gradient structure mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Tensor<R>& p = *ps[k];
    const Tensor<R>& g = *gs[k];
    Tensor<R>& m = state.m[k];
    Tensor<R>& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi =
          state.beta1 * static_cast<double>(m[i]) + (1 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(v[i]) +
                        (1 - state.beta2) * gi * gi;
      m[i] = static_cast<R>(mi);
      v[i] = static_cast<R>(vi);
      p[i] -= static_cast<R>(state.lr * (mi / bc1) /
                             (std::sqrt(vi / bc2) + state.eps));
    }
  }
}

// --- evaluation -------------------------------------------------------

struct Sample {
  FrameTensor frames;
  int label = 0;
};

struct EvalResult {
  double accuracy = 0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
};

template <typename R>
EvalResult evaluate(const Network<R>& net, const std::vector<Sample>& set,
                    int threads = 1) {
  EvalResult r;
  const int n_class = net.n_class();
  r.confusion.assign(n_class, std::vector<long>(n_class, 0));
  if (set.empty()) return r;
  std::vector<int> pred(set.size());
  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) pred[i] = net.predict(set[i].frames);
  };
  if (threads <= 1) {
    worker(0, set.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (set.size() + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(set.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (std::thread& th : pool) th.join();
  }
  long correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    r.confusion[set[i].label][pred[i]]++;
    if (pred[i] == set[i].label) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return r;
}

// --- training loop ----------------------------------------------------

struct TrainOptions {
  double lr = 2e-4;
  int batch = 64;
  int epochs = 50;
  std::uint64_t seed = 1;
  int desired_count = 1;
  int threads = 1;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double test_acc = 0;
  double wall_seconds = 0;

  std::string line() const {
    std::ostringstream os;
    os << epoch << '\t' << std::setprecision(17) << train_loss << '\t'
       << train_acc << '\t' << test_acc << '\t' << std::setprecision(6)
       << wall_seconds;
    return os.str();
  }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 step over the combined value
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// One epoch per log line. Batch gradient is the mean over samples;
// with threads > 1 each worker accumulates locally and partial sums are
// reduced in worker-index order.
template <typename R>
std::vector<EpochLog> train(Network<R>& net, const std::vector<Sample>& train_set,
                            const std::vector<Sample>& test_set,
                            const TrainOptions& opt,
                            std::ostream* log_out = nullptr) {
  if (train_set.empty()) throw ArgumentError("train: empty training set");
  AdamState<R> adam;
  adam.lr = opt.lr;
  adam.init(net.params());

  std::mt19937_64 shuffle_rng(mix_seed(opt.seed, 0));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> logs;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0;
    long correct = 0;
    for (std::size_t base = 0; base < order.size();
         base += static_cast<std::size_t>(opt.batch)) {
      const std::size_t hi =
          std::min(order.size(), base + static_cast<std::size_t>(opt.batch));
      const std::size_t count = hi - base;
      Params<R> grads = net.zero_grads();

      auto run_range = [&](std::size_t lo_i, std::size_t hi_i,
                           Params<R>& acc, double& loss, long& hits) {
        for (std::size_t i = lo_i; i < hi_i; ++i) {
          const std::size_t idx = order[i];
          const std::uint64_t dseed =
              mix_seed(opt.seed, (static_cast<std::uint64_t>(epoch) << 32) |
                                     idx);
          SampleResult<R> sr = train_sample(net, train_set[idx].frames,
                                            train_set[idx].label,
                                            opt.desired_count, dseed, acc);
          loss += sr.loss;
          if (sr.predicted == train_set[idx].label) ++hits;
        }
      };

      if (opt.threads <= 1) {
        run_range(base, hi, grads, epoch_loss, correct);
      } else {
        const int nw = std::min<int>(opt.threads, static_cast<int>(count));
        std::vector<Params<R>> partial(nw);
        std::vector<double> losses(nw, 0);
        std::vector<long> hits(nw, 0);
        std::vector<std::thread> pool;
        const std::size_t chunk = (count + nw - 1) / nw;
        for (int w = 0; w < nw; ++w) {
          partial[w] = net.zero_grads();
          const std::size_t lo_i = base + w * chunk;
          const std::size_t hi_i = std::min(hi, lo_i + chunk);
          if (lo_i < hi_i)
            pool.emplace_back(run_range, lo_i, hi_i, std::ref(partial[w]),
                              std::ref(losses[w]), std::ref(hits[w]));
        }
        for (std::thread& th : pool) th.join();
        for (int w = 0; w < nw; ++w) {
          auto dst = grads.tensors();
          auto src = partial[w].tensors();
          for (std::size_t k = 0; k < dst.size(); ++k) *dst[k] += *src[k];
          epoch_loss += losses[w];
          correct += hits[w];
        }
      }

      const R inv = static_cast<R>(1.0 / static_cast<double>(count));
      for (Tensor<R>* g : grads.tensors()) *g *= inv;
      adam_update(net.params(), grads, adam);
    }

    if (!std::isfinite(epoch_loss))
      throw NumericError("train: loss became non-finite in epoch " +
                         std::to_string(epoch));

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(train_set.size());
    log.train_acc =
        static_cast<double>(correct) / static_cast<double>(train_set.size());
    log.test_acc =
        test_set.empty() ? 0.0 : evaluate(net, test_set, opt.threads).accuracy;
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (log_out) *log_out << log.line() << '\n';
    logs.push_back(log);
  }
  return logs;
}

}  // namespace stcsnn
