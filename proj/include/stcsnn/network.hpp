#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stcsnn/common.hpp"
#include "stcsnn/compress.hpp"
#include "stcsnn/neuron.hpp"
#include "stcsnn/tensor.hpp"

namespace stcsnn {

enum class LayerKind { SynapticConv, Conv, AvgPool, Dropout, DensePmlif, Voting };

struct LayerSpec {
  LayerKind kind;
  int channels = 0;  // conv output channels
  int kernel = 0;    // conv kernel size
  int pool = 0;      // pooling window
  int units = 0;     // dense width
  int classes = 0;   // voting class count
};

// Ablation strategies S0..S3 toggle these two flags.
struct AblationFlags {
  bool use_synaptic_block = true;  // false: synaptic filter replaced by ReLU
  bool use_learnable_wm = true;    // false: membrane leak frozen at sigmoid(0)
};

struct NetworkConfig {
  std::vector<LayerSpec> layers;
  int time_steps = 1;
  AblationFlags ablation;
  std::string arch;  // the source string, kept for checkpoints
};

// Model-wide constants (defaults follow the reference configuration).
struct Hyper {
  double v_th = 10.0;
  int s_max = 15;
  double alpha_h = 1.0;
  double alpha_w = 20.0;
  double dropout_rate = 0.5;
};

// Parses '-'-separated tokens: <n>SC<k> | <n>C<k> | AP<k> | DP | <n>FC
// | <n>Voting, e.g. "128SC3-128C3-AP2-256C3-AP2-512C3-AP4-DP-512FC-10Voting".
inline NetworkConfig parse_arch(const std::string& text, int time_steps,
                                AblationFlags flags = {}) {
  if (time_steps < 1) throw ConfigError("parse_arch: T must be >= 1");
  NetworkConfig cfg;
  cfg.time_steps = time_steps;
  cfg.ablation = flags;
  cfg.arch = text;

  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == '-') {
      tokens.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  tokens.push_back(cur);

  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const std::string& tok = tokens[pos];
    auto bad = [&](const std::string& why) {
      return ParseError("arch token " + std::to_string(pos) + " \"" + tok +
                        "\": " + why);
    };
    if (tok.empty()) throw bad("empty token");
    std::size_t i = 0;
    long lead = -1;
    if (std::isdigit(static_cast<unsigned char>(tok[0]))) {
      lead = 0;
      while (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i])))
        lead = lead * 10 + (tok[i++] - '0');
    }
    const std::string rest = tok.substr(i);
    LayerSpec spec{};
    if (rest == "DP" && lead < 0) {
      spec.kind = LayerKind::Dropout;
    } else if (rest == "FC" && lead > 0) {
      spec.kind = LayerKind::DensePmlif;
      spec.units = static_cast<int>(lead);
    } else if (rest == "Voting" && lead > 0) {
      spec.kind = LayerKind::Voting;
      spec.classes = static_cast<int>(lead);
    } else if (rest.size() >= 3 && rest[0] == 'S' && rest[1] == 'C' &&
               lead > 0) {
      spec.kind = LayerKind::SynapticConv;
      spec.channels = static_cast<int>(lead);
      for (char c : rest.substr(2))
        if (!std::isdigit(static_cast<unsigned char>(c)))
          throw bad("bad kernel size");
      spec.kernel = std::stoi(rest.substr(2));
    } else if (rest.size() >= 2 && rest[0] == 'C' && lead > 0) {
      spec.kind = LayerKind::Conv;
      spec.channels = static_cast<int>(lead);
      for (char c : rest.substr(1))
        if (!std::isdigit(static_cast<unsigned char>(c)))
          throw bad("bad kernel size");
      spec.kernel = std::stoi(rest.substr(1));
    } else if (rest.size() >= 3 && rest[0] == 'A' && rest[1] == 'P' &&
               lead < 0) {
      spec.kind = LayerKind::AvgPool;
      for (char c : rest.substr(2))
        if (!std::isdigit(static_cast<unsigned char>(c)))
          throw bad("bad pool size");
      spec.pool = std::stoi(rest.substr(2));
      if (spec.pool < 1) throw bad("pool size must be >= 1");
    } else {
      throw bad("unknown token");
    }
    cfg.layers.push_back(spec);
  }

  // Structural invariants.
  int votings = 0, synaptic = 0, dense = 0;
  bool seen_dense = false;
  int last_dense_units = 0;
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const LayerSpec& s = cfg.layers[l];
    switch (s.kind) {
      case LayerKind::Voting:
        ++votings;
        if (l != cfg.layers.size() - 1)
          throw ConfigError("arch: Voting must be the last layer");
        if (dense == 0)
          throw ConfigError("arch: Voting requires a preceding FC layer");
        if (last_dense_units < s.classes)
          throw ConfigError("arch: dense width " +
                            std::to_string(last_dense_units) +
                            " smaller than " + std::to_string(s.classes) +
                            " classes");
        break;
      case LayerKind::SynapticConv:
        ++synaptic;
        if (l != 0)
          throw ConfigError("arch: synaptic conv block must come first");
        break;
      case LayerKind::DensePmlif:
        ++dense;
        seen_dense = true;
        last_dense_units = s.units;
        break;
      case LayerKind::Conv:
      case LayerKind::AvgPool:
        if (seen_dense)
          throw ConfigError("arch: conv/pool layer after FC layer");
        break;
      case LayerKind::Dropout:
        break;
    }
  }
  if (votings != 1 || cfg.layers.back().kind != LayerKind::Voting)
    throw ConfigError("arch: exactly one trailing Voting layer required");
  if (synaptic > 1) throw ConfigError("arch: more than one synaptic block");
  return cfg;
}

// --- parameters -------------------------------------------------------

template <typename R>
struct LayerParams {
  Tensor<R> weights;  // conv kernels or dense matrix
  Tensor<R> bias;
  Tensor<R> w_m;  // per-neuron membrane time constant weight (dense only)
};

template <typename R>
struct Params {
  std::vector<LayerParams<R>> layers;
  std::vector<std::uint32_t> group_map;  // permutation of last dense layer

  std::vector<Tensor<R>*> tensors() {
    std::vector<Tensor<R>*> out;
    for (LayerParams<R>& lp : layers) {
      if (lp.weights.size()) out.push_back(&lp.weights);
      if (lp.bias.size()) out.push_back(&lp.bias);
      if (lp.w_m.size()) out.push_back(&lp.w_m);
    }
    return out;
  }
  std::vector<const Tensor<R>*> tensors() const {
    std::vector<const Tensor<R>*> out;
    for (const LayerParams<R>& lp : layers) {
      if (lp.weights.size()) out.push_back(&lp.weights);
      if (lp.bias.size()) out.push_back(&lp.bias);
      if (lp.w_m.size()) out.push_back(&lp.w_m);
    }
    return out;
  }
};

// --- voting -----------------------------------------------------------

// Groups take as-even-as-possible shares of the units; the first
// n % n_class groups get the extra unit.
inline std::pair<std::size_t, std::size_t> voting_group_bounds(std::size_t n,
                                                               int n_class,
                                                               int g) {
  const std::size_t base = n / static_cast<std::size_t>(n_class);
  const std::size_t rem = n % static_cast<std::size_t>(n_class);
  const std::size_t gg = static_cast<std::size_t>(g);
  const std::size_t start = gg * base + std::min(gg, rem);
  return {start, start + base + (gg < rem ? 1 : 0)};
}

// Class score = mean of its group's accumulated counts; prediction is
// the argmax, ties broken toward the lower class index.
template <typename R>
int voting(const Tensor<R>& counts, const std::vector<std::uint32_t>& group_map,
           int n_class) {
  const std::size_t n = counts.size();
  if (n_class < 1 || n < static_cast<std::size_t>(n_class))
    throw ConfigError("voting: fewer units than classes");
  if (group_map.size() != n)
    throw ConfigError("voting: group map size mismatch");
  int best = 0;
  double best_score = 0;
  for (int c = 0; c < n_class; ++c) {
    auto [lo, hi] = voting_group_bounds(n, n_class, c);
    double acc = 0;
    for (std::size_t i = lo; i < hi; ++i)
      acc += static_cast<double>(counts[group_map[i]]);
    const double score = acc / static_cast<double>(hi - lo);
    if (c == 0 || score > best_score) {
      best = c;
      best_score = score;
    }
  }
  return best;
}

// --- the assembled network --------------------------------------------

enum class RunMode { Train, Eval };

// Everything the trainer needs from one forward pass.
template <typename R>
struct ForwardTrace {
  struct Step {
    std::vector<Tensor<R>> inputs;       // per layer, post-dropout for dense
    std::vector<std::vector<std::size_t>> input_shapes;  // pre-flatten shapes
    std::vector<Tensor<R>> conv_pre;     // conv output before nonlinearity
    std::vector<Tensor<R>> u_pre;        // dense: pre-reset potential
    std::vector<Tensor<R>> u_prev_post;  // dense: previous post-reset state
    std::vector<Tensor<R>> spikes;       // dense output counts
  };
  std::vector<Tensor<R>> dropout_masks;  // per layer, fixed for the pass
  std::vector<Step> steps;
  std::vector<Tensor<R>> out_spikes;  // per step, last dense layer
};

template <typename R>
class Network {
 public:
  Network(NetworkConfig cfg, Hyper hyper, int in_h, int in_w)
      : cfg_(std::move(cfg)), hyper_(hyper), in_h_(in_h), in_w_(in_w) {
    compute_shapes();
  }

  const NetworkConfig& config() const { return cfg_; }
  const Hyper& hyper() const { return hyper_; }
  int input_height() const { return in_h_; }
  int input_width() const { return in_w_; }
  Params<R>& params() { return params_; }
  const Params<R>& params() const { return params_; }
  int output_units() const { return out_units_; }
  int n_class() const { return cfg_.layers.back().classes; }
  std::uint64_t init_seed() const { return init_seed_; }

  // Weight init: W ~ Normal(V_th / fan_in, 0.5), biases and w_m zero,
  // voting group map a seeded permutation.
  void init_params(std::uint64_t seed) {
    init_seed_ = seed;
    std::mt19937_64 rng(seed);
    params_.layers.assign(cfg_.layers.size(), LayerParams<R>{});
    for (std::size_t l = 0; l < cfg_.layers.size(); ++l) {
      const LayerSpec& s = cfg_.layers[l];
      LayerParams<R>& p = params_.layers[l];
      if (s.kind == LayerKind::SynapticConv || s.kind == LayerKind::Conv) {
        const std::size_t c_in = in_shapes_[l][0];
        const std::size_t fan_in =
            c_in * static_cast<std::size_t>(s.kernel) * s.kernel;
        p.weights = Tensor<R>({static_cast<std::size_t>(s.channels), c_in,
                               static_cast<std::size_t>(s.kernel),
                               static_cast<std::size_t>(s.kernel)});
        std::normal_distribution<double> dist(
            hyper_.v_th / static_cast<double>(fan_in), 0.5);
        for (R& w : p.weights.data) w = static_cast<R>(dist(rng));
        p.bias = Tensor<R>({static_cast<std::size_t>(s.channels)});
      } else if (s.kind == LayerKind::DensePmlif) {
        const std::size_t fan_in = Tensor<R>::count(in_shapes_[l]);
        p.weights =
            Tensor<R>({static_cast<std::size_t>(s.units), fan_in});
        std::normal_distribution<double> dist(
            hyper_.v_th / static_cast<double>(fan_in), 0.5);
        for (R& w : p.weights.data) w = static_cast<R>(dist(rng));
        p.bias = Tensor<R>({static_cast<std::size_t>(s.units)});
        p.w_m = Tensor<R>({static_cast<std::size_t>(s.units)});
      }
    }
    params_.group_map.resize(out_units_);
    std::iota(params_.group_map.begin(), params_.group_map.end(), 0u);
    std::shuffle(params_.group_map.begin(), params_.group_map.end(), rng);
  }

  Params<R> zero_grads() const {
    Params<R> g;
    g.layers.assign(params_.layers.size(), LayerParams<R>{});
    for (std::size_t l = 0; l < params_.layers.size(); ++l) {
      const LayerParams<R>& p = params_.layers[l];
      if (p.weights.size()) g.layers[l].weights = Tensor<R>(p.weights.shape);
      if (p.bias.size()) g.layers[l].bias = Tensor<R>(p.bias.shape);
      if (p.w_m.size()) g.layers[l].w_m = Tensor<R>(p.w_m.shape);
    }
    return g;
  }

  // Runs the per-time-step forward pass over all T frames. Dropout
  // masks are drawn once per pass in train mode and are identity in
  // eval mode, which makes eval independent of the seed.
  ForwardTrace<R> forward(const FrameTensor& frames, RunMode mode,
                          std::uint64_t dropout_seed) const {
    if (frames.T != cfg_.time_steps || frames.H != in_h_ ||
        frames.W != in_w_)
      throw ShapeError("forward: frame tensor shape does not match network");
    ForwardTrace<R> trace;
    trace.dropout_masks.resize(cfg_.layers.size());
    if (mode == RunMode::Train) {
      for (std::size_t l = 0; l < cfg_.layers.size(); ++l) {
        if (cfg_.layers[l].kind == LayerKind::Dropout &&
            hyper_.dropout_rate > 0)
          trace.dropout_masks[l] = dropout_mask<R>(
              in_shapes_[l], hyper_.dropout_rate, dropout_seed + l);
      }
    }

    // Recurrent state, zeroed at sequence start.
    std::vector<Tensor<R>> syn_state(cfg_.layers.size());
    std::vector<Tensor<R>> u_state(cfg_.layers.size());
    for (std::size_t l = 0; l < cfg_.layers.size(); ++l) {
      if (cfg_.layers[l].kind == LayerKind::SynapticConv)
        syn_state[l] = Tensor<R>(out_shapes_[l]);
      if (cfg_.layers[l].kind == LayerKind::DensePmlif)
        u_state[l] = Tensor<R>(out_shapes_[l]);
    }

    for (int t = 0; t < cfg_.time_steps; ++t) {
      typename ForwardTrace<R>::Step step;
      const std::size_t n_layers = cfg_.layers.size();
      step.inputs.resize(n_layers);
      step.input_shapes.resize(n_layers);
      step.conv_pre.resize(n_layers);
      step.u_pre.resize(n_layers);
      step.u_prev_post.resize(n_layers);
      step.spikes.resize(n_layers);

      Tensor<R> x = frame_slice(frames, t);
      for (std::size_t l = 0; l < n_layers; ++l) {
        const LayerSpec& s = cfg_.layers[l];
        const LayerParams<R>& p = params_.layers[l];
        step.input_shapes[l] = x.shape;
        switch (s.kind) {
          case LayerKind::SynapticConv: {
            step.inputs[l] = x;
            Tensor<R> pre =
                conv2d(x, p.weights, p.bias, 1, s.kernel / 2);
            step.conv_pre[l] = pre;
            if (cfg_.ablation.use_synaptic_block) {
              x = synaptic_step(syn_state[l], pre);
              syn_state[l] = x;
            } else {
              x = relu(pre);
            }
            break;
          }
          case LayerKind::Conv: {
            step.inputs[l] = x;
            Tensor<R> pre =
                conv2d(x, p.weights, p.bias, 1, s.kernel / 2);
            step.conv_pre[l] = pre;
            x = relu(pre);
            break;
          }
          case LayerKind::AvgPool:
            x = avgpool2d(x, s.pool);
            break;
          case LayerKind::Dropout:
            if (trace.dropout_masks[l].size()) {
              Tensor<R> masked(x.shape);
              for (std::size_t i = 0; i < x.size(); ++i)
                masked.data[i] = x.data[i] * trace.dropout_masks[l].data[i];
              x = std::move(masked);
            }
            break;
          case LayerKind::DensePmlif: {
            Tensor<R> flat = x;
            flat.shape = {flat.size()};
            step.inputs[l] = flat;
            Tensor<R> current = dense(p.weights, flat, p.bias);
            Tensor<R> w_m = effective_wm(l);
            step.u_prev_post[l] = u_state[l];
            PmlifResult<R> r = pmlif_step(u_state[l], w_m, current,
                                          hyper_.v_th, hyper_.s_max);
            step.u_pre[l] = r.u_pre;
            step.spikes[l] = r.spikes;
            u_state[l] = r.u_post;
            x = r.spikes;
            break;
          }
          case LayerKind::Voting:
            break;  // applied on accumulated counts at inference
        }
      }
      trace.out_spikes.push_back(x);
      trace.steps.push_back(std::move(step));
    }
    return trace;
  }

  // Spike counts of the last dense layer accumulated over all T steps.
  Tensor<R> accumulate_output(const ForwardTrace<R>& trace) const {
    Tensor<R> acc(trace.out_spikes.front().shape);
    for (const Tensor<R>& s : trace.out_spikes) acc += s;
    return acc;
  }

  int predict(const FrameTensor& frames) const {
    ForwardTrace<R> trace = forward(frames, RunMode::Eval, 0);
    return voting(accumulate_output(trace), params_.group_map, n_class());
  }

  Tensor<R> effective_wm(std::size_t layer) const {
    // Frozen w_m still reads the stored tensor (zeros at init); only
    // its gradient is suppressed, matching the S2/S3 strategies.
    return params_.layers[layer].w_m;
  }

  const std::vector<std::size_t>& layer_in_shape(std::size_t l) const {
    return in_shapes_[l];
  }
  const std::vector<std::size_t>& layer_out_shape(std::size_t l) const {
    return out_shapes_[l];
  }
  std::size_t last_dense_index() const { return last_dense_; }

 private:
  Tensor<R> frame_slice(const FrameTensor& frames, int t) const {
    Tensor<R> x({2, static_cast<std::size_t>(in_h_),
                 static_cast<std::size_t>(in_w_)});
    const std::size_t n = x.size();
    const float* src = frames.data.data() + static_cast<std::size_t>(t) * n;
    for (std::size_t i = 0; i < n; ++i) x.data[i] = static_cast<R>(src[i]);
    return x;
  }

  void compute_shapes() {
    std::vector<std::size_t> cur = {2, static_cast<std::size_t>(in_h_),
                                    static_cast<std::size_t>(in_w_)};
    for (std::size_t l = 0; l < cfg_.layers.size(); ++l) {
      const LayerSpec& s = cfg_.layers[l];
      in_shapes_.push_back(cur);
      switch (s.kind) {
        case LayerKind::SynapticConv:
        case LayerKind::Conv:
          if (cur.size() != 3)
            throw ConfigError("arch: conv layer " + std::to_string(l) +
                              " needs a spatial input");
          cur = {static_cast<std::size_t>(s.channels), cur[1], cur[2]};
          break;
        case LayerKind::AvgPool:
          if (cur.size() != 3 || cur[1] % s.pool != 0 || cur[2] % s.pool != 0)
            throw ConfigError("arch: pool layer " + std::to_string(l) +
                              " input " + std::to_string(cur[1]) + "x" +
                              std::to_string(cur[2]) +
                              " not divisible by window");
          cur = {cur[0], cur[1] / s.pool, cur[2] / s.pool};
          break;
        case LayerKind::Dropout:
          break;
        case LayerKind::DensePmlif:
          cur = {static_cast<std::size_t>(s.units)};
          last_dense_ = l;
          out_units_ = s.units;
          break;
        case LayerKind::Voting:
          break;
      }
      out_shapes_.push_back(cur);
    }
  }

  NetworkConfig cfg_;
  Hyper hyper_;
  int in_h_, in_w_;
  int out_units_ = 0;
  std::size_t last_dense_ = 0;
  std::uint64_t init_seed_ = 0;
  std::vector<std::vector<std::size_t>> in_shapes_, out_shapes_;
  Params<R> params_;
};

}  // namespace stcsnn
