// Command-line front end: compress event recordings, train/evaluate
// networks, run the gradient self-check, and dump membrane-constant
// statistics from a checkpoint.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stcsnn/stcsnn.hpp"

namespace fs = std::filesystem;
using namespace stcsnn;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  int precision = 64;
};

RunConfig load_config(const GlobalOpts& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{}
                                        : load_run_config(g.config_path);
  if (g.seed_set) cfg.optim.seed = g.seed;
  return cfg;
}

template <typename R>
Network<R> build_network(const RunConfig& cfg) {
  NetworkConfig nc = parse_arch(cfg.model.arch, cfg.model.T, cfg.ablation());
  Hyper hp = cfg.hyper;
  Network<R> net(nc, hp, cfg.dataset.height, cfg.dataset.width);
  net.init_params(cfg.optim.seed);
  return net;
}

int cmd_compress(const GlobalOpts& g, const std::string& input,
                 const std::string& output, double baseline_frames) {
  RunConfig cfg = load_config(g);
  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::recursive_directory_iterator(input))
      if (e.is_regular_file()) inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
  } else {
    inputs.push_back(input);
  }
  if (!output.empty()) fs::create_directories(output);

  std::size_t total_cells = 0, nonzero_cells = 0;
  for (const fs::path& p : inputs) {
    EventStream stream = detail::load_sample_file(
        p, cfg.dataset.kind, cfg.dataset.width, cfg.dataset.height);
    FrameTensor f =
        compress(stream, cfg.model.T, cfg.model.N_r, cfg.model.binary_mode);
    total_cells += f.data.size();
    for (float v : f.data)
      if (v != 0) ++nonzero_cells;
    if (!output.empty()) {
      const fs::path out_path =
          fs::path(output) / (p.stem().string() + ".ft");
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw DataError("cannot write " + out_path.string());
      save_frame_tensor(out, f);
    }
    std::cout << p.string() << "\tshape [" << f.T << ",2," << f.H << ","
              << f.W << "]\t" << stream.size() << " events\n";
  }
  std::cout << "T=" << cfg.model.T << " N_r=" << cfg.model.N_r
            << " nonzero_density="
            << (total_cells ? static_cast<double>(nonzero_cells) / total_cells
                            : 0.0)
            << '\n';
  if (baseline_frames > 0)
    std::cout << "compression_ratio="
              << compression_ratio(baseline_frames, cfg.model.T) << "%\n";
  return 0;
}

template <typename R>
int run_train(const GlobalOpts& g, const std::string& checkpoint_out,
              const std::string& log_path, const std::string& resume) {
  RunConfig cfg = load_config(g);
  DatasetSplit data = load_dataset(cfg);

  Network<R> net = resume.empty() ? build_network<R>(cfg)
                                  : load_checkpoint_file<R>(resume);

  TrainOptions opt;
  opt.lr = cfg.optim.lr;
  opt.batch = cfg.optim.batch;
  opt.epochs = cfg.optim.epochs;
  opt.seed = cfg.optim.seed;
  opt.desired_count = cfg.model.desired_count;
  opt.threads = g.threads;

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw DataError("cannot write log " + log_path);
    log = &log_file;
  }
  train(net, data.train, data.test, opt, log);
  if (!checkpoint_out.empty()) save_checkpoint_file(checkpoint_out, net);
  return 0;
}

template <typename R>
int run_eval(const GlobalOpts& g, const std::string& checkpoint) {
  RunConfig cfg = load_config(g);
  Network<R> net = load_checkpoint_file<R>(checkpoint);
  if (net.input_height() != cfg.dataset.height ||
      net.input_width() != cfg.dataset.width ||
      net.config().time_steps != cfg.model.T)
    throw ShapeError("eval: checkpoint input shape does not match dataset");
  DatasetSplit data = load_dataset(cfg);
  const std::vector<Sample>& set =
      data.test.empty() ? data.train : data.test;
  EvalResult r = evaluate(net, set, g.threads);
  std::cout << "accuracy " << r.accuracy << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    for (std::size_t j = 0; j < r.confusion[i].size(); ++j)
      std::cout << r.confusion[i][j] << (j + 1 < r.confusion[i].size() ? '\t'
                                                                       : '\n');
  }
  return 0;
}

int cmd_gradcheck(const GlobalOpts& g, int perturb) {
  const std::uint64_t seed = g.seed_set ? g.seed : 42;
  GradCheckReport rep = grad_check(seed, 10, 3, 1e-3, perturb);
  std::cout << rep.summary() << '\n';
  if (!rep.pass()) {
    std::cerr << "gradient check failed: " << rep.worst_block << '\n';
    return 3;
  }
  return 0;
}

int cmd_tau_stats(const std::string& checkpoint) {
  Network<double> net = load_checkpoint_file<double>(checkpoint);
  const NetworkConfig& cfg = net.config();
  int dense_idx = 0;
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    if (cfg.layers[l].kind != LayerKind::DensePmlif) continue;
    const Tensor<double>& wm = net.params().layers[l].w_m;
    std::vector<double> leaks(wm.size());
    double mean = 0;
    for (std::size_t i = 0; i < wm.size(); ++i) {
      leaks[i] = sigmoid(wm[i]);
      mean += leaks[i];
    }
    mean /= leaks.size();
    double var = 0;
    for (double v : leaks) var += (v - mean) * (v - mean);
    const double stdev = leaks.size() > 1
                             ? std::sqrt(var / (leaks.size() - 1))
                             : 0.0;
    std::cout << "layer " << dense_idx << " (" << cfg.layers[l].units
              << " PMLIF): count=" << leaks.size() << " mean=" << mean
              << " std=" << stdev << '\n';
    std::vector<int> bins(20, 0);
    for (double v : leaks) {
      int b = static_cast<int>(v * 20.0);
      if (b > 19) b = 19;
      ++bins[b];
    }
    for (int b = 0; b < 20; ++b) {
      std::cout << "  [" << b * 0.05 << "," << (b + 1) * 0.05 << ") "
                << bins[b] << '\n';
    }
    ++dense_idx;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatio-temporal compression SNN toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", g.seed, "override run seed");
  app.add_option("--threads", g.threads, "per-sample parallelism")
      ->check(CLI::PositiveNumber);
  app.add_option("--precision", g.precision, "floating point width")
      ->check(CLI::IsMember({32, 64}));

  std::string input, output, checkpoint, log_path, resume;
  double baseline_frames = 0;
  int perturb = -1;

  auto* c_compress = app.add_subcommand("compress", "event streams to frames");
  c_compress->add_option("--input", input, "event file or directory")
      ->required();
  c_compress->add_option("--output", output, "output directory for .ft files");
  c_compress->add_option("--baseline-frames", baseline_frames,
                         "baseline frame count for the compression ratio");

  auto* c_train = app.add_subcommand("train", "train a network");
  c_train->add_option("--checkpoint", checkpoint, "checkpoint output path");
  c_train->add_option("--log", log_path, "training log path (default stdout)");
  c_train->add_option("--resume", resume, "checkpoint to resume from");

  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  c_eval->add_option("--checkpoint", checkpoint, "checkpoint path")
      ->required();

  auto* c_grad = app.add_subcommand("gradcheck", "gradient self-check");
  c_grad->add_option("--perturb", perturb,
                     "inject an error into dense block N (test hook)");

  auto* c_tau = app.add_subcommand("tau-stats",
                                   "membrane constant distribution");
  c_tau->add_option("--checkpoint", checkpoint, "checkpoint path")->required();

  for (CLI::App* sub : {c_compress, c_train, c_eval, c_grad, c_tau})
    sub->fallthrough();  // allow global options after the subcommand name

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (c_compress->parsed())
      return cmd_compress(g, input, output, baseline_frames);
    if (c_train->parsed())
      return g.precision == 32
                 ? run_train<float>(g, checkpoint, log_path, resume)
                 : run_train<double>(g, checkpoint, log_path, resume);
    if (c_eval->parsed())
      return g.precision == 32 ? run_eval<float>(g, checkpoint)
                               : run_eval<double>(g, checkpoint);
    if (c_grad->parsed()) return cmd_gradcheck(g, perturb);
    if (c_tau->parsed()) return cmd_tau_stats(checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
