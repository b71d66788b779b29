#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "stcsnn/common.hpp"
#include "stcsnn/network.hpp"

namespace stcsnn {

// JSON run configuration. Unknown keys are hard errors so a typo in a
// hyperparameter name cannot silently fall back to a default.
struct RunConfig {
  struct Dataset {
    std::string kind = "synthetic";  // nmnist | csv | synthetic
    std::string path;
    int width = 16;
    int height = 16;
    int limit_train = 200;
    int limit_test = 100;
    // synthetic-only knobs
    std::uint64_t duration = 1000;
    double rate = 0.003;
  } dataset;

  struct Model {
    std::string arch = "8SC3-AP2-16FC-2Voting";
    int T = 2;
    int N_r = 8;
    bool binary_mode = false;
    bool use_synaptic_block = true;
    bool use_learnable_wm = true;
    int desired_count = 1;
  } model;

  struct Optim {
    double lr = 2e-4;
    int batch = 64;
    int epochs = 50;
    std::uint64_t seed = 1;
  } optim;

  Hyper hyper;  // V_th=10, S_max=15, alpha_H=1, alpha_W=20, dropout 0.5

  AblationFlags ablation() const {
    return AblationFlags{model.use_synaptic_block, model.use_learnable_wm};
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj,
                           const std::set<std::string>& known,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " +
                        where);
  }
}

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::read_if;
  using detail::reject_unknown;
  RunConfig cfg;
  reject_unknown(j, {"dataset", "model", "optim", "hyper"}, "top level");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d,
                   {"kind", "path", "width", "height", "limit_train",
                    "limit_test", "duration", "rate"},
                   "dataset");
    read_if(d, "kind", cfg.dataset.kind);
    read_if(d, "path", cfg.dataset.path);
    read_if(d, "width", cfg.dataset.width);
    read_if(d, "height", cfg.dataset.height);
    read_if(d, "limit_train", cfg.dataset.limit_train);
    read_if(d, "limit_test", cfg.dataset.limit_test);
    read_if(d, "duration", cfg.dataset.duration);
    read_if(d, "rate", cfg.dataset.rate);
    if (cfg.dataset.kind != "nmnist" && cfg.dataset.kind != "csv" &&
        cfg.dataset.kind != "synthetic")
      throw ConfigError("config: dataset.kind must be nmnist|csv|synthetic");
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m,
                   {"arch", "T", "N_r", "binary_mode", "use_synaptic_block",
                    "use_learnable_wm", "desired_count"},
                   "model");
    read_if(m, "arch", cfg.model.arch);
    read_if(m, "T", cfg.model.T);
    read_if(m, "N_r", cfg.model.N_r);
    read_if(m, "binary_mode", cfg.model.binary_mode);
    read_if(m, "use_synaptic_block", cfg.model.use_synaptic_block);
    read_if(m, "use_learnable_wm", cfg.model.use_learnable_wm);
    read_if(m, "desired_count", cfg.model.desired_count);
  }
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    reject_unknown(o, {"lr", "batch", "epochs", "seed"}, "optim");
    read_if(o, "lr", cfg.optim.lr);
    read_if(o, "batch", cfg.optim.batch);
    read_if(o, "epochs", cfg.optim.epochs);
    read_if(o, "seed", cfg.optim.seed);
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    reject_unknown(
        h, {"V_th", "S_max", "alpha_H", "alpha_W", "dropout_rate"}, "hyper");
    read_if(h, "V_th", cfg.hyper.v_th);
    read_if(h, "S_max", cfg.hyper.s_max);
    read_if(h, "alpha_H", cfg.hyper.alpha_h);
    read_if(h, "alpha_W", cfg.hyper.alpha_w);
    read_if(h, "dropout_rate", cfg.hyper.dropout_rate);
  }

  if (cfg.model.T < 1 || cfg.model.N_r < 1)
    throw ConfigError("config: model.T and model.N_r must be >= 1");
  if (cfg.optim.batch < 1 || cfg.optim.epochs < 0)
    throw ConfigError("config: optim.batch must be >= 1, epochs >= 0");
  if (cfg.hyper.v_th <= 0 || cfg.hyper.s_max < 1)
    throw ConfigError("config: V_th must be > 0, S_max >= 1");
  if (cfg.model.desired_count < 1 ||
      cfg.model.desired_count > cfg.hyper.s_max)
    throw ConfigError("config: desired_count must be in [1, S_max]");
  if (cfg.hyper.dropout_rate < 0 || cfg.hyper.dropout_rate >= 1)
    throw ConfigError("config: dropout_rate must be in [0,1)");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_run_config(j);
}

inline nlohmann::json serialize_run_config(const RunConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = {{"kind", cfg.dataset.kind},
                  {"path", cfg.dataset.path},
                  {"width", cfg.dataset.width},
                  {"height", cfg.dataset.height},
                  {"limit_train", cfg.dataset.limit_train},
                  {"limit_test", cfg.dataset.limit_test},
                  {"duration", cfg.dataset.duration},
                  {"rate", cfg.dataset.rate}};
  j["model"] = {{"arch", cfg.model.arch},
                {"T", cfg.model.T},
                {"N_r", cfg.model.N_r},
                {"binary_mode", cfg.model.binary_mode},
                {"use_synaptic_block", cfg.model.use_synaptic_block},
                {"use_learnable_wm", cfg.model.use_learnable_wm},
                {"desired_count", cfg.model.desired_count}};
  j["optim"] = {{"lr", cfg.optim.lr},
                {"batch", cfg.optim.batch},
                {"epochs", cfg.optim.epochs},
                {"seed", cfg.optim.seed}};
  j["hyper"] = {{"V_th", cfg.hyper.v_th},
                {"S_max", cfg.hyper.s_max},
                {"alpha_H", cfg.hyper.alpha_h},
                {"alpha_W", cfg.hyper.alpha_w},
                {"dropout_rate", cfg.hyper.dropout_rate}};
  return j;
}

}  // namespace stcsnn
