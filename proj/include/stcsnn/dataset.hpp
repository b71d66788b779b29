#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stcsnn/common.hpp"
#include "stcsnn/compress.hpp"
#include "stcsnn/events.hpp"
#include "stcsnn/run_config.hpp"
#include "stcsnn/train.hpp"

namespace stcsnn {

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline EventStream load_sample_file(const std::filesystem::path& path,
                                    const std::string& kind, int width,
                                    int height) {
  try {
    if (kind == "nmnist") {
      const auto bytes = read_file_bytes(path);
      return load_nmnist_bin(bytes, width, height);
    }
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return load_aer_csv(in, width, height);
  } catch (const std::runtime_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Directory layout: <root>/<split>/<label>/<files>; split is "Train" or
// "Test" (case-insensitive on the first letter).
inline std::vector<Sample> load_split_dir(const std::filesystem::path& root,
                                          const RunConfig& cfg, int limit,
                                          int t_steps, int n_r, bool binary) {
  std::vector<std::filesystem::path> class_dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw DataError("no class directories under " + root.string());

  std::vector<Sample> out;
  // Round-robin over classes so a small limit still covers every label.
  std::vector<std::vector<std::filesystem::path>> files(class_dirs.size());
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    for (const auto& e : std::filesystem::directory_iterator(class_dirs[c]))
      if (e.is_regular_file()) files[c].push_back(e.path());
    std::sort(files[c].begin(), files[c].end());
  }
  for (std::size_t i = 0; limit < 0 || out.size() < static_cast<std::size_t>(limit); ++i) {
    bool any = false;
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
      if (i >= files[c].size()) continue;
      any = true;
      EventStream s = load_sample_file(files[c][i], cfg.dataset.kind,
                                       cfg.dataset.width, cfg.dataset.height);
      out.push_back(Sample{compress(s, t_steps, n_r, binary),
                           static_cast<int>(c)});
      if (limit >= 0 && out.size() >= static_cast<std::size_t>(limit)) break;
    }
    if (!any) break;
  }
  return out;
}

}  // namespace detail

inline std::vector<Sample> make_synthetic_split(const RunConfig& cfg, int count,
                                                std::uint64_t seed_base) {
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int label = i % 2;
    EventStream s = synth_two_class(label, cfg.dataset.width,
                                    cfg.dataset.height, cfg.dataset.duration,
                                    cfg.dataset.rate, seed_base + i);
    out.push_back(Sample{compress(s, cfg.model.T, cfg.model.N_r,
                                  cfg.model.binary_mode),
                         label});
  }
  return out;
}

inline DatasetSplit load_dataset(const RunConfig& cfg) {
  DatasetSplit split;
  if (cfg.dataset.kind == "synthetic") {
    split.train = make_synthetic_split(cfg, cfg.dataset.limit_train,
                                       mix_seed(cfg.optim.seed, 0x7261696e));
    split.test = make_synthetic_split(cfg, cfg.dataset.limit_test,
                                      mix_seed(cfg.optim.seed, 0x74657374));
    return split;
  }
  const std::filesystem::path root(cfg.dataset.path);
  if (!std::filesystem::is_directory(root))
    throw DataError("dataset path " + cfg.dataset.path +
                    " is not a directory");
  auto find_split = [&](const char* a, const char* b) {
    if (std::filesystem::is_directory(root / a)) return root / a;
    if (std::filesystem::is_directory(root / b)) return root / b;
    throw DataError("dataset is missing a " + std::string(a) + " directory");
  };
  split.train = detail::load_split_dir(find_split("Train", "train"), cfg,
                                       cfg.dataset.limit_train, cfg.model.T,
                                       cfg.model.N_r, cfg.model.binary_mode);
  split.test = detail::load_split_dir(find_split("Test", "test"), cfg,
                                      cfg.dataset.limit_test, cfg.model.T,
                                      cfg.model.N_r, cfg.model.binary_mode);
  return split;
}

}  // namespace stcsnn
