#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "stcsnn/common.hpp"
#include "stcsnn/network.hpp"

namespace stcsnn {

// Checkpoint layout (all integers little-endian):
//   magic "SNCK", u32 version,
//   u32 arch length + bytes, u32 T, u32 ablation bits,
//   f64 V_th, u32 S_max, f64 alpha_H, f64 alpha_W, f64 dropout_rate,
//   u64 init seed, u32 input H, u32 input W,
//   u32 group_map length + u32 entries,
//   parameter tensors as f64 arrays in declaration order.
inline constexpr std::uint32_t kCheckpointMagic = 0x4B434E53;  // "SNCK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint: truncated");
  return v;
}

}  // namespace detail

template <typename R>
void save_checkpoint(std::ostream& out, const Network<R>& net) {
  using detail::put;
  put<std::uint32_t>(out, kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string& arch = net.config().arch;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.size()));
  out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.config().time_steps));
  std::uint32_t ab = 0;
  if (net.config().ablation.use_synaptic_block) ab |= 1;
  if (net.config().ablation.use_learnable_wm) ab |= 2;
  put<std::uint32_t>(out, ab);
  put<double>(out, net.hyper().v_th);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.hyper().s_max));
  put<double>(out, net.hyper().alpha_h);
  put<double>(out, net.hyper().alpha_w);
  put<double>(out, net.hyper().dropout_rate);
  put<std::uint64_t>(out, net.init_seed());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_height()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_width()));
  const auto& gm = net.params().group_map;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(gm.size()));
  for (std::uint32_t g : gm) put<std::uint32_t>(out, g);
  for (const Tensor<R>* t : net.params().tensors()) {
    for (R v : t->data) put<double>(out, static_cast<double>(v));
  }
}

template <typename R>
Network<R> load_checkpoint(std::istream& in) {
  using detail::get;
  if (get<std::uint32_t>(in) != kCheckpointMagic)
    throw FormatError("checkpoint: bad magic");
  if (get<std::uint32_t>(in) != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version");
  const std::uint32_t arch_len = get<std::uint32_t>(in);
  std::string arch(arch_len, '\0');
  in.read(arch.data(), arch_len);
  const int t_steps = static_cast<int>(get<std::uint32_t>(in));
  const std::uint32_t ab = get<std::uint32_t>(in);
  AblationFlags flags;
  flags.use_synaptic_block = (ab & 1) != 0;
  flags.use_learnable_wm = (ab & 2) != 0;
  Hyper hp;
  hp.v_th = get<double>(in);
  hp.s_max = static_cast<int>(get<std::uint32_t>(in));
  hp.alpha_h = get<double>(in);
  hp.alpha_w = get<double>(in);
  hp.dropout_rate = get<double>(in);
  const std::uint64_t seed = get<std::uint64_t>(in);
  const int in_h = static_cast<int>(get<std::uint32_t>(in));
  const int in_w = static_cast<int>(get<std::uint32_t>(in));

  Network<R> net(parse_arch(arch, t_steps, flags), hp, in_h, in_w);
  net.init_params(seed);  // sizes every tensor; values overwritten below
  const std::uint32_t gm_len = get<std::uint32_t>(in);
  if (gm_len != net.params().group_map.size())
    throw FormatError("checkpoint: group map size mismatch");
  for (std::uint32_t& g : net.params().group_map) g = get<std::uint32_t>(in);
  for (Tensor<R>* t : net.params().tensors()) {
    for (R& v : t->data) v = static_cast<R>(get<double>(in));
  }
  return net;
}

template <typename R>
void save_checkpoint_file(const std::string& path, const Network<R>& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  save_checkpoint(out, net);
}

template <typename R>
Network<R> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  return load_checkpoint<R>(in);
}

}  // namespace stcsnn
