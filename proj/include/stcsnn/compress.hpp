#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stcsnn/common.hpp"
#include "stcsnn/events.hpp"

namespace stcsnn {

// Compressed input frames, shape [T, 2, H, W]. Channel 0 holds OFF
// events, channel 1 ON events. Entries are non-negative; in count mode
// they are integer-valued sums of 2^k-weighted sub-window counts.
struct FrameTensor {
  std::vector<float> data;
  int T = 0;
  int H = 0;
  int W = 0;

  FrameTensor() = default;
  FrameTensor(int t, int h, int w)
      : data(static_cast<std::size_t>(t) * 2 * h * w, 0.0f), T(t), H(h), W(w) {}

  float& at(int j, int p, int y, int x) {
    return data[((static_cast<std::size_t>(j) * 2 + p) * H + y) * W + x];
  }
  float at(int j, int p, int y, int x) const {
    return data[((static_cast<std::size_t>(j) * 2 + p) * H + y) * W + x];
  }

  friend bool operator==(const FrameTensor&, const FrameTensor&) = default;
};

// Microsecond bounds of one temporal slice.
struct SliceBounds {
  std::uint64_t lower = 0;
  std::uint64_t upper = 0;
};

// Slice j of T covers [floor(duration/T)*j, floor(duration/T)*(j+1));
// the last slice extends to the recording's end so no event is dropped.
inline SliceBounds slice_bounds(int j, int t_steps, std::uint64_t duration) {
  if (t_steps < 1) throw ArgumentError("slice_bounds: T must be >= 1");
  if (j < 0 || j >= t_steps)
    throw ArgumentError("slice_bounds: slice index " + std::to_string(j) +
                        " out of range [0," + std::to_string(t_steps) + ")");
  const std::uint64_t step = duration / static_cast<std::uint64_t>(t_steps);
  SliceBounds b;
  b.lower = step * static_cast<std::uint64_t>(j);
  b.upper = (j < t_steps - 1) ? step * static_cast<std::uint64_t>(j + 1)
                              : duration;
  return b;
}

namespace detail {

// Sub-window k of slice [lo, hi) spans
//   [lo + floor(k*(hi-lo)/N_r), lo + floor((k+1)*(hi-lo)/N_r)),
// half-open, except the final sub-window of the final slice which is
// closed on the right so the last event lands exactly once.
inline std::uint64_t subwindow_offset(std::uint64_t span, int k, int n_r) {
  return span * static_cast<std::uint64_t>(k) /
         static_cast<std::uint64_t>(n_r);
}

inline bool in_subwindow(std::uint64_t t, const SliceBounds& b, int k, int n_r,
                         bool final_slice) {
  const std::uint64_t span = b.upper - b.lower;
  const std::uint64_t start = b.lower + subwindow_offset(span, k, n_r);
  const std::uint64_t end = b.lower + subwindow_offset(span, k + 1, n_r);
  if (final_slice && k == n_r - 1) return t >= start && t <= end;
  return t >= start && t < end;
}

}  // namespace detail

// Eq.-style spatio-temporal compression: T slices, each split into N_r
// binary-weighted sub-windows; F(j,p,x,y) = sum_k 2^k * count_k.
// With binary=true each per-sub-window count is clamped to 1 first.
inline FrameTensor compress(const EventStream& stream, int t_steps, int n_r,
                            bool binary = false) {
  if (t_steps < 1 || n_r < 1)
    throw ArgumentError("compress: T and N_r must be >= 1");
  FrameTensor out(t_steps, stream.height(), stream.width());
  if (stream.empty()) return out;

  const std::uint64_t duration = stream.duration();
  const std::uint64_t step = duration / static_cast<std::uint64_t>(t_steps);

  // Per-cell sub-window counts for the current (j,k) window. Events are
  // sorted by t, so each window's events are contiguous.
  const std::size_t cells = 2 * static_cast<std::size_t>(stream.height()) *
                            stream.width();
  std::vector<std::uint32_t> counts(cells, 0);
  std::vector<std::size_t> touched;
  int cur_j = -1, cur_k = -1;

  auto flush = [&]() {
    if (cur_j < 0) return;
    const float weight = static_cast<float>(1u << cur_k);
    for (std::size_t cell : touched) {
      const float c = binary ? 1.0f : static_cast<float>(counts[cell]);
      out.data[static_cast<std::size_t>(cur_j) * cells + cell] += weight * c;
      counts[cell] = 0;
    }
    touched.clear();
  };

  for (const Event& e : stream.events()) {
    int j;
    if (step == 0) {
      j = t_steps - 1;
    } else {
      j = static_cast<int>(std::min<std::uint64_t>(
          e.t / step, static_cast<std::uint64_t>(t_steps - 1)));
    }
    const SliceBounds b = slice_bounds(j, t_steps, duration);
    const std::uint64_t span = b.upper - b.lower;
    const std::uint64_t local = e.t - b.lower;
    // Largest k with offset(k) <= local; the final closed sub-window
    // catches local == span.
    int k = n_r - 1;
    for (int cand = 1; cand < n_r; ++cand) {
      if (local < detail::subwindow_offset(span, cand, n_r)) {
        k = cand - 1;
        break;
      }
    }
    if (j != cur_j || k != cur_k) {
      flush();
      cur_j = j;
      cur_k = k;
    }
    const std::size_t cell =
        (static_cast<std::size_t>(e.p) * stream.height() + e.y) *
            stream.width() +
        e.x;
    if (counts[cell] == 0) touched.push_back(cell);
    ++counts[cell];
  }
  flush();
  return out;
}

// Naive reference: for each event, scan every (j,k) window for
// membership. O(n * T * N_r); test oracle for compress.
inline FrameTensor compress_oracle(const EventStream& stream, int t_steps,
                                   int n_r, bool binary = false) {
  if (t_steps < 1 || n_r < 1)
    throw ArgumentError("compress_oracle: T and N_r must be >= 1");
  FrameTensor out(t_steps, stream.height(), stream.width());
  if (stream.empty()) return out;

  const std::size_t cells = 2 * static_cast<std::size_t>(stream.height()) *
                            stream.width();
  for (int j = 0; j < t_steps; ++j) {
    const SliceBounds b = slice_bounds(j, t_steps, stream.duration());
    const bool final_slice = (j == t_steps - 1);
    for (int k = 0; k < n_r; ++k) {
      std::vector<std::uint32_t> counts(cells, 0);
      for (const Event& e : stream.events()) {
        if (detail::in_subwindow(e.t, b, k, n_r, final_slice)) {
          const std::size_t cell =
              (static_cast<std::size_t>(e.p) * stream.height() + e.y) *
                  stream.width() +
              e.x;
          ++counts[cell];
        }
      }
      const float weight = static_cast<float>(1u << k);
      for (std::size_t cell = 0; cell < cells; ++cell) {
        if (counts[cell] == 0) continue;
        const float c = binary ? 1.0f : static_cast<float>(counts[cell]);
        out.data[static_cast<std::size_t>(j) * cells + cell] += weight * c;
      }
    }
  }
  return out;
}

// Counts how many (j,k) windows each event falls into; the partition
// property requires exactly one per event.
inline std::vector<int> window_membership_counts(const EventStream& stream,
                                                 int t_steps, int n_r) {
  std::vector<int> hits(stream.size(), 0);
  for (int j = 0; j < t_steps; ++j) {
    const SliceBounds b = slice_bounds(j, t_steps, stream.duration());
    const bool final_slice = (j == t_steps - 1);
    for (int k = 0; k < n_r; ++k) {
      for (std::size_t i = 0; i < stream.size(); ++i) {
        if (detail::in_subwindow(stream.events()[i].t, b, k, n_r, final_slice))
          ++hits[i];
      }
    }
  }
  return hits;
}

// Percentage of time steps used relative to a baseline frame count.
inline double compression_ratio(double source_frames, int t_steps) {
  if (source_frames <= 0 || t_steps <= 0)
    throw ArgumentError("compression_ratio: arguments must be positive");
  return 100.0 * static_cast<double>(t_steps) / source_frames;
}

// Serialization: four little-endian uint32 dims [T,2,H,W] followed by
// the flat float32 array.
inline void save_frame_tensor(std::ostream& out, const FrameTensor& f) {
  const std::uint32_t dims[4] = {static_cast<std::uint32_t>(f.T), 2u,
                                 static_cast<std::uint32_t>(f.H),
                                 static_cast<std::uint32_t>(f.W)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(float)));
}

inline FrameTensor load_frame_tensor(std::istream& in) {
  std::uint32_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[1] != 2)
    throw FormatError("frame tensor: bad header");
  FrameTensor f(static_cast<int>(dims[0]), static_cast<int>(dims[2]),
                static_cast<int>(dims[3]));
  in.read(reinterpret_cast<char*>(f.data.data()),
          static_cast<std::streamsize>(f.data.size() * sizeof(float)));
  if (!in) throw FormatError("frame tensor: truncated data");
  return f;
}

}  // namespace stcsnn
