#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stcsnn/common.hpp"

namespace stcsnn {

// One DVS address-event. Timestamps are microseconds; polarity is
// 0 = OFF, 1 = ON.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;
  std::uint8_t p = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

// A validated recording: events sorted non-decreasing by t, all inside
// the sensor bounds. Immutable after construction.
class EventStream {
 public:
  EventStream() = default;

  // Validates bounds, stable-sorts by timestamp, derives duration.
  EventStream(std::vector<Event> events, int width, int height)
      : events_(std::move(events)), width_(width), height_(height) {
    if (width_ <= 0 || height_ <= 0)
      throw ArgumentError("EventStream: sensor dimensions must be positive");
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (e.x >= width_ || e.y >= height_)
        throw DataError("event " + std::to_string(i) +
                        " out of sensor bounds (" + std::to_string(e.x) + "," +
                        std::to_string(e.y) + ")");
      if (e.p > 1)
        throw DataError("event " + std::to_string(i) + " has polarity " +
                        std::to_string(e.p));
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    duration_ = events_.empty() ? 0 : events_.back().t;
  }

  const std::vector<Event>& events() const { return events_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::uint64_t duration() const { return duration_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

 private:
  std::vector<Event> events_;
  int width_ = 1;
  int height_ = 1;
  std::uint64_t duration_ = 0;
};

// N-MNIST / ATIS binary layout, 5 bytes per event:
//   byte0 = x, byte1 = y, byte2 bit7 = polarity,
//   byte2 bits 6..0 ++ byte3 ++ byte4 = 23-bit big-endian timestamp (us).
inline EventStream load_nmnist_bin(std::span<const std::uint8_t> bytes,
                                   int width, int height) {
  if (bytes.size() % 5 != 0)
    throw FormatError("N-MNIST binary length " + std::to_string(bytes.size()) +
                      " is not a multiple of 5");
  std::vector<Event> events;
  events.reserve(bytes.size() / 5);
  for (std::size_t i = 0; i + 5 <= bytes.size(); i += 5) {
    Event e;
    e.x = bytes[i];
    e.y = bytes[i + 1];
    e.p = static_cast<std::uint8_t>((bytes[i + 2] >> 7) & 1u);
    e.t = (static_cast<std::uint64_t>(bytes[i + 2] & 0x7Fu) << 16) |
          (static_cast<std::uint64_t>(bytes[i + 3]) << 8) |
          static_cast<std::uint64_t>(bytes[i + 4]);
    if (e.x >= width || e.y >= height)
      throw DataError("corrupt record " + std::to_string(i / 5) +
                      ": coordinates (" + std::to_string(e.x) + "," +
                      std::to_string(e.y) + ") out of bounds");
    events.push_back(e);
  }
  return EventStream(std::move(events), width, height);
}

// Inverse of load_nmnist_bin. The 5-byte format caps coordinates at 255
// and timestamps at 23 bits; events beyond that are rejected here, not
// silently truncated.
inline std::vector<std::uint8_t> encode_nmnist_bin(const EventStream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(stream.size() * 5);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Event& e = stream.events()[i];
    if (e.x > 255 || e.y > 255)
      throw FormatError("event " + std::to_string(i) +
                        ": coordinates exceed 8 bits");
    if (e.t >= (1ull << 23))
      throw FormatError("event " + std::to_string(i) +
                        ": timestamp exceeds 23 bits");
    out.push_back(static_cast<std::uint8_t>(e.x));
    out.push_back(static_cast<std::uint8_t>(e.y));
    out.push_back(static_cast<std::uint8_t>((e.p << 7) | ((e.t >> 16) & 0x7Fu)));
    out.push_back(static_cast<std::uint8_t>((e.t >> 8) & 0xFFu));
    out.push_back(static_cast<std::uint8_t>(e.t & 0xFFu));
  }
  return out;
}

// CSV AER: one "x,y,t,p" record per line, '#' comments, LF or CRLF.
// Timestamps may exceed 23 bits here (stored as 64-bit).
inline EventStream load_aer_csv(std::istream& in, int width, int height) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    unsigned long long x, y, t, p;
    char trailing;
    std::istringstream ls(line);
    char c1, c2, c3;
    if (!(ls >> x >> c1 >> y >> c2 >> t >> c3 >> p) || c1 != ',' ||
        c2 != ',' || c3 != ',' || (ls >> trailing))
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected \"x,y,t,p\", got \"" + line + "\"");
    if (p > 1)
      throw ParseError("line " + std::to_string(line_no) + ": polarity " +
                       std::to_string(p) + " not in {0,1}");
    if (x > 0xFFFF || y > 0xFFFF)
      throw ParseError("line " + std::to_string(line_no) +
                       ": coordinate out of 16-bit range");
    events.push_back(Event{static_cast<std::uint16_t>(x),
                           static_cast<std::uint16_t>(y),
                           static_cast<std::uint64_t>(t),
                           static_cast<std::uint8_t>(p)});
  }
  return EventStream(std::move(events), width, height);
}

inline EventStream load_aer_csv(const std::string& text, int width,
                                int height) {
  std::istringstream in(text);
  return load_aer_csv(in, width, height);
}

// Desk-scale two-class fixture: Poisson events on the left (class 0) or
// right (class 1) half of the sensor. Deterministic per seed.
inline EventStream synth_two_class(int class_id, int width, int height,
                                   std::uint64_t duration, double rate,
                                   std::uint64_t seed) {
  if (class_id != 0 && class_id != 1)
    throw ArgumentError("synth_two_class: class_id must be 0 or 1");
  if (rate <= 0 || duration == 0)
    throw ArgumentError("synth_two_class: rate and duration must be positive");
  const int half = width / 2;
  const int x_lo = class_id == 0 ? 0 : half;
  const int x_hi = class_id == 0 ? half : width;
  if (x_lo >= x_hi) throw ArgumentError("synth_two_class: zero-area mask");

  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> count_dist(rate *
                                            static_cast<double>(duration));
  std::uniform_int_distribution<std::uint64_t> time_dist(0, duration);
  std::bernoulli_distribution pol_dist(0.5);

  std::vector<Event> events;
  for (int y = 0; y < height; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      const int n = count_dist(rng);
      for (int i = 0; i < n; ++i) {
        events.push_back(Event{static_cast<std::uint16_t>(x),
                               static_cast<std::uint16_t>(y), time_dist(rng),
                               static_cast<std::uint8_t>(pol_dist(rng))});
      }
    }
  }
  return EventStream(std::move(events), width, height);
}

}  // namespace stcsnn
