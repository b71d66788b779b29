#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "stcsnn/compress.hpp"

using namespace stcsnn;

namespace {

EventStream random_stream(std::mt19937_64& rng, int n, int w = 8, int h = 8,
                          std::uint64_t max_t = 1000) {
  std::uniform_int_distribution<int> xd(0, w - 1), yd(0, h - 1);
  std::uniform_int_distribution<std::uint64_t> td(0, max_t);
  std::bernoulli_distribution pd(0.5);
  std::vector<Event> ev;
  for (int i = 0; i < n; ++i)
    ev.push_back(Event{static_cast<std::uint16_t>(xd(rng)),
                       static_cast<std::uint16_t>(yd(rng)), td(rng),
                       static_cast<std::uint8_t>(pd(rng))});
  return EventStream(std::move(ev), w, h);
}

double tensor_sum(const FrameTensor& f) {
  double acc = 0;
  for (float v : f.data) acc += v;
  return acc;
}

}  // namespace

TEST_CASE("slice bounds") {
  SliceBounds b = slice_bounds(0, 2, 100);
  CHECK(b.lower == 0);
  CHECK(b.upper == 50);

  b = slice_bounds(1, 2, 101);
  CHECK(b.lower == 50);
  CHECK(b.upper == 101);  // last slice absorbs the remainder

  b = slice_bounds(0, 1, 777);
  CHECK(b.lower == 0);
  CHECK(b.upper == 777);

  CHECK_THROWS_AS(slice_bounds(2, 2, 100), ArgumentError);
  CHECK_THROWS_AS(slice_bounds(-1, 2, 100), ArgumentError);
}

TEST_CASE("empty stream compresses to zeros") {
  EventStream s({}, 4, 4);
  FrameTensor f = compress(s, 3, 8);
  CHECK(f.T == 3);
  CHECK(f.H == 4);
  CHECK(f.W == 4);
  CHECK(tensor_sum(f) == 0.0);
}

TEST_CASE("single event at t=0 lands in sub-window 0 with weight 1") {
  std::vector<Event> ev = {Event{2, 3, 0, 1}, Event{0, 0, 800, 0}};
  EventStream s(std::move(ev), 8, 8);
  FrameTensor f = compress(s, 1, 8);
  CHECK(f.at(0, 1, 3, 2) == 1.0f);  // k = 0 -> 2^0
}

TEST_CASE("one event per sub-window sums the geometric series") {
  std::vector<Event> ev;
  for (int k = 0; k < 8; ++k)
    ev.push_back(Event{1, 1, static_cast<std::uint64_t>(k * 100), 1});
  ev.push_back(Event{0, 0, 800, 0});  // pins duration to 800
  EventStream s(std::move(ev), 4, 4);
  FrameTensor f = compress(s, 1, 8);
  CHECK(f.at(0, 1, 1, 1) == 255.0f);  // 1+2+...+128
  CHECK(f == compress_oracle(s, 1, 8));
}

TEST_CASE("compress equals the naive oracle on random streams") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int t_steps = 1 + trial % 5;
    const int n_r = 1 + trial % 8;
    EventStream s = random_stream(rng, trial % 50, 6, 5, 200 + trial);
    CAPTURE(trial, t_steps, n_r);
    CHECK(compress(s, t_steps, n_r) == compress_oracle(s, t_steps, n_r));
    CHECK(compress(s, t_steps, n_r, true) ==
          compress_oracle(s, t_steps, n_r, true));
  }
}

TEST_CASE("N_r=1 conserves the event count") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    EventStream s = random_stream(rng, 10 + trial, 8, 8);
    FrameTensor f = compress(s, 1 + trial % 4, 1);
    CHECK(tensor_sum(f) == static_cast<double>(s.size()));
  }
}

TEST_CASE("adding an event never decreases any entry") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    EventStream s = random_stream(rng, 20, 6, 6, 500);
    std::vector<Event> ev = s.events();
    // keep duration fixed so the windows do not move
    Event extra{3, 3, s.duration() / 2, 1};
    ev.push_back(extra);
    EventStream bigger(std::move(ev), 6, 6);
    FrameTensor a = compress(s, 2, 4);
    FrameTensor b = compress(bigger, 2, 4);
    for (std::size_t i = 0; i < a.data.size(); ++i)
      CHECK(b.data[i] >= a.data[i]);
  }
}

TEST_CASE("every event is counted in exactly one window") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    EventStream s = random_stream(rng, 1 + trial % 60, 5, 5, 77 + trial * 3);
    const int t_steps = 1 + trial % 4;
    const int n_r = 1 + trial % 8;
    for (int hits : window_membership_counts(s, t_steps, n_r))
      CHECK(hits == 1);
  }
}

TEST_CASE("binary mode clamps per-window duplicates") {
  std::vector<Event> ev = {Event{1, 1, 0, 1}, Event{1, 1, 0, 1},
                           Event{1, 1, 0, 1}, Event{0, 0, 80, 0}};
  EventStream s(std::move(ev), 4, 4);
  CHECK(compress(s, 1, 8).at(0, 1, 1, 1) == 3.0f);
  CHECK(compress(s, 1, 8, true).at(0, 1, 1, 1) == 1.0f);
}

TEST_CASE("compression ratio") {
  CHECK(compression_ratio(19.2, 5) == Catch::Approx(26.04).margin(0.01));
  CHECK(compression_ratio(19.2, 2) == Catch::Approx(10.42).margin(0.01));
  CHECK(compression_ratio(7, 7) == 100.0);
  CHECK_THROWS_AS(compression_ratio(0, 5), ArgumentError);
  CHECK_THROWS_AS(compression_ratio(10, 0), ArgumentError);
}

TEST_CASE("frame tensor serialization round-trip") {
  std::mt19937_64 rng(17);
  EventStream s = random_stream(rng, 40, 8, 8);
  FrameTensor f = compress(s, 2, 8);
  std::stringstream buf;
  save_frame_tensor(buf, f);
  FrameTensor back = load_frame_tensor(buf);
  CHECK(back == f);
}
