#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sowban/accel/node.hpp"
#include "sowban/forge/forge.hpp"

using namespace sowban;
using namespace sowban::accel;

namespace {

ActivityWindow window_with(double mx, double my, double mz) {
  std::vector<AccelSample> s(5);
  for (auto& a : s) a.z = 1.0;
  s[1].x = mx;
  s[2].y = -my;
  s[3].z = 1.0 + mz;
  return extract_features(s, 0.0);
}

// Independent band oracle on integer tenths of g.
int expected_span_tenths(int tenths) {
  const int a = std::abs(tenths);
  if (a >= 40) return 8;
  if (a <= 20) return 2;
  return 4;
}

}  // namespace

TEST_CASE("quantize examples") {
  CHECK(quantize(1.0, RangeSetting::g2()) == 256);
  CHECK(quantize(5.0, RangeSetting::g4()) == 512);
  CHECK(quantize(-0.5, RangeSetting::g8()) == -32);
  CHECK(quantize(-9.0, RangeSetting::g8()) == -512);
}

TEST_CASE("quantize/dequantize round trip is within half an LSB") {
  for (RangeSetting r : {RangeSetting::g2(), RangeSetting::g4(), RangeSetting::g8()}) {
    const int fs = r.full_scale_counts();
    for (int c = -fs; c <= fs; ++c) CHECK(quantize(dequantize(c, r), r) == c);
    // dense sweep over in-range values
    const double half_lsb = 0.5 / r.sensitivity();
    for (int k = -4000; k <= 4000; ++k) {
      const double g = r.span_g() * (k / 4000.0);
      CHECK(std::fabs(dequantize(quantize(g, r), r) - g) <= half_lsb + 1e-15);
    }
  }
}

TEST_CASE("adapt_range examples") {
  CHECK(adapt_range(4.3, RangeSetting::g4()) == RangeSetting::g8());
  CHECK(adapt_range(1.2, RangeSetting::g8()) == RangeSetting::g2());
  CHECK(adapt_range(3.0, RangeSetting::g2()) == RangeSetting::g4());
  CHECK(adapt_range(-4.0, RangeSetting::g2()) == RangeSetting::g8());
  CHECK(adapt_range(-2.0, RangeSetting::g8()) == RangeSetting::g2());
}

TEST_CASE("adapt_range exhaustive sweep over [-10g, 10g] in 0.1 g steps") {
  for (RangeSetting cur : {RangeSetting::g2(), RangeSetting::g4(), RangeSetting::g8()}) {
    for (int k = -100; k <= 100; ++k) {
      const double v = k / 10.0;
      CHECK(adapt_range(v, cur).span_g() == expected_span_tenths(k));
    }
  }
}

TEST_CASE("saturation escalates and axes adapt independently") {
  AxisSampler ax;
  auto r = ax.capture(4.1);
  CHECK(r.saturated);
  CHECK(r.g == 2.0);
  CHECK(ax.range() == RangeSetting::g4());
  r = ax.capture(4.1);
  CHECK(r.g == 4.0);
  CHECK(ax.range() == RangeSetting::g8());
  r = ax.capture(4.1);
  CHECK(r.g == doctest::Approx(4.1).epsilon(1.0 / 64));

  Sampler s;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-9, 9);
  for (int i = 0; i < 200; ++i) {
    AccelSample in;
    in.x = u(rng);
    in.y = 0.2;
    in.z = 1.0;
    s.capture(in);
    CHECK(s.ranges()[1] == RangeSetting::g2());
    CHECK(s.ranges()[2] == RangeSetting::g2());
  }
}

TEST_CASE("classify_window examples") {
  const ClassifierConfig cfg;
  CHECK(classify_window(window_with(0.02, 0.01, 0.0), cfg) == StateId::Resting);
  CHECK(classify_window(window_with(0.4, 0.1, 0.05), cfg) == StateId::Walking);
  CHECK(classify_window(window_with(0.3, 0.2, 3.1), cfg) == StateId::Falling);
  CHECK(classify_window(window_with(3.1, 0.2, 0.3), cfg) == StateId::Running);  // no Z dominance
  CHECK(classify_window(window_with(0.4, 0.3, 1.6), cfg) == StateId::Running);
  CHECK(classify_window(window_with(0.1, 0.0, 0.0), cfg) == StateId::Walking);  // T0 <= m
  ActivityWindow empty;
  CHECK_THROWS_AS(classify_window(empty, cfg), Error);
  ClassifierConfig bad;
  bad.walk_hi = 3.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("classification is invariant to sample order") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 0.8);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<AccelSample> s(50);
    for (auto& a : s) {
      a.x = g(rng);
      a.y = g(rng);
      a.z = 1.0 + 2.0 * g(rng);
    }
    const ActivityWindow w1 = extract_features(s, 0);
    std::shuffle(s.begin(), s.end(), rng);
    const ActivityWindow w2 = extract_features(s, 0);
    CHECK(w1.max_abs_dev == w2.max_abs_dev);
    CHECK(classify_window(w1, {}) == classify_window(w2, {}));
  }
}

TEST_CASE("step_node examples") {
  const ClassifierConfig cfg;
  NodePowerState st;
  for (int i = 0; i < 100; ++i) {
    auto r = step_node(st, window_with(0, 0, 0), cfg);
    CHECK(r.state.mode == PowerMode::Sleep);
    CHECK(r.emission == StateId::Resting);
    st = r.state;
  }
  auto r = step_node(st, window_with(0.5, 0, 0), cfg);
  CHECK(r.state.mode == PowerMode::Active);
  CHECK(r.emission == StateId::Walking);
  st = r.state;
  for (int i = 1; i <= 360; ++i) {
    r = step_node(st, window_with(0.05, 0, 0), cfg);
    if (i < 360) {
      CHECK(r.state.mode == PowerMode::Active);
    } else {
      CHECK(r.state.mode == PowerMode::Sleep);
    }
    st = r.state;
  }
}

TEST_CASE("step_node is total over modes, latch flags and magnitudes") {
  const ClassifierConfig cfg;
  for (PowerMode mode : {PowerMode::Sleep, PowerMode::Active}) {
    for (bool latched : {false, true}) {
      for (int quiet : {0, 359}) {
        for (double m : {0.0, 0.05, 0.1, 0.11, 0.69, 0.7, 2.49, 2.5, 5.0}) {
          for (int axis = 0; axis < 3; ++axis) {
            NodePowerState st;
            st.mode = mode;
            st.fall_latched = latched;
            st.quiet_windows = quiet;
            const auto w = window_with(axis == 0 ? m : 0, axis == 1 ? m : 0, axis == 2 ? m : 0);
            const auto r = step_node(st, w, cfg);
            CHECK(r.emission.has_value());
            CHECK((r.state.mode == PowerMode::Sleep || r.state.mode == PowerMode::Active));
          }
        }
      }
    }
  }
}

TEST_CASE("post-fall stillness keeps reporting a fall until motion resumes") {
  const ClassifierConfig cfg;
  NodePowerState st;
  st.mode = PowerMode::Active;
  auto r = step_node(st, window_with(0.3, 0.2, 3.1), cfg);
  CHECK(r.emission == StateId::Falling);
  r = step_node(r.state, window_with(0.01, 0, 0), cfg);
  CHECK(r.emission == StateId::Falling);
  r = step_node(r.state, window_with(0.4, 0, 0), cfg);
  CHECK(r.emission == StateId::Walking);
  r = step_node(r.state, window_with(0.01, 0, 0), cfg);
  CHECK(r.emission == StateId::Resting);
}

TEST_CASE("node labels every interior window of generated traces") {
  for (double fs : {10.0, 50.0, 100.0}) {
    forge::ScenarioScript script;
    script.seed = 3;
    script.noise.accel_g = 0.01;
    script.segments = {{10, StateId::Resting}, {10, StateId::Walking},
                       {10, StateId::Running}, {6, StateId::Falling}};
    const auto trace = forge::gen_accel_trace(script, fs);
    NodeConfig cfg;
    cfg.fs = fs;
    AccelNode node(cfg);
    int windows = 0;
    for (const auto& s : trace) {
      if (auto rep = node.push(s)) {
        const double t0 = rep->window.t_start;
        const auto seg = script.segment_index(t0);
        if (script.segment_index(t0 + 0.999) == seg) {
          CAPTURE(fs);
          CAPTURE(t0);
          REQUIRE(rep->emission.has_value());
          CHECK(*rep->emission == script.segments[seg].activity);
        }
        ++windows;
      }
    }
    CHECK(windows == 36);
    CHECK_FALSE(node.discard_partial());
  }
}

TEST_CASE("sleeping node only takes the wake-tick sample") {
  NodeConfig cfg;
  AccelNode node(cfg);
  std::optional<WindowReport> rep;
  for (int k = 0; k < 50; ++k) {
    AccelSample s;
    s.t = k / 50.0;
    s.z = 1.0;
    rep = node.push(s);
  }
  REQUIRE(rep);
  CHECK(rep->window.sample_count == 1);
  CHECK(rep->mode_after == PowerMode::Sleep);
}
