#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "sowban/accel/sample.hpp"
#include "sowban/types.hpp"

namespace sowban::accel {

/// counts = round(clamp(g, +-span) * sensitivity).
int quantize(double g, RangeSetting range);
double dequantize(int counts, RangeSetting range);

/// Three-band rule: |v| >= 4g -> +-8g, |v| <= 2g -> +-2g, otherwise +-4g.
RangeSetting adapt_range(double value_g, RangeSetting current);

/// One accelerometer axis with its own adaptive range.
class AxisSampler {
 public:
  struct Reading {
    double g;
    int counts;
    RangeSetting range;
    bool saturated;
  };

  AxisSampler() = default;
  explicit AxisSampler(RangeSetting initial) : range_(initial) {}

  /// Quantizes `true_g` at the current range and picks the range for the next
  /// reading. A saturated reading escalates one band, since the clamped value
  /// alone cannot tell the three-band rule that the signal left the span.
  Reading capture(double true_g);

  RangeSetting range() const { return range_; }
  void reset(RangeSetting r) { range_ = r; }

 private:
  RangeSetting range_ = RangeSetting::g2();
};

/// Triaxial sampler; axes adapt independently.
class Sampler {
 public:
  AccelSample capture(const AccelSample& truth);
  std::array<RangeSetting, 3> ranges() const;
  void reset(RangeSetting r);

 private:
  std::array<AxisSampler, 3> axes_{};
};

struct ClassifierConfig {
  double t0 = 0.1;        // activation threshold, g
  double walk_hi = 0.7;   // walking/running boundary, g
  double fall_thr = 2.5;  // fall magnitude, g (requires Z dominance)

  void validate() const;  // throws Error{Range} unless 0 < t0 < walk_hi < fall_thr
};

/// Features of one 1-s window: per-axis max |a - (0, 0, +1g)|.
struct ActivityWindow {
  double t_start = 0.0;
  std::array<double, 3> max_abs_dev{0.0, 0.0, 0.0};
  Axis dominant_axis = Axis::X;
  StateId state = StateId::Resting;
  std::size_t sample_count = 0;

  double magnitude() const;  // max over axes
};

/// Fills max_abs_dev, dominant_axis and sample_count; `state` is left as
/// Resting until classify_window runs. Ties in dominance resolve X < Y < Z.
ActivityWindow extract_features(std::span<const AccelSample> samples, double t_start);

/// Throws Error{MissingSamples} for an empty window.
StateId classify_window(const ActivityWindow& window, const ClassifierConfig& config);

enum class PowerMode { Sleep, Active };

struct NodePowerState {
  PowerMode mode = PowerMode::Sleep;
  double last_activity_t = 0.0;
  double t0 = 0.1;
  double inactivity_timeout_s = 360.0;
  int quiet_windows = 0;      // consecutive Active windows with m <= t0
  bool fall_latched = false;  // report falling while the patient stays still after an impact
};

struct StepResult {
  NodePowerState state;
  std::optional<StateId> emission;
};

/// Sleep/active workflow. One successor for every (mode, window):
///   Sleep,  m <= t0 -> Sleep,  emits Resting for the wake tick
///   Sleep,  m >  t0 -> Active, emits the classification
///   Active          -> Active, emits the classification; after
///                      inactivity_timeout of consecutive m <= t0 windows -> Sleep
/// After a Falling emission, still windows keep reporting Falling until motion
/// resumes or the node sleeps.
StepResult step_node(const NodePowerState& state, const ActivityWindow& window,
                     const ClassifierConfig& config);

struct NodeConfig {
  ClassifierConfig classifier;
  double fs = 50.0;
  double inactivity_timeout_s = 360.0;
};

struct WindowReport {
  ActivityWindow window;
  PowerMode mode_before = PowerMode::Sleep;
  PowerMode mode_after = PowerMode::Sleep;
  std::optional<StateId> emission;
};

/// Streaming node: takes ground-truth samples at `fs`, samples them the way
/// the current power mode allows, and closes tumbling 1-s windows anchored to
/// whole seconds (the wake ticks). A window closes on its last expected sample.
class AccelNode {
 public:
  explicit AccelNode(NodeConfig config);

  /// Returns the windows closed by this sample (zero or one).
  std::optional<WindowReport> push(const AccelSample& truth);

  /// Drops an incomplete trailing window. Returns true if one was dropped.
  bool discard_partial();

  const NodePowerState& state() const { return state_; }
  const NodeConfig& config() const { return config_; }
  std::array<RangeSetting, 3> ranges() const { return sampler_.ranges(); }

 private:
  WindowReport close_window();

  NodeConfig config_;
  NodePowerState state_;
  Sampler sampler_;
  std::optional<long long> window_index_;
  bool tick_taken_ = false;
  std::vector<AccelSample> captured_;
};

}  // namespace sowban::accel
