#include "sowban/accel/node.hpp"

#include <algorithm>
#include <cmath>

#include "sowban/simd/kernels.hpp"

namespace sowban::accel {

int quantize(double g, RangeSetting range) {
  const double span = static_cast<double>(range.span_g());
  const double clamped = std::clamp(g, -span, span);
  return static_cast<int>(std::lround(clamped * range.sensitivity()));
}

double dequantize(int counts, RangeSetting range) {
  return static_cast<double>(counts) / range.sensitivity();
}

RangeSetting adapt_range(double value_g, RangeSetting /*current*/) {
  const double a = std::fabs(value_g);
  if (a >= 4.0) return RangeSetting::g8();
  if (a <= 2.0) return RangeSetting::g2();
  return RangeSetting::g4();
}

AxisSampler::Reading AxisSampler::capture(double true_g) {
  const RangeSetting used = range_;
  const int counts = quantize(true_g, used);
  const double g = dequantize(counts, used);
  const bool saturated = std::abs(counts) >= used.full_scale_counts() &&
                         std::fabs(true_g) > static_cast<double>(used.span_g());
  if (saturated && used == RangeSetting::g2()) {
    range_ = RangeSetting::g4();
  } else if (saturated) {
    range_ = RangeSetting::g8();
  } else {
    range_ = adapt_range(g, used);
  }
  return {g, counts, used, saturated};
}

AccelSample Sampler::capture(const AccelSample& truth) {
  AccelSample out;
  out.t = truth.t;
  const auto rx = axes_[0].capture(truth.x);
  const auto ry = axes_[1].capture(truth.y);
  const auto rz = axes_[2].capture(truth.z);
  out.x = rx.g;
  out.y = ry.g;
  out.z = rz.g;
  out.range = {rx.range, ry.range, rz.range};
  return out;
}

std::array<RangeSetting, 3> Sampler::ranges() const {
  return {axes_[0].range(), axes_[1].range(), axes_[2].range()};
}

void Sampler::reset(RangeSetting r) {
  for (auto& a : axes_) a.reset(r);
}

void ClassifierConfig::validate() const {
  if (!(t0 > 0.0 && t0 < walk_hi && walk_hi < fall_thr)) {
    throw Error(ErrorKind::Range, "classifier thresholds must satisfy 0 < t0 < walk_hi < fall_thr");
  }
}

double ActivityWindow::magnitude() const {
  return std::max({max_abs_dev[0], max_abs_dev[1], max_abs_dev[2]});
}

ActivityWindow extract_features(std::span<const AccelSample> samples, double t_start) {
  ActivityWindow w;
  w.t_start = t_start;
  w.sample_count = samples.size();
  if (samples.empty()) return w;

  std::array<std::vector<double>, 3> axes;
  for (auto& a : axes) a.reserve(samples.size());
  for (const auto& s : samples) {
    axes[0].push_back(s.x);
    axes[1].push_back(s.y);
    axes[2].push_back(s.z);
  }
  constexpr std::array<double, 3> kGravity{0.0, 0.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    w.max_abs_dev[i] = simd::max_abs_deviation(axes[i], kGravity[i]);
  }
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (w.max_abs_dev[i] > w.max_abs_dev[best]) best = i;
  }
  w.dominant_axis = static_cast<Axis>(best);
  return w;
}

StateId classify_window(const ActivityWindow& window, const ClassifierConfig& config) {
  if (window.sample_count == 0) {
    throw Error(ErrorKind::MissingSamples, "activity window has no samples");
  }
  const double m = window.magnitude();
  if (m < config.t0) return StateId::Resting;
  if (m < config.walk_hi) return StateId::Walking;
  if (m >= config.fall_thr && window.dominant_axis == Axis::Z) return StateId::Falling;
  return StateId::Running;
}

StepResult step_node(const NodePowerState& state, const ActivityWindow& window,
                     const ClassifierConfig& config) {
  StepResult r{state, std::nullopt};
  NodePowerState& next = r.state;
  const double m = window.magnitude();
  const StateId cls = classify_window(window, config);
  const bool moving = m > state.t0;

  if (state.mode == PowerMode::Sleep) {
    if (!moving) {
      r.emission = StateId::Resting;
      return r;
    }
    next.mode = PowerMode::Active;
    next.quiet_windows = 0;
    next.last_activity_t = window.t_start;
    next.fall_latched = cls == StateId::Falling;
    r.emission = cls;
    return r;
  }

  StateId emit = cls;
  if (moving) {
    next.quiet_windows = 0;
    next.last_activity_t = window.t_start;
    next.fall_latched = cls == StateId::Falling;
  } else {
    next.quiet_windows = state.quiet_windows + 1;
    if (state.fall_latched && cls == StateId::Resting) emit = StateId::Falling;
  }
  r.emission = emit;

  // Windows are 1 s long, so the quiet window count is the quiet time in seconds.
  if (static_cast<double>(next.quiet_windows) >= state.inactivity_timeout_s) {
    next.mode = PowerMode::Sleep;
    next.quiet_windows = 0;
    next.fall_latched = false;
  }
  return r;
}

AccelNode::AccelNode(NodeConfig config) : config_(config) {
  config_.classifier.validate();
  if (!(config_.fs >= 10.0 && config_.fs <= 100.0)) {
    throw Error(ErrorKind::Range, "accelerometer fs must lie in [10, 100] Hz");
  }
  if (!(config_.inactivity_timeout_s > 0.0)) {
    throw Error(ErrorKind::Range, "inactivity timeout must be > 0");
  }
  state_.t0 = config_.classifier.t0;
  state_.inactivity_timeout_s = config_.inactivity_timeout_s;
  sampler_.reset(RangeSetting::g2());
}

std::optional<WindowReport> AccelNode::push(const AccelSample& truth) {
  const long long idx = static_cast<long long>(std::floor(truth.t + 1e-9));
  std::optional<WindowReport> closed;
  if (window_index_ && idx != *window_index_) {
    // A sample from a later window arrived before this one completed (gap in
    // the stream): the unfinished window is dropped.
    captured_.clear();
    tick_taken_ = false;
  }
  window_index_ = idx;

  if (state_.mode == PowerMode::Active) {
    captured_.push_back(sampler_.capture(truth));
  } else if (!tick_taken_) {
    // Asleep: the wake timer fires once per second and takes a single reading.
    captured_.push_back(sampler_.capture(truth));
    tick_taken_ = true;
  }

  const double window_end = static_cast<double>(idx) + 1.0;
  if (truth.t + 1.0 / config_.fs >= window_end - 1e-6) {
    closed = close_window();
  }
  return closed;
}

bool AccelNode::discard_partial() {
  const bool had = !captured_.empty();
  captured_.clear();
  tick_taken_ = false;
  window_index_.reset();
  return had;
}

WindowReport AccelNode::close_window() {
  WindowReport rep;
  rep.window = extract_features(captured_, static_cast<double>(*window_index_));
  rep.mode_before = state_.mode;
  StepResult step = step_node(state_, rep.window, config_.classifier);
  rep.window.state = classify_window(rep.window, config_.classifier);
  rep.emission = step.emission;
  if (state_.mode == PowerMode::Active && step.state.mode == PowerMode::Sleep) {
    sampler_.reset(RangeSetting::g2());
  }
  state_ = step.state;
  rep.mode_after = state_.mode;
  captured_.clear();
  tick_taken_ = false;
  window_index_.reset();
  return rep;
}

}  // namespace sowban::accel
