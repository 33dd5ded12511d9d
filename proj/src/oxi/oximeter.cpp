#include "sowban/oxi/oximeter.hpp"

#include <algorithm>
#include <cmath>

#include "sowban/simd/kernels.hpp"

namespace sowban::oxi {

namespace {

double mean_log_transmittance(std::span<const PpgSample> samples, double i_in, bool infrared,
                              std::vector<double>& scratch) {
  scratch.clear();
  scratch.reserve(samples.size());
  for (const auto& s : samples) {
    const double v = infrared ? s.i2 : s.i1;
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::Signal, "nonpositive intensity in PPG window");
    }
    scratch.push_back(std::log10(v / i_in));
  }
  return simd::sum(scratch) / static_cast<double>(samples.size());
}

}  // namespace

double compute_ratio(const PpgWindow& window) {
  if (window.samples.empty()) throw Error(ErrorKind::Signal, "empty PPG window");
  if (!(window.i_in1 > 0.0) || !(window.i_in2 > 0.0)) {
    throw Error(ErrorKind::Signal, "incident intensities must be > 0");
  }
  std::vector<double> scratch;
  const double num = mean_log_transmittance(window.samples, window.i_in1, false, scratch);
  const double den = mean_log_transmittance(window.samples, window.i_in2, true, scratch);
  if (std::fabs(den) < 1e-15) {
    throw Error(ErrorKind::Signal, "infrared channel shows no absorbance (zero denominator)");
  }
  return num / den;
}

Spo2Result compute_spo2(double ratio, const OpticalConstants& c) {
  const double num = c.alpha_r2 * ratio - c.alpha_r1;
  const double den = (c.alpha_r2 - c.alpha_o2) * ratio - (c.alpha_r1 - c.alpha_o1);
  if (std::fabs(den) < kSingularityEps) {
    throw Error(ErrorKind::Singularity, "SpO2 inversion denominator is zero");
  }
  Spo2Result r;
  r.raw = num / den;
  r.fraction = r.raw;
  if (r.raw < 0.0) {
    r.fraction = 0.0;
    r.flags |= flags::kClampedLow;
  } else if (r.raw > kSpo2Max) {
    r.fraction = kSpo2Max;
    r.flags |= flags::kClampedHigh;
  }
  return r;
}

HrResult hr_from_peaks(std::vector<double> peak_times) {
  HrResult r;
  r.peak_times = std::move(peak_times);
  const auto n = r.peak_times.size();
  if (n < 2) {
    r.flags |= flags::kTooFewPeaks;
    return r;
  }
  const double span = r.peak_times.back() - r.peak_times.front();
  if (!(span > 0.0)) {
    r.flags |= flags::kTooFewPeaks;
    return r;
  }
  r.raw_bpm = 60.0 * static_cast<double>(n - 1) / span;
  double bpm = r.raw_bpm;
  if (bpm < kHrMin) {
    bpm = kHrMin;
    r.flags |= flags::kHrClampedLow;
  } else if (bpm > kHrMax) {
    bpm = kHrMax;
    r.flags |= flags::kHrClampedHigh;
  }
  r.bpm = bpm;
  return r;
}

HrResult detect_hr(const PpgWindow& window, const HrConfig& config) {
  const auto& s = window.samples;
  if (s.size() < 3) return hr_from_peaks({});

  std::vector<double> ir;
  ir.reserve(s.size());
  for (const auto& p : s) ir.push_back(p.i2);
  const simd::Moments mom = simd::moments(ir, ir.front());
  const double threshold = mom.mean() + config.k * mom.stddev();

  struct Peak {
    double t;
    double v;
  };
  std::vector<Peak> peaks;
  auto take = [&](std::size_t i) {
    // The maximum must have a neighbour on both sides inside the window.
    if (i == 0 || i + 1 >= ir.size()) return;
    const double a = ir[i - 1];
    const double b = ir[i];
    const double c = ir[i + 1];

    // Sub-sample vertex of the parabola through the three samples.
    const double step = 0.5 * (s[i + 1].t - s[i - 1].t);
    const double curvature = a - 2.0 * b + c;
    double offset = curvature < 0.0 ? 0.5 * (a - c) / curvature : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const Peak cand{s[i].t + offset * step, b};

    // One sample of slack: beats exactly one refractory period apart must survive
    // sample-grid rounding.
    if (!peaks.empty() && cand.t - peaks.back().t < config.refractory_s - step) {
      if (cand.v > peaks.back().v) peaks.back() = cand;
      return;
    }
    peaks.push_back(cand);
  };

  // One peak per excursion: above the threshold opens it, back below the mean
  // closes it, so noise on a broad pulse top cannot split a beat.
  const double release = mom.mean();
  std::optional<std::size_t> top;
  for (std::size_t i = 0; i < ir.size(); ++i) {
    if (top) {
      if (ir[i] < release) {
        take(*top);
        top.reset();
      } else if (ir[i] > ir[*top]) {
        top = i;
      }
    } else if (ir[i] > threshold) {
      top = i;
    }
  }
  if (top) take(*top);

  std::vector<double> times;
  times.reserve(peaks.size());
  for (const auto& p : peaks) times.push_back(p.t);
  return hr_from_peaks(std::move(times));
}

void OximeterConfig::validate() const {
  constants.validate();
  if (!(fs > 0.0)) throw Error(ErrorKind::Range, "oximeter fs must be > 0");
  if (!(window_s >= 4.0)) {
    throw Error(ErrorKind::Range, "oximeter window must be >= 4 s (two beats at 30 bpm)");
  }
  if (!(emit_every_s > 0.0)) throw Error(ErrorKind::Range, "emit period must be > 0");
}

OxiReading evaluate_window(const PpgWindow& window, const OximeterConfig& config, double t) {
  OxiReading out;
  out.t = t;
  const Spo2Result spo2 = compute_spo2(compute_ratio(window), config.constants);
  out.spo2 = spo2.fraction * 100.0;
  out.flags |= spo2.flags;
  const HrResult hr = detect_hr(window, config.hr);
  out.hr = hr.bpm;
  out.flags |= hr.flags;
  return out;
}

OximeterNode::OximeterNode(OximeterConfig config) : config_(std::move(config)) {
  config_.validate();
  capacity_ = static_cast<std::size_t>(std::llround(config_.window_s * config_.fs));
}

std::optional<OxiReading> OximeterNode::push(const PpgSample& sample) {
  ring_.push_back(sample);
  if (ring_.size() > capacity_) ring_.pop_front();
  if (ring_.size() < capacity_) return std::nullopt;

  const long long k = std::llround(sample.t * config_.fs);
  const long long every = std::max(1LL, std::llround(config_.emit_every_s * config_.fs));
  if ((k + 1) % every != 0) return std::nullopt;
  try {
    return evaluate(static_cast<double>(k + 1) / config_.fs);
  } catch (const Error&) {
    // Unusable window (signal loss): skip this emission.
    return std::nullopt;
  }
}

OxiReading OximeterNode::evaluate(double t) const {
  std::vector<PpgSample> window(ring_.begin(), ring_.end());
  return evaluate_window({window, config_.constants.i_in1, config_.constants.i_in2}, config_, t);
}

}  // namespace sowban::oxi
