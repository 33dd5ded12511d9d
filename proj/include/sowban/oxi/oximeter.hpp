#pragma once

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "sowban/forge/forge.hpp"
#include "sowban/types.hpp"

namespace sowban::oxi {

using forge::OpticalConstants;
using forge::PpgSample;

/// Samples plus the incident intensities they were measured against.
struct PpgWindow {
  std::span<const PpgSample> samples;
  double i_in1 = 1.0;
  double i_in2 = 1.0;
};

/// Absorbance ratio log10(I1/I_in1) / log10(I2/I_in2), each channel taken as
/// the window mean of log10(I/I_in). Throws Error{Signal} on nonpositive
/// intensities, an empty window or a vanishing denominator.
double compute_ratio(const PpgWindow& window);

inline constexpr double kSpo2Max = 0.97;
inline constexpr double kSingularityEps = 1e-12;

struct Spo2Result {
  double fraction = 0.0;  // clamped to [0, 0.97]
  double raw = 0.0;
  unsigned flags = 0;     // flags::kClampedLow / kClampedHigh
};

/// Inverts the two-wavelength model:
///   (alpha_r2 R - alpha_r1) / ((alpha_r2 - alpha_o2) R - (alpha_r1 - alpha_o1))
/// Throws Error{Singularity} when the denominator is within 1e-12 of zero.
Spo2Result compute_spo2(double ratio, const OpticalConstants& constants);

inline constexpr double kHrMin = 30.0;
inline constexpr double kHrMax = 245.0;

struct HrConfig {
  double k = 0.5;                       // threshold = mean + k * std of I2
  double refractory_s = 0.8 * 60.0 / kHrMax;  // minimum beat spacing, below the fastest valid beat
};

struct HrResult {
  std::optional<double> bpm;  // clamped to [30, 245]; empty when < 2 peaks
  double raw_bpm = 0.0;
  unsigned flags = 0;         // kTooFewPeaks, kHrClampedLow, kHrClampedHigh
  std::vector<double> peak_times;
};

/// Heart rate from the infrared channel: 60 / mean inter-peak interval.
HrResult detect_hr(const PpgWindow& window, const HrConfig& config = {});

/// Clamp and flag a rate computed from explicit peak times.
HrResult hr_from_peaks(std::vector<double> peak_times);

struct OxiReading {
  double t = 0.0;
  double spo2 = 0.0;  // percent, [0, 97]
  std::optional<double> hr;
  unsigned flags = 0;
};

struct OximeterConfig {
  OpticalConstants constants;
  double fs = 100.0;
  double window_s = 8.0;
  double emit_every_s = 1.0;
  HrConfig hr;

  void validate() const;
};

/// Ring buffer over the PPG stream that emits a reading every `emit_every_s`
/// once `window_s` of samples is buffered. Readings are stamped with the time
/// just past the newest sample.
class OximeterNode {
 public:
  explicit OximeterNode(OximeterConfig config);

  std::optional<OxiReading> push(const PpgSample& sample);

  const OximeterConfig& config() const { return config_; }

 private:
  OxiReading evaluate(double t) const;

  OximeterConfig config_;
  std::deque<PpgSample> ring_;
  std::size_t capacity_;
};

/// Window evaluation shared by the node and offline replay.
OxiReading evaluate_window(const PpgWindow& window, const OximeterConfig& config, double t);

}  // namespace sowban::oxi
