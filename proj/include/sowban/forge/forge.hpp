#pragma once

#include <iosfwd>
#include <vector>

#include "sowban/accel/sample.hpp"
#include "sowban/forge/scenario.hpp"

namespace sowban::forge {

/// Extinction coefficients at 660 nm (index 1) and 940 nm (index 2) for
/// oxyhaemoglobin (o) and reduced haemoglobin (r), optical path length and
/// incident intensities. Values are configuration, not physical truth.
struct OpticalConstants {
  double alpha_o1 = 0.10;
  double alpha_r1 = 0.80;
  double alpha_o2 = 0.30;
  double alpha_r2 = 0.10;
  double path_length = 1.0;
  double i_in1 = 1.0;
  double i_in2 = 1.0;

  /// Throws Error{Range} unless all values are positive and the red/infrared
  /// asymmetry holds (alpha_r1 > alpha_o1, alpha_o2 > alpha_r2).
  void validate() const;
};

/// Transmitted intensities for the given oxy/reduced concentrations.
struct Intensities {
  double i1;
  double i2;
};
Intensities beer_lambert(const OpticalConstants& c, double conc_oxy, double conc_reduced);

/// Cardiac modulation of the total haemoglobin concentration: a raised-cosine
/// pulse of `half_width` (fraction of a period) centred mid-beat lowers the
/// concentration by `depth`, so transmitted intensity peaks once per beat.
struct PulseShape {
  double total_concentration = 1.0;
  double depth = 0.10;
  double half_width = 0.40;
};

struct PpgSample {
  double t = 0.0;
  double i1 = 0.0;
  double i2 = 0.0;
};

/// Accelerometer ground truth in the node frame (+1 g on Z at rest).
/// Requires fs in [10, 100] Hz. Emitted ranges are +-8g (ideal analog values).
std::vector<AccelSample> gen_accel_trace(const ScenarioScript& script, double fs);

/// Dual-wavelength intensity stream. Requires fs >= 4 * hr/60 for every segment.
std::vector<PpgSample> gen_ppg(const ScenarioScript& script, const OpticalConstants& constants,
                               double fs, const PulseShape& shape = {});

/// Pulse value in [0,1] at cardiac phase `phase` (beats); peaks at phase k + 0.5.
double pulse_at_phase(double phase, double half_width);

// Trace CSV I/O. Values are written with round-trip precision.
void write_accel_csv(std::ostream& out, const std::vector<AccelSample>& samples);
void write_ppg_csv(std::ostream& out, const std::vector<PpgSample>& samples);
/// Throws Error{Schema} naming the offending column and line.
std::vector<AccelSample> read_accel_csv(std::istream& in);
std::vector<PpgSample> read_ppg_csv(std::istream& in);

}  // namespace sowban::forge
