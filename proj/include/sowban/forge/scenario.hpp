#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sowban/types.hpp"

namespace sowban::forge {

struct Segment {
  double duration_s = 0.0;
  StateId activity = StateId::Resting;
  double spo2_true = 0.97;  // fraction
  double hr_true = 72.0;    // bpm
  LatLon location;
};

struct NoiseSpec {
  double accel_g = 0.0;   // per-axis standard deviation in g
  double ppg_rel = 0.0;   // per-channel std as a fraction of the channel's DC level
};

/// A scripted run. Besides the segments the text format carries a few run
/// directives (sampling rates, patient identity, fault injection) that the
/// scenario runner consumes; the generators ignore them.
struct ScenarioScript {
  std::uint64_t seed = 1;
  std::vector<Segment> segments;
  NoiseSpec noise;

  std::optional<double> accel_fs;
  std::optional<double> ppg_fs;
  std::string patient_name = "Demo Patient";
  std::string patient_mrn = "MRN-0001";
  std::vector<std::string> faults;

  double total_duration() const;
  /// Index of the segment containing t (segments are half-open [start, end)).
  std::size_t segment_index(double t) const;
  double segment_start(std::size_t i) const;
  LatLon location_at(double t) const;
};

/// Minimum duration of a falling segment: impact plus at least 2 s of quiescence.
inline constexpr double kMinFallSegment_s = 3.0;

/// Throws Error{Range} when a segment violates its invariants.
void validate(const ScenarioScript& script);

/// Parses the line-oriented scenario format (see docs/SCENARIO_FORMAT.md).
/// Errors are Error{Parse} with "line N:" prefixed to the message.
ScenarioScript parse_scenario(std::istream& in);
ScenarioScript load_scenario(const std::string& path);

}  // namespace sowban::forge
