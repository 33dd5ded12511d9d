#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sowban/accel/node.hpp"
#include "sowban/oxi/oximeter.hpp"

namespace sowban::ops {

enum class TraceKind { Accel, Ppg };
TraceKind trace_kind_from_string(const std::string& s);  // "accel" | "ppg"; throws Error{Schema}

inline constexpr const char* kWindowsHeader =
    "t_start,samples,mode,emission,max_dev_x,max_dev_y,max_dev_z,dominant";
inline constexpr const char* kReadingsHeader = "t,spo2,hr,flags";

std::string window_row(const accel::WindowReport& r);
std::string reading_row(const oxi::OxiReading& r);

struct ReplayResult {
  std::size_t rows = 0;
  std::vector<std::string> warnings;
};

/// Runs the accelerometer node over a trace CSV and writes one row per closed
/// window. A trailing incomplete window is skipped with a warning. An empty
/// trace produces no output at all.
ReplayResult replay_accel(std::istream& in, std::ostream& out, const accel::NodeConfig& config);

/// Runs the oximeter node over a PPG CSV and writes one row per reading.
/// Samples after the last reading are skipped with a warning.
ReplayResult replay_ppg(std::istream& in, std::ostream& out, const oxi::OximeterConfig& config);

}  // namespace sowban::ops
