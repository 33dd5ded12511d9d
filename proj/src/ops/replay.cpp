#include "sowban/ops/replay.hpp"

#include <ostream>

namespace sowban::ops {

namespace {

const char* axis_name(Axis a) { return a == Axis::X ? "x" : (a == Axis::Y ? "y" : "z"); }

}  // namespace

TraceKind trace_kind_from_string(const std::string& s) {
  if (s == "accel") return TraceKind::Accel;
  if (s == "ppg" || s == "oxi") return TraceKind::Ppg;
  throw Error(ErrorKind::Schema, "unknown trace kind '" + s + "' (accel or ppg)");
}

std::string window_row(const accel::WindowReport& r) {
  const auto& w = r.window;
  std::string row = format_double(w.t_start) + ',' + std::to_string(w.sample_count) + ',' +
                    (r.mode_after == accel::PowerMode::Sleep ? "sleep" : "active") + ',';
  row += r.emission ? std::to_string(to_int(*r.emission)) : "";
  for (double d : w.max_abs_dev) row += ',' + format_double(d);
  row += ',';
  row += axis_name(w.dominant_axis);
  return row;
}

std::string reading_row(const oxi::OxiReading& r) {
  return format_double(r.t) + ',' + format_double(r.spo2) + ',' + (r.hr ? format_double(*r.hr) : "") + ',' +
         std::to_string(r.flags);
}

ReplayResult replay_accel(std::istream& in, std::ostream& out, const accel::NodeConfig& config) {
  const auto samples = forge::read_accel_csv(in);
  ReplayResult res;
  if (samples.empty()) return res;
  out << kWindowsHeader << '\n';
  accel::AccelNode node(config);
  for (const auto& s : samples) {
    if (auto rep = node.push(s)) {
      out << window_row(*rep) << '\n';
      ++res.rows;
    }
  }
  if (node.discard_partial()) res.warnings.push_back("final partial window skipped");
  return res;
}

ReplayResult replay_ppg(std::istream& in, std::ostream& out, const oxi::OximeterConfig& config) {
  const auto samples = forge::read_ppg_csv(in);
  ReplayResult res;
  if (samples.empty()) return res;
  out << kReadingsHeader << '\n';
  oxi::OximeterNode node(config);
  std::size_t since_reading = 0;
  for (const auto& s : samples) {
    ++since_reading;
    if (auto r = node.push(s)) {
      out << reading_row(*r) << '\n';
      ++res.rows;
      since_reading = 0;
    }
  }
  if (since_reading > 0 && !samples.empty()) {
    res.warnings.push_back(std::to_string(since_reading) + " trailing samples after the last reading skipped");
  }
  return res;
}

}  // namespace sowban::ops
