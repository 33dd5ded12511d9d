#include "sowban/forge/forge.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace sowban::forge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Independent RNG streams per generator so enabling one noise source never
// perturbs the other.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kAccelStream = 0xacce1ULL;
constexpr std::uint64_t kPpgStream = 0x99a5ULL;

// Fall impact: ramp 0.2-0.3 s, plateau 0.3-0.6 s, ramp 0.6-0.7 s after segment start.
double impact_envelope(double t_rel) {
  if (t_rel < 0.2 || t_rel > 0.7) return 0.0;
  if (t_rel < 0.3) return (t_rel - 0.2) / 0.1;
  if (t_rel <= 0.6) return 1.0;
  return (0.7 - t_rel) / 0.1;
}

// Per-activity excursion around gravity. Integer-hertz cosines put an exact
// peak on every whole second, which is where wake ticks and windows start.
struct Excursion {
  double x, y, z;
};

Excursion excursion(StateId activity, double t, double t_rel) {
  switch (activity) {
    case StateId::Resting:
      return {0.0, 0.0, 0.0};
    case StateId::Walking:
      return {0.40 * std::cos(kTwoPi * 2.0 * t), 0.30 * std::cos(kTwoPi * 1.0 * t),
              0.10 * std::cos(kTwoPi * 4.0 * t)};
    case StateId::Running:
      return {0.40 * std::cos(kTwoPi * 3.0 * t), 0.30 * std::cos(kTwoPi * 1.0 * t),
              1.60 * std::cos(kTwoPi * 3.0 * t)};
    case StateId::Falling: {
      const double env = impact_envelope(t_rel);
      return {0.30 * env, 0.20 * env, 3.10 * env};
    }
  }
  return {0.0, 0.0, 0.0};
}

}  // namespace

void OpticalConstants::validate() const {
  const double all[] = {alpha_o1, alpha_r1, alpha_o2, alpha_r2, path_length, i_in1, i_in2};
  for (double v : all) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::Range, "optical constants must be finite and > 0");
    }
  }
  if (!(alpha_r1 > alpha_o1)) {
    throw Error(ErrorKind::Range, "red channel needs alpha_r1 > alpha_o1");
  }
  if (!(alpha_o2 > alpha_r2)) {
    throw Error(ErrorKind::Range, "infrared channel needs alpha_o2 > alpha_r2");
  }
}

Intensities beer_lambert(const OpticalConstants& c, double conc_oxy, double conc_reduced) {
  const double a1 = (c.alpha_o1 * conc_oxy + c.alpha_r1 * conc_reduced) * c.path_length;
  const double a2 = (c.alpha_o2 * conc_oxy + c.alpha_r2 * conc_reduced) * c.path_length;
  return {c.i_in1 * std::pow(10.0, -a1), c.i_in2 * std::pow(10.0, -a2)};
}

double pulse_at_phase(double phase, double half_width) {
  const double d = (phase - std::floor(phase)) - 0.5;
  if (std::fabs(d) > half_width) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d / half_width));
}

std::vector<AccelSample> gen_accel_trace(const ScenarioScript& script, double fs) {
  if (!(fs >= 10.0 && fs <= 100.0)) {
    throw Error(ErrorKind::Range, "accelerometer fs must lie in [10, 100] Hz");
  }
  validate(script);

  std::mt19937_64 rng(splitmix64(script.seed ^ kAccelStream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = script.noise.accel_g;

  const auto n = static_cast<std::size_t>(std::floor(script.total_duration() * fs + 1e-9));
  std::vector<AccelSample> out;
  out.reserve(n);
  std::size_t seg = 0;
  double seg_start = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / fs;
    while (seg + 1 < script.segments.size() && t >= seg_start + script.segments[seg].duration_s) {
      seg_start += script.segments[seg].duration_s;
      ++seg;
    }
    const Excursion e = excursion(script.segments[seg].activity, t, t - seg_start);
    AccelSample s;
    s.t = t;
    s.x = e.x;
    s.y = e.y;
    s.z = 1.0 + e.z;
    if (sigma > 0.0) {
      s.x += sigma * gauss(rng);
      s.y += sigma * gauss(rng);
      s.z += sigma * gauss(rng);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<PpgSample> gen_ppg(const ScenarioScript& script, const OpticalConstants& constants,
                               double fs, const PulseShape& shape) {
  constants.validate();
  validate(script);
  if (!(fs > 0.0)) throw Error(ErrorKind::Range, "ppg fs must be > 0");
  for (const auto& s : script.segments) {
    if (fs < 4.0 * s.hr_true / 60.0) {
      throw Error(ErrorKind::Range, "ppg fs too low to resolve hr " + format_double(s.hr_true));
    }
  }
  if (!(shape.total_concentration > 0.0) || shape.depth < 0.0 || shape.depth >= 1.0 ||
      !(shape.half_width > 0.0 && shape.half_width <= 0.5)) {
    throw Error(ErrorKind::Range, "invalid pulse shape");
  }

  std::mt19937_64 rng(splitmix64(script.seed ^ kPpgStream));
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto n = static_cast<std::size_t>(std::floor(script.total_duration() * fs + 1e-9));
  std::vector<PpgSample> out;
  out.reserve(n);

  std::size_t seg = 0;
  double seg_start = 0.0;
  double seg_phase = 0.0;  // cardiac phase (beats) at the segment start
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  auto update_sigma = [&](const Segment& s) {
    const double c = shape.total_concentration;
    const Intensities dc = beer_lambert(constants, s.spo2_true * c, (1.0 - s.spo2_true) * c);
    sigma1 = script.noise.ppg_rel * dc.i1;
    sigma2 = script.noise.ppg_rel * dc.i2;
  };
  update_sigma(script.segments[0]);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / fs;
    while (seg + 1 < script.segments.size() && t >= seg_start + script.segments[seg].duration_s) {
      seg_phase += script.segments[seg].duration_s * script.segments[seg].hr_true / 60.0;
      seg_start += script.segments[seg].duration_s;
      ++seg;
      update_sigma(script.segments[seg]);
    }
    const Segment& s = script.segments[seg];
    const double phase = seg_phase + (t - seg_start) * s.hr_true / 60.0;
    const double conc =
        shape.total_concentration * (1.0 - shape.depth * pulse_at_phase(phase, shape.half_width));
    Intensities in = beer_lambert(constants, s.spo2_true * conc, (1.0 - s.spo2_true) * conc);
    if (sigma1 > 0.0 || sigma2 > 0.0) {
      in.i1 = std::max(in.i1 + sigma1 * gauss(rng), 1e-12 * constants.i_in1);
      in.i2 = std::max(in.i2 + sigma2 * gauss(rng), 1e-12 * constants.i_in2);
    }
    out.push_back({t, in.i1, in.i2});
  }
  return out;
}

void write_accel_csv(std::ostream& out, const std::vector<AccelSample>& samples) {
  out << "t,x,y,z\n";
  for (const auto& s : samples) {
    out << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
        << format_double(s.z) << '\n';
  }
}

void write_ppg_csv(std::ostream& out, const std::vector<PpgSample>& samples) {
  out << "t,I1,I2\n";
  for (const auto& s : samples) {
    out << format_double(s.t) << ',' << format_double(s.i1) << ',' << format_double(s.i2) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

// Reads a numeric CSV with exactly the given header. Empty input is an empty trace.
std::vector<std::vector<double>> read_numeric_csv(std::istream& in,
                                                  const std::vector<std::string>& header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  const auto cols = split_csv(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i >= cols.size()) {
      throw Error(ErrorKind::Schema, "line 1: missing column '" + header[i] + "'");
    }
    if (cols[i] != header[i]) {
      throw Error(ErrorKind::Schema, "line 1: column " + std::to_string(i + 1) + " is '" +
                                         cols[i] + "', expected '" + header[i] + "'");
    }
  }
  if (cols.size() > header.size()) {
    throw Error(ErrorKind::Schema, "line 1: unexpected column '" + cols[header.size()] + "'");
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Schema, "line " + std::to_string(lineno) + ": expected " +
                                         std::to_string(header.size()) + " columns, got " +
                                         std::to_string(cells.size()));
    }
    std::vector<double> row(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
      const char* b = cells[i].data();
      const char* e = b + cells[i].size();
      auto [p, ec] = std::from_chars(b, e, row[i]);
      if (ec != std::errc() || p != e || !std::isfinite(row[i])) {
        throw Error(ErrorKind::Schema, "line " + std::to_string(lineno) + ": column '" +
                                           header[i] + "' is not a number: '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<AccelSample> read_accel_csv(std::istream& in) {
  std::vector<AccelSample> out;
  for (const auto& r : read_numeric_csv(in, {"t", "x", "y", "z"})) {
    AccelSample s;
    s.t = r[0];
    s.x = r[1];
    s.y = r[2];
    s.z = r[3];
    out.push_back(s);
  }
  return out;
}

std::vector<PpgSample> read_ppg_csv(std::istream& in) {
  std::vector<PpgSample> out;
  for (const auto& r : read_numeric_csv(in, {"t", "I1", "I2"})) out.push_back({r[0], r[1], r[2]});
  return out;
}

}  // namespace sowban::forge
