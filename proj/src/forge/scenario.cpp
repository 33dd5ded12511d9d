#include "sowban/forge/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

namespace sowban::forge {

double ScenarioScript::total_duration() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration_s;
  return total;
}

double ScenarioScript::segment_start(std::size_t i) const {
  double start = 0.0;
  for (std::size_t k = 0; k < i && k < segments.size(); ++k) start += segments[k].duration_s;
  return start;
}

std::size_t ScenarioScript::segment_index(double t) const {
  double end = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    end += segments[i].duration_s;
    if (t < end) return i;
  }
  return segments.empty() ? 0 : segments.size() - 1;
}

LatLon ScenarioScript::location_at(double t) const {
  if (segments.empty()) return {};
  return segments[segment_index(t)].location;
}

void validate(const ScenarioScript& script) {
  if (script.segments.empty()) throw Error(ErrorKind::Range, "scenario has no segments");
  for (std::size_t i = 0; i < script.segments.size(); ++i) {
    const auto& s = script.segments[i];
    const std::string where = "segment " + std::to_string(i + 1) + ": ";
    if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) {
      throw Error(ErrorKind::Range, where + "duration must be > 0");
    }
    if (!(s.spo2_true >= 0.0 && s.spo2_true <= 0.97)) {
      throw Error(ErrorKind::Range, where + "spo2 must lie in [0, 0.97]");
    }
    if (!(s.hr_true >= 30.0 && s.hr_true <= 245.0)) {
      throw Error(ErrorKind::Range, where + "hr must lie in [30, 245] bpm");
    }
    if (s.activity == StateId::Falling && s.duration_s < kMinFallSegment_s) {
      throw Error(ErrorKind::Range, where + "falling segments need >= 3 s (impact + quiescence)");
    }
    if (std::fabs(s.location.lat) > 90.0 || std::fabs(s.location.lon) > 180.0) {
      throw Error(ErrorKind::Range, where + "location out of range");
    }
  }
  if (script.noise.accel_g < 0.0 || script.noise.ppg_rel < 0.0) {
    throw Error(ErrorKind::Range, "noise must be non-negative");
  }
}

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> tokenize(const std::string& text, int line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool have = false;
  for (char c : text) {
    if (c == '"') {
      quoted = !quoted;
      have = true;
    } else if (!quoted && (c == ' ' || c == '\t' || c == '\r')) {
      if (have) out.push_back(cur);
      cur.clear();
      have = false;
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (quoted) fail(line, "unterminated quote");
  if (have) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, int line, const std::string& key) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) {
    fail(line, "bad number for '" + key + "': '" + s + "'");
  }
  return v;
}

std::map<std::string, std::string> key_values(const std::vector<std::string>& tokens,
                                              std::size_t from, int line) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0) fail(line, "expected key=value, got '" + tokens[i] + "'");
    kv[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  return kv;
}

}  // namespace

ScenarioScript parse_scenario(std::istream& in) {
  ScenarioScript script;
  std::string text;
  int line = 0;
  Segment carry;  // later segments inherit unspecified vitals and location
  while (std::getline(in, text)) {
    ++line;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    const auto tokens = tokenize(text, line);
    if (tokens.empty()) continue;
    const std::string& cmd = tokens[0];

    if (cmd == "seed") {
      if (tokens.size() != 2) fail(line, "usage: seed <integer>");
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(tokens[1].data(), tokens[1].data() + tokens[1].size(), v);
      if (ec != std::errc() || p != tokens[1].data() + tokens[1].size()) {
        fail(line, "bad seed '" + tokens[1] + "'");
      }
      script.seed = v;
    } else if (cmd == "accel_fs" || cmd == "ppg_fs") {
      if (tokens.size() != 2) fail(line, "usage: " + cmd + " <Hz>");
      const double v = to_double(tokens[1], line, cmd);
      (cmd == "accel_fs" ? script.accel_fs : script.ppg_fs) = v;
    } else if (cmd == "noise") {
      for (const auto& [k, v] : key_values(tokens, 1, line)) {
        if (k == "accel") script.noise.accel_g = to_double(v, line, k);
        else if (k == "ppg") script.noise.ppg_rel = to_double(v, line, k);
        else fail(line, "unknown noise key '" + k + "'");
      }
    } else if (cmd == "patient") {
      for (const auto& [k, v] : key_values(tokens, 1, line)) {
        if (k == "name") script.patient_name = v;
        else if (k == "mrn") script.patient_mrn = v;
        else fail(line, "unknown patient key '" + k + "'");
      }
    } else if (cmd == "fault") {
      if (tokens.size() != 2) fail(line, "usage: fault <name>");
      if (tokens[1] != "double-slot") fail(line, "unknown fault '" + tokens[1] + "'");
      script.faults.push_back(tokens[1]);
    } else if (cmd == "segment") {
      Segment seg = carry;
      bool have_duration = false;
      bool have_activity = false;
      for (const auto& [k, v] : key_values(tokens, 1, line)) {
        if (k == "duration") {
          seg.duration_s = to_double(v, line, k);
          have_duration = true;
        } else if (k == "activity") {
          const double id = to_double(v, line, k);
          if (id != std::floor(id) || id < 1 || id > 4) fail(line, "activity must be 1..4");
          seg.activity = static_cast<StateId>(static_cast<int>(id));
          have_activity = true;
        } else if (k == "spo2") {
          seg.spo2_true = to_double(v, line, k);
        } else if (k == "hr") {
          seg.hr_true = to_double(v, line, k);
        } else if (k == "lat") {
          seg.location.lat = to_double(v, line, k);
        } else if (k == "lon") {
          seg.location.lon = to_double(v, line, k);
        } else {
          fail(line, "unknown segment key '" + k + "'");
        }
      }
      if (!have_duration) fail(line, "segment requires duration=");
      if (!have_activity) fail(line, "segment requires activity=");
      script.segments.push_back(seg);
      try {
        ScenarioScript probe;
        probe.segments = {seg};
        validate(probe);
      } catch (const Error& e) {
        fail(line, e.what());
      }
      carry = seg;
    } else {
      fail(line, "unknown directive '" + cmd + "'");
    }
  }
  if (script.segments.empty()) fail(line, "scenario has no segments");
  try {
    validate(script);
  } catch (const Error& e) {
    fail(line, e.what());
  }
  return script;
}

ScenarioScript load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open scenario '" + path + "'");
  return parse_scenario(in);
}

}  // namespace sowban::forge
