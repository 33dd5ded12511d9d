#include "sowban/types.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace sowban {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Range: return "range";
    case ErrorKind::Signal: return "signal";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::MissingSamples: return "missing_samples";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Bind: return "bind";
    case ErrorKind::Auth: return "auth";
    case ErrorKind::Forbidden: return "forbidden";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

StateId state_from_int(int id) {
  if (id < 1 || id > 4) {
    throw Error(ErrorKind::Range, "activity id out of range: " + std::to_string(id));
  }
  return static_cast<StateId>(id);
}

std::string_view state_label(StateId s) {
  switch (s) {
    case StateId::Resting: return "resting";
    case StateId::Walking: return "walking";
    case StateId::Running: return "running";
    case StateId::Falling: return "falling";
  }
  return "?";
}

double distance_m(LatLon a, LatLon b) {
  constexpr double kEarthRadius = 6371008.8;
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kDeg;
  const double dlon = (b.lon - a.lon) * kDeg;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(s)));
}

nlohmann::ordered_json to_json(const VitalsPacket& p) {
  nlohmann::ordered_json j;
  j["patient_id"] = p.patient_id;
  j["t"] = p.t;
  j["activity"] = to_int(p.activity);
  j["spo2"] = p.spo2;
  j["hr"] = p.hr;
  j["lat"] = p.location.lat;
  j["lon"] = p.location.lon;
  j["flags"] = p.flags;
  return j;
}

namespace {

double finite_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw Error(ErrorKind::Schema, std::string("missing or non-numeric field '") + key + "'");
  }
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::Schema, std::string("non-finite field '") + key + "'");
  }
  return v;
}

}  // namespace

VitalsPacket packet_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Schema, "packet must be an object");
  VitalsPacket p;
  if (!j.contains("patient_id") || !j["patient_id"].is_string()) {
    throw Error(ErrorKind::Schema, "missing field 'patient_id'");
  }
  p.patient_id = j["patient_id"].get<std::string>();
  p.t = finite_number(j, "t");
  if (!j.contains("activity") || !j["activity"].is_number_integer()) {
    throw Error(ErrorKind::Schema, "missing integer field 'activity'");
  }
  try {
    p.activity = state_from_int(j["activity"].get<int>());
  } catch (const Error& e) {
    throw Error(ErrorKind::Schema, e.what());
  }
  p.spo2 = finite_number(j, "spo2");
  p.hr = finite_number(j, "hr");
  p.location.lat = finite_number(j, "lat");
  p.location.lon = finite_number(j, "lon");
  if (j.contains("flags")) {
    if (!j["flags"].is_number_unsigned() && !j["flags"].is_number_integer()) {
      throw Error(ErrorKind::Schema, "non-integer field 'flags'");
    }
    p.flags = j["flags"].get<unsigned>();
  }
  return p;
}

}  // namespace sowban
