#include "sowban/fabric/frame.hpp"

#include <cmath>

namespace sowban::fabric {

std::string_view to_string(NodeKind k) {
  return k == NodeKind::Accel ? "accel" : "oximeter";
}

std::string encode_frame(const Frame& f) {
  nlohmann::ordered_json j;
  j["v"] = kWireVersion;
  j["src"] = f.src;
  j["seq"] = f.seq;
  j["t_tx"] = f.t_tx;
  j["pid"] = f.payload.patient_id;
  j["t"] = f.payload.t;
  if (const auto* a = std::get_if<ActivityFragment>(&f.payload.body)) {
    j["kind"] = "activity";
    j["state"] = to_int(a->state);
  } else {
    const auto& o = std::get<OxiFragment>(f.payload.body);
    j["kind"] = "oxi";
    j["spo2"] = o.spo2;
    j["hr"] = o.hr ? nlohmann::ordered_json(*o.hr) : nlohmann::ordered_json(nullptr);
    j["flags"] = o.flags;
  }
  return j.dump();
}

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::Parse, "frame: " + msg); }

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing '") + key + "'");
  return *it;
}

double number(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) bad(std::string("'") + key + "' is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(std::string("'") + key + "' is not finite");
  return d;
}

std::uint64_t unsigned_int(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned()) bad(std::string("'") + key + "' is not an unsigned integer");
  return v.get<std::uint64_t>();
}

}  // namespace

Frame decode_frame(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad("not a JSON object");
  if (field(j, "v") != kWireVersion) bad("unsupported version");

  Frame f;
  const auto src = unsigned_int(j, "src");
  if (src > UINT32_MAX) bad("'src' out of range");
  f.src = static_cast<std::uint32_t>(src);
  f.seq = unsigned_int(j, "seq");
  f.t_tx = number(j, "t_tx");
  const auto& pid = field(j, "pid");
  if (!pid.is_string()) bad("'pid' is not a string");
  f.payload.patient_id = pid.get<std::string>();
  f.payload.t = number(j, "t");

  const auto& kind = field(j, "kind");
  if (kind == "activity") {
    const auto state = unsigned_int(j, "state");
    if (state < 1 || state > 4) bad("'state' out of range");
    f.payload.body = ActivityFragment{static_cast<StateId>(state)};
  } else if (kind == "oxi") {
    OxiFragment o;
    o.spo2 = number(j, "spo2");
    const auto& hr = field(j, "hr");
    if (hr.is_null()) {
      o.hr.reset();
    } else {
      o.hr = number(j, "hr");
    }
    const auto flags = unsigned_int(j, "flags");
    if (flags > UINT32_MAX) bad("'flags' out of range");
    o.flags = static_cast<unsigned>(flags);
    f.payload.body = o;
  } else {
    bad("unknown kind");
  }
  return f;
}

}  // namespace sowban::fabric
