#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sowban {

enum class ErrorKind {
  Range,
  Signal,
  Singularity,
  MissingSamples,
  Capacity,
  Conflict,
  Parse,
  Schema,
  Bind,
  Auth,
  Forbidden,
  NotFound,
  Transport,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Activity state reported by the accelerometer node.
enum class StateId : int { Resting = 1, Walking = 2, Running = 3, Falling = 4 };

inline int to_int(StateId s) { return static_cast<int>(s); }
StateId state_from_int(int id);  // throws Error{Range} outside 1..4
std::string_view state_label(StateId s);

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

/// Great-circle distance in metres (haversine, mean Earth radius).
double distance_m(LatLon a, LatLon b);

/// Quality flags carried by oximeter readings and the packets built from them.
namespace flags {
inline constexpr unsigned kClampedLow = 1u << 0;
inline constexpr unsigned kClampedHigh = 1u << 1;
inline constexpr unsigned kTooFewPeaks = 1u << 2;
inline constexpr unsigned kHrClampedLow = 1u << 3;
inline constexpr unsigned kHrClampedHigh = 1u << 4;
}  // namespace flags

/// Unit relayed node -> CIN -> MHS.
struct VitalsPacket {
  std::string patient_id;
  double t = 0.0;  // seconds, virtual clock
  StateId activity = StateId::Resting;
  double spo2 = 0.0;  // percent
  double hr = 0.0;    // bpm; 0 when no valid estimate exists yet
  LatLon location;
  unsigned flags = 0;

  bool operator==(const VitalsPacket&) const = default;
};

/// Dedup key resolution: packet times are compared at microsecond granularity.
inline std::int64_t time_key_us(double t) {
  return static_cast<std::int64_t>(t * 1e6 + (t >= 0 ? 0.5 : -0.5));
}

nlohmann::ordered_json to_json(const VitalsPacket& p);
VitalsPacket packet_from_json(const nlohmann::json& j);  // throws Error{Schema}

}  // namespace sowban
