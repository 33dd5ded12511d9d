#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "sowban/types.hpp"

namespace sowban::fabric {

inline constexpr int kWireVersion = 1;

enum class NodeKind { Accel, Oximeter };
std::string_view to_string(NodeKind k);

struct ActivityFragment {
  StateId state = StateId::Resting;
  bool operator==(const ActivityFragment&) const = default;
};

struct OxiFragment {
  double spo2 = 0.0;  // percent
  std::optional<double> hr;
  unsigned flags = 0;
  bool operator==(const OxiFragment&) const = default;
};

/// Part of a VitalsPacket produced by one node.
struct Fragment {
  std::string patient_id;
  double t = 0.0;  // measurement time
  std::variant<ActivityFragment, OxiFragment> body;
  bool operator==(const Fragment&) const = default;
};

struct Frame {
  std::uint32_t src = 0;
  std::uint64_t seq = 0;
  double t_tx = 0.0;
  Fragment payload;
  bool operator==(const Frame&) const = default;
};

/// One JSON object per line, no trailing newline. See docs/WIRE_FORMAT.md.
std::string encode_frame(const Frame& frame);

/// Throws Error{Parse} on malformed input or an unsupported version.
Frame decode_frame(std::string_view line);

}  // namespace sowban::fabric
