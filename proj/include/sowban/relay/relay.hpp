#pragma once

#include <functional>
#include <optional>
#include <string>

#include "sowban/fabric/frame.hpp"
#include "sowban/types.hpp"

namespace sowban::relay {

/// Change thresholds for the per-field comparison. A field counts as changed
/// when its difference reaches the threshold.
struct DeltaConfig {
  double spo2_pts = 1.0;
  double hr_bpm = 1.0;
  double location_m = 10.0;
  bool exact = false;         // any difference counts, thresholds ignored
  bool whole_record = false;  // also compare quality flags
  bool fall_bypass = true;    // ID-4 packets are always sent

  static DeltaConfig exact_mode();
};

struct DeltaState {
  std::optional<VitalsPacket> bs_data2;  // last packet sent
};

struct SendDecision {
  bool send = false;
  DeltaState state;
};

/// True when `a` and `b` differ in a monitored field per `cfg`. Timestamps
/// and patient ids are not compared.
bool differs(const VitalsPacket& a, const VitalsPacket& b, const DeltaConfig& cfg);

/// First packet is always sent; afterwards a packet is sent iff it differs
/// from the last sent one. bs_data2 only moves on send.
SendDecision should_send(const VitalsPacket& current, const DeltaState& state,
                         const DeltaConfig& cfg = {});

using LocationSource = std::function<LatLon(double t)>;

struct RelayStats {
  std::uint64_t fragments = 0;
  std::uint64_t foreign_fragments = 0;  // other patients' fragments, ignored
  std::uint64_t epochs = 0;
  std::uint64_t incomplete = 0;  // epochs before both node kinds had reported
  std::uint64_t sent = 0;
  std::uint64_t suppressed = 0;
};

/// Per-patient aggregator. Fragments update the latest activity and oximetry
/// values; each epoch assembles one packet from them and applies the delta
/// rule.
class Relay {
 public:
  Relay(std::string patient_id, DeltaConfig cfg, LocationSource location);

  void on_fragment(const fabric::Fragment& f);

  /// Builds the packet for epoch time `t`. Returns it when it must be sent.
  std::optional<VitalsPacket> epoch(double t);

  /// Latest assembled packet, sent or not.
  const std::optional<VitalsPacket>& last_assembled() const { return last_; }
  const DeltaState& delta() const { return delta_; }
  const RelayStats& stats() const { return stats_; }
  const std::string& patient_id() const { return patient_id_; }

 private:
  std::string patient_id_;
  DeltaConfig cfg_;
  LocationSource location_;
  std::optional<StateId> activity_;
  std::optional<fabric::OxiFragment> oxi_;
  std::optional<VitalsPacket> last_;
  DeltaState delta_;
  RelayStats stats_;
};

}  // namespace sowban::relay
