#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sowban/fabric/frame.hpp"

namespace sowban::fabric {

using Micros = std::int64_t;

struct TdmaConfig {
  int superframe_slots = 8;         // slot 0 carries the beacon
  Micros slot_us = 50'000;
  double bitrate_bps = 250'000.0;   // bounds the bytes one slot can carry
  Micros beacon_listen_us = 2'000;  // radio-on time per node to catch each beacon
  std::size_t queue_capacity = 64;  // per node; overflow drops the oldest frame

  void validate() const;
  Micros superframe_us() const { return slot_us * superframe_slots; }
  std::size_t slot_capacity_bytes() const;
};

/// Supply currents per node component, mA.
struct PowerCurrents {
  double sensor_mA = 0.023;
  double controller_mA = 40.0;
  double radio_mA = 38.0;
};

struct NodeDescriptor {
  std::uint32_t node_id = 0;
  NodeKind kind = NodeKind::Accel;
  std::string patient_id;
  nlohmann::json config = nlohmann::json::object();
  int assigned_slot = -1;
};

/// Slot ownership. Slot 0 is the beacon; a valid schedule has at most one
/// owner per data slot. assign_unchecked exists to build broken schedules for
/// fault injection.
class TdmaSchedule {
 public:
  explicit TdmaSchedule(int superframe_slots);

  int superframe_slots() const { return slots_; }
  std::optional<int> lowest_free_slot() const;
  void assign(int slot, std::uint32_t node_id);  // throws Conflict / Range
  void assign_unchecked(int slot, std::uint32_t node_id);
  const std::vector<std::uint32_t>& owners(int slot) const;
  int slot_count(std::uint32_t node_id) const;
  bool valid() const;

 private:
  int slots_;
  std::vector<std::vector<std::uint32_t>> owners_;
};

struct PowerEntry {
  double sensor_mAs = 0.0;
  double controller_mAs = 0.0;
  double radio_mAs = 0.0;
  Micros radio_on_us = 0;
  Micros elapsed_us = 0;

  double total_mAs() const { return sensor_mAs + controller_mAs + radio_mAs; }
  double duty_cycle() const {
    return elapsed_us == 0 ? 0.0 : static_cast<double>(radio_on_us) / static_cast<double>(elapsed_us);
  }
};

struct FabricMetrics {
  std::uint64_t superframes = 0;
  std::uint64_t delivered = 0;
  std::uint64_t collisions = 0;       // data slots with more than one transmitter
  std::uint64_t collision_drops = 0;  // frames lost to collisions
  std::uint64_t overflow_drops = 0;   // frames evicted from full queues
};

struct Delivery {
  Frame frame;
  Micros t_rx_us = 0;
  int slot = 0;
};

/// Single-threaded discrete-event TDMA fabric. The virtual clock only moves
/// forward through tick(); slots are processed once their end has passed.
class Fabric {
 public:
  explicit Fabric(TdmaConfig config = {}, PowerCurrents currents = {});

  /// Assigns the lowest free data slot. Throws Error{Capacity} when full and
  /// Error{Conflict} for a duplicate node id.
  int register_node(NodeDescriptor desc);

  /// Adds `node_id` as an owner of `slot` without validation.
  void inject_assignment(std::uint32_t node_id, int slot);

  const NodeDescriptor& node(std::uint32_t node_id) const;
  std::vector<std::uint32_t> nodes_for_patient(const std::string& patient_id) const;
  const TdmaSchedule& schedule() const { return schedule_; }

  /// Queues a frame under the node's next seq. It becomes eligible from the
  /// first of the node's slots starting at or after the current clock; t_tx is
  /// set to that slot's start. Throws Error{Capacity} if the encoded frame
  /// cannot fit one slot.
  Frame enqueue(std::uint32_t node_id, Fragment fragment);

  std::vector<Delivery> tick(Micros now_us);

  Micros now_us() const { return clock_us_; }
  const FabricMetrics& metrics() const { return metrics_; }
  const PowerEntry& power(std::uint32_t node_id) const;
  std::size_t queued(std::uint32_t node_id) const;

  /// One row per node: node_id,kind,patient_id,slots,sent,sensor_mAs,controller_mAs,radio_mAs,radio_on_s,duty_cycle
  void write_power_csv(std::ostream& out) const;
  /// metric,value rows: superframes, delivered, collisions, collision_drops, overflow_drops, charge_mAs
  void write_metrics_csv(std::ostream& out) const;

 private:
  struct Queued {
    Frame frame;
    Micros queued_us;
  };
  struct NodeState {
    NodeDescriptor desc;
    std::uint64_t next_seq = 0;
    std::uint64_t sent = 0;
    std::deque<Queued> queue;
    PowerEntry power;
  };

  NodeState& state(std::uint32_t node_id);
  const NodeState& state(std::uint32_t node_id) const;
  void process_slot(int slot, Micros start, std::vector<Delivery>& out);

  TdmaConfig config_;
  PowerCurrents currents_;
  TdmaSchedule schedule_;
  std::map<std::uint32_t, NodeState> nodes_;
  Micros clock_us_ = 0;
  std::int64_t next_slot_index_ = 0;  // global slot counter since t = 0
  FabricMetrics metrics_;
};

}  // namespace sowban::fabric
