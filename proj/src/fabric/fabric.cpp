#include "sowban/fabric/fabric.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

namespace sowban::fabric {

namespace {

// Encoded frames carry t_tx, whose digit count depends on when the slot falls.
constexpr std::size_t kTimestampSlack = 32;

double seconds(Micros us) { return static_cast<double>(us) * 1e-6; }

}  // namespace

void TdmaConfig::validate() const {
  if (superframe_slots < 2) throw Error(ErrorKind::Range, "superframe needs a beacon and a data slot");
  if (slot_us <= 0) throw Error(ErrorKind::Range, "slot duration must be > 0");
  if (!(bitrate_bps > 0.0)) throw Error(ErrorKind::Range, "bitrate must be > 0");
  if (beacon_listen_us < 0 || beacon_listen_us > slot_us) {
    throw Error(ErrorKind::Range, "beacon listen time must lie within one slot");
  }
  if (queue_capacity == 0) throw Error(ErrorKind::Range, "queue capacity must be > 0");
}

std::size_t TdmaConfig::slot_capacity_bytes() const {
  return static_cast<std::size_t>(bitrate_bps * seconds(slot_us) / 8.0);
}

TdmaSchedule::TdmaSchedule(int superframe_slots)
    : slots_(superframe_slots), owners_(static_cast<std::size_t>(std::max(superframe_slots, 0))) {}

std::optional<int> TdmaSchedule::lowest_free_slot() const {
  for (int s = 1; s < slots_; ++s) {
    if (owners_[static_cast<std::size_t>(s)].empty()) return s;
  }
  return std::nullopt;
}

void TdmaSchedule::assign(int slot, std::uint32_t node_id) {
  if (slot <= 0 || slot >= slots_) {
    throw Error(ErrorKind::Range, "slot " + std::to_string(slot) + " is not a data slot");
  }
  if (!owners_[static_cast<std::size_t>(slot)].empty()) {
    throw Error(ErrorKind::Conflict, "slot " + std::to_string(slot) + " already assigned");
  }
  owners_[static_cast<std::size_t>(slot)].push_back(node_id);
}

void TdmaSchedule::assign_unchecked(int slot, std::uint32_t node_id) {
  if (slot < 0 || slot >= slots_) {
    throw Error(ErrorKind::Range, "slot " + std::to_string(slot) + " outside the superframe");
  }
  owners_[static_cast<std::size_t>(slot)].push_back(node_id);
}

const std::vector<std::uint32_t>& TdmaSchedule::owners(int slot) const {
  return owners_.at(static_cast<std::size_t>(slot));
}

int TdmaSchedule::slot_count(std::uint32_t node_id) const {
  int n = 0;
  for (int s = 1; s < slots_; ++s) {
    const auto& o = owners_[static_cast<std::size_t>(s)];
    n += static_cast<int>(std::count(o.begin(), o.end(), node_id));
  }
  return n;
}

bool TdmaSchedule::valid() const {
  if (!owners_.empty() && !owners_[0].empty()) return false;
  for (const auto& o : owners_) {
    if (o.size() > 1) return false;
  }
  return true;
}

Fabric::Fabric(TdmaConfig config, PowerCurrents currents)
    : config_(config), currents_(currents), schedule_((config.validate(), config.superframe_slots)) {}

int Fabric::register_node(NodeDescriptor desc) {
  if (nodes_.count(desc.node_id)) {
    throw Error(ErrorKind::Conflict, "node " + std::to_string(desc.node_id) + " already registered");
  }
  const auto slot = schedule_.lowest_free_slot();
  if (!slot) {
    throw Error(ErrorKind::Capacity, "no free TDMA slot for node " + std::to_string(desc.node_id));
  }
  schedule_.assign(*slot, desc.node_id);
  desc.assigned_slot = *slot;
  NodeState st;
  st.desc = std::move(desc);
  nodes_.emplace(st.desc.node_id, std::move(st));
  return *slot;
}

void Fabric::inject_assignment(std::uint32_t node_id, int slot) {
  (void)state(node_id);
  schedule_.assign_unchecked(slot, node_id);
}

Fabric::NodeState& Fabric::state(std::uint32_t node_id) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw Error(ErrorKind::NotFound, "unknown node " + std::to_string(node_id));
  return it->second;
}

const Fabric::NodeState& Fabric::state(std::uint32_t node_id) const {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw Error(ErrorKind::NotFound, "unknown node " + std::to_string(node_id));
  return it->second;
}

const NodeDescriptor& Fabric::node(std::uint32_t node_id) const { return state(node_id).desc; }

std::vector<std::uint32_t> Fabric::nodes_for_patient(const std::string& patient_id) const {
  std::vector<std::uint32_t> out;
  for (const auto& [id, st] : nodes_) {
    if (st.desc.patient_id == patient_id) out.push_back(id);
  }
  return out;
}

const PowerEntry& Fabric::power(std::uint32_t node_id) const { return state(node_id).power; }

std::size_t Fabric::queued(std::uint32_t node_id) const { return state(node_id).queue.size(); }

Frame Fabric::enqueue(std::uint32_t node_id, Fragment fragment) {
  NodeState& st = state(node_id);
  Frame f;
  f.src = node_id;
  f.seq = st.next_seq;
  f.t_tx = seconds(clock_us_);
  f.payload = std::move(fragment);
  const std::size_t bytes = encode_frame(f).size() + 1;
  if (bytes + kTimestampSlack > config_.slot_capacity_bytes()) {
    throw Error(ErrorKind::Capacity, "frame of " + std::to_string(bytes) + " bytes exceeds slot capacity");
  }
  ++st.next_seq;
  if (st.queue.size() >= config_.queue_capacity) {
    st.queue.pop_front();
    ++metrics_.overflow_drops;
  }
  st.queue.push_back({f, clock_us_});
  return f;
}

std::vector<Delivery> Fabric::tick(Micros now_us) {
  std::vector<Delivery> out;
  while ((next_slot_index_ + 1) * config_.slot_us <= now_us) {
    const int slot = static_cast<int>(next_slot_index_ % config_.superframe_slots);
    process_slot(slot, next_slot_index_ * config_.slot_us, out);
    ++next_slot_index_;
  }
  clock_us_ = std::max(clock_us_, now_us);
  return out;
}

void Fabric::process_slot(int slot, Micros start, std::vector<Delivery>& out) {
  const double slot_s = seconds(config_.slot_us);
  for (auto& [id, st] : nodes_) {
    st.power.elapsed_us += config_.slot_us;
    st.power.sensor_mAs += currents_.sensor_mA * slot_s;
    st.power.controller_mAs += currents_.controller_mA * slot_s;
  }

  if (slot == 0) {
    ++metrics_.superframes;
    const double listen_s = seconds(config_.beacon_listen_us);
    for (auto& [id, st] : nodes_) {
      st.power.radio_on_us += config_.beacon_listen_us;
      st.power.radio_mAs += currents_.radio_mA * listen_s;
    }
    return;
  }

  std::vector<NodeState*> transmitters;
  for (std::uint32_t id : schedule_.owners(slot)) {
    NodeState& st = state(id);
    if (!st.queue.empty() && st.queue.front().queued_us <= start) transmitters.push_back(&st);
  }
  if (transmitters.empty()) return;

  const double t_tx = seconds(start);
  const std::size_t capacity = config_.slot_capacity_bytes();
  const bool collided = transmitters.size() > 1;
  if (collided) ++metrics_.collisions;

  for (NodeState* st : transmitters) {
    st->power.radio_on_us += config_.slot_us;
    st->power.radio_mAs += currents_.radio_mA * slot_s;

    std::size_t used = 0;
    while (!st->queue.empty() && st->queue.front().queued_us <= start) {
      Frame f = st->queue.front().frame;
      f.t_tx = t_tx;
      const std::size_t bytes = encode_frame(f).size() + 1;
      if (used > 0 && used + bytes > capacity) break;
      used += bytes;
      st->queue.pop_front();
      if (collided) {
        ++metrics_.collision_drops;
        continue;
      }
      ++st->sent;
      ++metrics_.delivered;
      out.push_back({std::move(f), start + config_.slot_us, slot});
    }
  }
}

void Fabric::write_power_csv(std::ostream& out) const {
  out << "node_id,kind,patient_id,slots,sent,sensor_mAs,controller_mAs,radio_mAs,radio_on_s,duty_cycle\n";
  for (const auto& [id, st] : nodes_) {
    const auto& p = st.power;
    out << id << ',' << to_string(st.desc.kind) << ',' << st.desc.patient_id << ','
        << schedule_.slot_count(id) << ',' << st.sent << ',' << format_double(p.sensor_mAs) << ','
        << format_double(p.controller_mAs) << ',' << format_double(p.radio_mAs) << ',' << format_double(seconds(p.radio_on_us))
        << ',' << format_double(p.duty_cycle()) << '\n';
  }
}

void Fabric::write_metrics_csv(std::ostream& out) const {
  double charge = 0.0;
  for (const auto& [id, st] : nodes_) charge += st.power.total_mAs();
  out << "metric,value\n"
      << "superframes," << metrics_.superframes << '\n'
      << "delivered," << metrics_.delivered << '\n'
      << "collisions," << metrics_.collisions << '\n'
      << "collision_drops," << metrics_.collision_drops << '\n'
      << "overflow_drops," << metrics_.overflow_drops << '\n'
      << "charge_mAs," << format_double(charge) << '\n';
}

}  // namespace sowban::fabric
