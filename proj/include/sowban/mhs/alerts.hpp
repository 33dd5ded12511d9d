#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sowban/api.hpp"
#include "sowban/mhs/risk.hpp"

namespace sowban::mhs {

struct AlertEvent {
  std::uint64_t id = 0;
  std::string patient_id;
  double t = 0.0;
  Severity severity = Severity::Warn;
  std::vector<std::string> causes;
  double risk = 0.0;
  std::optional<LatLon> location;  // always present on critical alerts
  bool to_practitioner = true;
  bool to_patient = true;
};

nlohmann::ordered_json to_json(const AlertEvent& e);
AlertEvent alert_from_json(const nlohmann::json& j);
/// Server-sent event block: id, event name "alert", JSON data.
std::string sse_frame(const AlertEvent& e);

/// Who is reading the feed. Practitioners see every patient; patients only
/// their own.
struct AlertFilter {
  api::Role role = api::Role::Practitioner;
  std::optional<std::string> patient_id;

  bool admits(const AlertEvent& e) const;
};

struct AlertPage {
  std::vector<AlertEvent> events;
  bool replayed = false;  // resume id was unknown; events restart at the retention window
  std::uint64_t head = 0;  // hub's last id when the page was taken
};

/// Retained, ordered alert feed with blocking waits for live subscribers.
class AlertHub {
 public:
  explicit AlertHub(std::size_t retention = 10000) : retention_(retention) {}

  void publish(AlertEvent e);
  /// Events after `after`; an id that is not retained (or is from the
  /// future) replays the whole retention window.
  AlertPage since(std::optional<std::uint64_t> after, const AlertFilter& filter) const;
  /// Blocks until an admitted event newer than `after` exists, the timeout
  /// passes or the hub closes.
  AlertPage wait(std::uint64_t after, const AlertFilter& filter, std::chrono::milliseconds timeout) const;
  void close();
  bool closed() const;

  std::uint64_t last_id() const;
  std::vector<AlertEvent> all() const;
  void restore(std::vector<AlertEvent> events, std::uint64_t last_id);

 private:
  AlertPage since_locked(std::optional<std::uint64_t> after, const AlertFilter& filter) const;

  std::size_t retention_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::deque<AlertEvent> events_;
  std::uint64_t last_id_ = 0;
  bool closed_ = false;
};

}  // namespace sowban::mhs
