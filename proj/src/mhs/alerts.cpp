#include "sowban/mhs/alerts.hpp"

#include <algorithm>

namespace sowban::mhs {

nlohmann::ordered_json to_json(const AlertEvent& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["patient_id"] = e.patient_id;
  j["t"] = e.t;
  j["severity"] = to_string(e.severity);
  j["causes"] = e.causes;
  j["risk"] = e.risk;
  if (e.location) {
    j["location"] = {{"lat", e.location->lat}, {"lon", e.location->lon}};
  } else {
    j["location"] = nullptr;
  }
  j["delivered_to"] = {{"practitioner", e.to_practitioner}, {"patient", e.to_patient}};
  return j;
}

AlertEvent alert_from_json(const nlohmann::json& j) {
  AlertEvent e;
  e.id = j.at("id").get<std::uint64_t>();
  e.patient_id = j.at("patient_id").get<std::string>();
  e.t = j.at("t").get<double>();
  e.severity = j.at("severity").get<std::string>() == "critical" ? Severity::Critical : Severity::Warn;
  e.causes = j.at("causes").get<std::vector<std::string>>();
  e.risk = j.at("risk").get<double>();
  if (j.contains("location") && !j["location"].is_null()) {
    e.location = LatLon{j["location"].at("lat").get<double>(), j["location"].at("lon").get<double>()};
  }
  if (j.contains("delivered_to")) {
    e.to_practitioner = j["delivered_to"].value("practitioner", true);
    e.to_patient = j["delivered_to"].value("patient", true);
  }
  return e;
}

std::string sse_frame(const AlertEvent& e) {
  return "id: " + std::to_string(e.id) + "\nevent: alert\ndata: " + to_json(e).dump() + "\n\n";
}

bool AlertFilter::admits(const AlertEvent& e) const {
  if (role == api::Role::Patient && !e.to_patient) return false;
  if (role == api::Role::Practitioner && !e.to_practitioner) return false;
  return !patient_id || *patient_id == e.patient_id;
}

void AlertHub::publish(AlertEvent e) {
  std::lock_guard lock(mu_);
  if (e.id <= last_id_) throw Error(ErrorKind::Conflict, "alert ids must increase");
  last_id_ = e.id;
  events_.push_back(std::move(e));
  while (events_.size() > retention_) events_.pop_front();
  cv_.notify_all();
}

AlertPage AlertHub::since_locked(std::optional<std::uint64_t> after, const AlertFilter& filter) const {
  AlertPage page;
  page.head = last_id_;
  std::uint64_t from = 0;
  if (after) {
    const bool retained_or_edge =
        *after <= last_id_ && (events_.empty() || *after + 1 >= events_.front().id || *after == 0);
    if (retained_or_edge) {
      from = *after;
    } else {
      page.replayed = true;
    }
  }
  for (const auto& e : events_) {
    if (e.id > from && filter.admits(e)) page.events.push_back(e);
  }
  return page;
}

AlertPage AlertHub::since(std::optional<std::uint64_t> after, const AlertFilter& filter) const {
  std::lock_guard lock(mu_);
  return since_locked(after, filter);
}

AlertPage AlertHub::wait(std::uint64_t after, const AlertFilter& filter,
                         std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  AlertPage page;
  cv_.wait_for(lock, timeout, [&] {
    if (closed_) return true;
    page = since_locked(after, filter);
    return !page.events.empty();
  });
  return page;
}

void AlertHub::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool AlertHub::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::uint64_t AlertHub::last_id() const {
  std::lock_guard lock(mu_);
  return last_id_;
}

std::vector<AlertEvent> AlertHub::all() const {
  std::lock_guard lock(mu_);
  return {events_.begin(), events_.end()};
}

void AlertHub::restore(std::vector<AlertEvent> events, std::uint64_t last_id) {
  std::lock_guard lock(mu_);
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  events_.assign(events.begin(), events.end());
  while (events_.size() > retention_) events_.pop_front();
  last_id_ = last_id;
}

}  // namespace sowban::mhs
