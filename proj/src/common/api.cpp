#include "sowban/api.hpp"

#include <cmath>

namespace sowban::api {

std::string ApiRequest::header(const std::string& name) const {
  auto it = headers.find(name);
  return it == headers.end() ? std::string() : it->second;
}

std::optional<std::string> ApiRequest::param(const std::string& name) const {
  auto it = query.find(name);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

ApiResponse json_response(int status, const nlohmann::ordered_json& body) {
  return {status, "application/json", body.dump()};
}

ApiResponse error_response(int status, std::string_view code, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["message"] = message;
  return json_response(status, j);
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Auth:
      return 401;
    case ErrorKind::Forbidden:
      return 403;
    case ErrorKind::NotFound:
      return 404;
    case ErrorKind::Conflict:
      return 409;
    case ErrorKind::Parse:
    case ErrorKind::Schema:
    case ErrorKind::Range:
      return 400;
    case ErrorKind::Capacity:
      return 503;
    default:
      return 500;
  }
}

ErrorKind kind_for_status(int status) {
  switch (status) {
    case 400:
      return ErrorKind::Schema;
    case 401:
      return ErrorKind::Auth;
    case 403:
      return ErrorKind::Forbidden;
    case 404:
      return ErrorKind::NotFound;
    case 409:
      return ErrorKind::Conflict;
    default:
      return ErrorKind::Transport;
  }
}

std::string_view to_string(Role r) { return r == Role::Patient ? "patient" : "practitioner"; }

Role role_from_string(std::string_view s) {
  if (s == "patient") return Role::Patient;
  if (s == "practitioner") return Role::Practitioner;
  throw Error(ErrorKind::Schema, "unknown role '" + std::string(s) + "'");
}

std::string_view to_string(InfoKind k) {
  switch (k) {
    case InfoKind::Recommendation:
      return "recommendation";
    case InfoKind::Prescription:
      return "prescription";
    case InfoKind::Consultation:
      return "consultation";
  }
  return "recommendation";
}

InfoKind info_kind_from_string(std::string_view s) {
  if (s == "recommendation") return InfoKind::Recommendation;
  if (s == "prescription") return InfoKind::Prescription;
  if (s == "consultation") return InfoKind::Consultation;
  throw Error(ErrorKind::Schema, "unknown info kind '" + std::string(s) + "'");
}

nlohmann::ordered_json to_json(const InfoItem& item) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["patient_id"] = item.patient_id;
  j["kind"] = to_string(item.kind);
  j["text"] = item.text;
  j["at"] = item.at ? nlohmann::ordered_json(*item.at) : nlohmann::ordered_json(nullptr);
  return j;
}

InfoItem info_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Schema, "info item must be an object");
  InfoItem it;
  if (auto f = j.find("id"); f != j.end()) {
    if (!f->is_number_unsigned()) throw Error(ErrorKind::Schema, "'id' must be an unsigned integer");
    it.id = f->get<std::uint64_t>();
  }
  auto pid = j.find("patient_id");
  if (pid == j.end() || !pid->is_string() || pid->get<std::string>().empty()) {
    throw Error(ErrorKind::Schema, "missing field 'patient_id'");
  }
  it.patient_id = pid->get<std::string>();
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) throw Error(ErrorKind::Schema, "missing field 'kind'");
  it.kind = info_kind_from_string(kind->get<std::string>());
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) throw Error(ErrorKind::Schema, "missing field 'text'");
  it.text = text->get<std::string>();
  if (auto at = j.find("at"); at != j.end() && !at->is_null()) {
    if (!at->is_number() || !std::isfinite(at->get<double>())) {
      throw Error(ErrorKind::Schema, "'at' must be a number");
    }
    it.at = at->get<double>();
  }
  return it;
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Accepted:
      return "accepted";
    case Disposition::Deduped:
      return "deduped";
    case Disposition::Rejected:
      return "rejected";
  }
  return "rejected";
}

nlohmann::ordered_json to_json(const EnterAck& ack) {
  nlohmann::ordered_json j;
  j["accepted"] = ack.accepted;
  j["deduped"] = ack.deduped;
  j["rejected"] = ack.rejected;
  j["results"] = nlohmann::ordered_json::array();
  for (const auto& r : ack.results) {
    nlohmann::ordered_json e;
    e["index"] = r.index;
    e["status"] = to_string(r.status);
    if (!r.reason.empty()) e["reason"] = r.reason;
    if (r.risk) e["risk"] = *r.risk;
    if (r.alert_id) e["alert_id"] = *r.alert_id;
    j["results"].push_back(std::move(e));
  }
  return j;
}

EnterAck ack_from_json(const nlohmann::json& j) {
  try {
    EnterAck ack;
    ack.accepted = j.at("accepted").get<std::size_t>();
    ack.deduped = j.at("deduped").get<std::size_t>();
    ack.rejected = j.at("rejected").get<std::size_t>();
    for (const auto& e : j.at("results")) {
      PacketResult r;
      r.index = e.at("index").get<std::size_t>();
      const auto s = e.at("status").get<std::string>();
      r.status = s == "accepted" ? Disposition::Accepted
                 : s == "deduped" ? Disposition::Deduped
                                  : Disposition::Rejected;
      if (e.contains("reason")) r.reason = e["reason"].get<std::string>();
      if (e.contains("risk")) r.risk = e["risk"].get<double>();
      if (e.contains("alert_id")) r.alert_id = e["alert_id"].get<std::uint64_t>();
      ack.results.push_back(std::move(r));
    }
    return ack;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("enterData ack: ") + e.what());
  }
}

}  // namespace sowban::api
