#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sowban/types.hpp"

namespace sowban::api {

/// Transport-neutral HTTP exchange. Header names are lower-case.
struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;

  std::string header(const std::string& name) const;
  std::optional<std::string> param(const std::string& name) const;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using ApiHandler = std::function<ApiResponse(const ApiRequest&)>;

ApiResponse json_response(int status, const nlohmann::ordered_json& body);
ApiResponse error_response(int status, std::string_view code, std::string_view message);

/// HTTP status for an error kind.
int status_for(ErrorKind kind);
/// Error kind for a non-2xx response; 5xx and unknown codes map to Transport.
ErrorKind kind_for_status(int status);

enum class Role { Patient, Practitioner };
std::string_view to_string(Role r);
Role role_from_string(std::string_view s);  // throws Error{Schema}

enum class InfoKind { Recommendation, Prescription, Consultation };
std::string_view to_string(InfoKind k);
InfoKind info_kind_from_string(std::string_view s);  // throws Error{Schema}

/// Practitioner-to-patient item. Consultation slots carry `at`.
struct InfoItem {
  std::uint64_t id = 0;
  std::string patient_id;
  InfoKind kind = InfoKind::Recommendation;
  std::string text;
  std::optional<double> at;
  bool operator==(const InfoItem&) const = default;
};

nlohmann::ordered_json to_json(const InfoItem& item);
InfoItem info_from_json(const nlohmann::json& j);  // throws Error{Schema}

enum class Disposition { Accepted, Deduped, Rejected };
std::string_view to_string(Disposition d);

struct PacketResult {
  std::size_t index = 0;
  Disposition status = Disposition::Accepted;
  std::string reason;
  std::optional<double> risk;
  std::optional<std::uint64_t> alert_id;
};

struct EnterAck {
  std::size_t accepted = 0;
  std::size_t deduped = 0;
  std::size_t rejected = 0;
  std::vector<PacketResult> results;
};

nlohmann::ordered_json to_json(const EnterAck& ack);
EnterAck ack_from_json(const nlohmann::json& j);

}  // namespace sowban::api
