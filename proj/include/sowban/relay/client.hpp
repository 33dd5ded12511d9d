#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sowban/api.hpp"

namespace sowban::relay {

/// ApiHandler backed by HTTP to host:port. Connection failures come back as
/// status 0 responses so callers treat them like any other transient failure.
api::ApiHandler http_transport(std::string host, int port,
                               std::chrono::milliseconds timeout = std::chrono::seconds(5));

struct LoginResult {
  std::string token;
  api::Role role = api::Role::Patient;
  double expires_in_s = 0.0;
};

struct InfoPage {
  std::vector<api::InfoItem> items;
  std::uint64_t cursor = 0;
};

struct PatientSpec {
  std::string name;
  std::string mrn;
  std::string password;  // optional patient login; principal is the patient id
};

/// Typed client for the MHS API. Non-2xx responses throw Error with the kind
/// from api::kind_for_status (5xx and transport failures -> Transport).
class MhsClient {
 public:
  explicit MhsClient(api::ApiHandler transport) : transport_(std::move(transport)) {}

  LoginResult login(const std::string& principal, const std::string& password);
  void set_token(std::string token) { token_ = std::move(token); }
  const std::string& token() const { return token_; }

  std::string add_patient(const PatientSpec& spec, const std::string& idempotency_key = "");
  nlohmann::json view_patient(const std::string& patient_id);
  void delete_patient(const std::string& patient_id);
  api::EnterAck enter_data(const std::vector<VitalsPacket>& packets);
  nlohmann::json collect_data(const std::string& patient_id, std::optional<double> from = {},
                              std::optional<double> to = {}, const std::string& cursor = "",
                              std::size_t limit = 0);
  std::uint64_t upload_info(const api::InfoItem& item);
  InfoPage download_info(const std::string& patient_id, std::uint64_t since);
  nlohmann::json alerts_snapshot(std::optional<std::string> patient_id = {},
                                 std::optional<std::uint64_t> after = {});

 private:
  nlohmann::json call(api::ApiRequest req);

  api::ApiHandler transport_;
  std::string token_;
};

/// download_info with a persistent cursor. The cursor only advances after a
/// successful call.
class InfoSync {
 public:
  explicit InfoSync(std::string patient_id, std::uint64_t cursor = 0)
      : patient_id_(std::move(patient_id)), cursor_(cursor) {}

  std::vector<api::InfoItem> sync(MhsClient& client);
  std::uint64_t cursor() const { return cursor_; }

 private:
  std::string patient_id_;
  std::uint64_t cursor_;
};

}  // namespace sowban::relay
