#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "sowban/api.hpp"

namespace sowban::mhs {

/// Seconds on a monotonic clock; injectable for expiry tests.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

/// Argon2id hash string (salt and parameters embedded).
std::string hash_password(const std::string& password);
bool verify_password(const std::string& hash, const std::string& password);

struct Credential {
  std::string principal;
  api::Role role = api::Role::Patient;
  std::string password_hash;
  std::string patient_id;  // patients only
};

nlohmann::ordered_json to_json(const Credential& c);
Credential credential_from_json(const nlohmann::json& j);

struct Session {
  std::string principal;
  api::Role role = api::Role::Patient;
  std::string patient_id;
  double expires_at = 0.0;
};

struct IssuedToken {
  std::string token;
  Session session;
  double ttl_s = 0.0;
};

/// Credentials plus bearer tokens. Tokens live only in memory.
class Authenticator {
 public:
  explicit Authenticator(double token_ttl_s = 3600.0, Clock clock = steady_clock_seconds());

  /// Throws Error{Conflict} if the principal exists.
  void add(Credential c);
  bool has(const std::string& principal) const;
  std::optional<Credential> find(const std::string& principal) const;

  /// Throws Error{Auth} on unknown principal or wrong password.
  IssuedToken login(const std::string& principal, const std::string& password);
  /// Throws Error{Auth} for unknown or expired tokens.
  Session authenticate(const std::string& token) const;
  void revoke_patient(const std::string& patient_id);

  std::vector<Credential> credentials() const;

 private:
  double ttl_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, Credential> creds_;
  std::map<std::string, Session> tokens_;
};

/// Extracts the token from "Authorization: Bearer ..." or, for browsers'
/// EventSource, the `token` query parameter.
std::string bearer_token(const api::ApiRequest& req);

}  // namespace sowban::mhs
