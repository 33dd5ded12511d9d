#include "sowban/mhs/auth.hpp"

#include <sodium.h>

#include <chrono>

namespace sowban::mhs {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw Error(ErrorKind::Io, "libsodium initialisation failed");
}

std::string random_token() {
  ensure_sodium();
  unsigned char raw[32];
  randombytes_buf(raw, sizeof raw);
  char hex[2 * sizeof raw + 1];
  sodium_bin2hex(hex, sizeof hex, raw, sizeof raw);
  return hex;
}

}  // namespace

Clock steady_clock_seconds() {
  return [] {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  };
}

std::string hash_password(const std::string& password) {
  ensure_sodium();
  char out[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(out, password.data(), password.size(), crypto_pwhash_OPSLIMIT_MIN,
                        crypto_pwhash_MEMLIMIT_MIN) != 0) {
    throw Error(ErrorKind::Io, "password hashing failed");
  }
  return out;
}

bool verify_password(const std::string& hash, const std::string& password) {
  ensure_sodium();
  if (hash.size() >= crypto_pwhash_STRBYTES) return false;
  return crypto_pwhash_str_verify(hash.c_str(), password.data(), password.size()) == 0;
}

nlohmann::ordered_json to_json(const Credential& c) {
  nlohmann::ordered_json j;
  j["principal"] = c.principal;
  j["role"] = api::to_string(c.role);
  j["password_hash"] = c.password_hash;
  j["patient_id"] = c.patient_id;
  return j;
}

Credential credential_from_json(const nlohmann::json& j) {
  Credential c;
  c.principal = j.at("principal").get<std::string>();
  c.role = api::role_from_string(j.at("role").get<std::string>());
  c.password_hash = j.at("password_hash").get<std::string>();
  c.patient_id = j.value("patient_id", "");
  return c;
}

Authenticator::Authenticator(double token_ttl_s, Clock clock) : ttl_(token_ttl_s), clock_(std::move(clock)) {
  if (!(ttl_ > 0.0)) throw Error(ErrorKind::Range, "token ttl must be > 0");
}

void Authenticator::add(Credential c) {
  if (c.principal.empty()) throw Error(ErrorKind::Schema, "empty principal");
  std::lock_guard lock(mu_);
  if (creds_.count(c.principal)) throw Error(ErrorKind::Conflict, "principal '" + c.principal + "' exists");
  creds_.emplace(c.principal, std::move(c));
}

bool Authenticator::has(const std::string& principal) const {
  std::lock_guard lock(mu_);
  return creds_.count(principal) > 0;
}

std::optional<Credential> Authenticator::find(const std::string& principal) const {
  std::lock_guard lock(mu_);
  auto it = creds_.find(principal);
  if (it == creds_.end()) return std::nullopt;
  return it->second;
}

IssuedToken Authenticator::login(const std::string& principal, const std::string& password) {
  std::optional<Credential> c = find(principal);
  // Hash anyway on unknown principals so both failures cost the same.
  static const std::string dummy = hash_password("sowban-dummy");
  if (!verify_password(c ? c->password_hash : dummy, password) || !c) {
    throw Error(ErrorKind::Auth, "invalid credentials");
  }
  IssuedToken t;
  t.token = random_token();
  t.session = {c->principal, c->role, c->patient_id, clock_() + ttl_};
  t.ttl_s = ttl_;
  std::lock_guard lock(mu_);
  const double now = clock_();
  std::erase_if(tokens_, [&](const auto& kv) { return kv.second.expires_at <= now; });
  tokens_[t.token] = t.session;
  return t;
}

Session Authenticator::authenticate(const std::string& token) const {
  if (token.empty()) throw Error(ErrorKind::Auth, "missing bearer token");
  std::lock_guard lock(mu_);
  auto it = tokens_.find(token);
  if (it == tokens_.end()) throw Error(ErrorKind::Auth, "unknown token");
  if (clock_() >= it->second.expires_at) throw Error(ErrorKind::Auth, "token expired");
  return it->second;
}

void Authenticator::revoke_patient(const std::string& patient_id) {
  std::lock_guard lock(mu_);
  std::erase_if(tokens_, [&](const auto& kv) {
    return kv.second.role == api::Role::Patient && kv.second.patient_id == patient_id;
  });
}

std::vector<Credential> Authenticator::credentials() const {
  std::lock_guard lock(mu_);
  std::vector<Credential> out;
  for (const auto& [k, c] : creds_) out.push_back(c);
  return out;
}

std::string bearer_token(const api::ApiRequest& req) {
  const std::string h = req.header("authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.size() > kPrefix.size() && h.compare(0, kPrefix.size(), kPrefix) == 0) {
    return h.substr(kPrefix.size());
  }
  if (auto q = req.param("token")) return *q;
  return {};
}

}  // namespace sowban::mhs
