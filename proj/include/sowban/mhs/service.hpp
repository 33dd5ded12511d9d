#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sowban/api.hpp"
#include "sowban/mhs/alerts.hpp"
#include "sowban/mhs/auth.hpp"
#include "sowban/mhs/risk.hpp"
#include "sowban/mhs/store.hpp"

namespace sowban::mhs {

struct ServiceConfig {
  std::filesystem::path data_dir;  // empty: in-memory only
  bool fsync = true;
  double token_ttl_s = 3600.0;
  Clock clock = steady_clock_seconds();
  RiskModel risk;
  std::size_t snapshot_every = 1000;  // log records between snapshots
  std::size_t alert_retention = 10000;
  std::size_t page_limit = 500;
  std::size_t max_page_limit = 5000;
};

struct StoredPacket {
  VitalsPacket packet;
  double risk = 0.0;
  std::optional<std::uint64_t> alert_id;
};

struct PatientRecord {
  std::string patient_id;
  std::string name;
  std::string mrn;
  bool deleted = false;
  std::vector<StoredPacket> history;  // time-ordered
  std::set<std::int64_t> keys;        // time_key_us of history entries
  std::vector<api::InfoItem> info;    // upload order
};

struct ServiceStats {
  std::size_t patients = 0;
  std::size_t packets = 0;
  std::size_t alerts = 0;
  std::uint64_t log_seq = 0;
  std::uint64_t torn_bytes = 0;  // discarded from the log tail at startup
};

/// The MHS: patient records, ingest with risk scoring, alerts and info
/// items behind token auth. Every mutation is appended to the durable log
/// before it is applied or acknowledged.
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Creates a practitioner login unless the principal already exists.
  void ensure_practitioner(const std::string& principal, const std::string& password);

  api::ApiResponse handle(const api::ApiRequest& req);

  /// Throws Error{Auth}.
  Session authenticate(const api::ApiRequest& req) const;
  /// Feed filter for a session; throws Error{Forbidden} when a patient asks
  /// for another patient's alerts.
  AlertFilter alert_filter(const Session& s, const std::optional<std::string>& patient_id) const;
  AlertHub& alerts() { return hub_; }

  void snapshot();
  ServiceStats stats() const;
  std::optional<PatientRecord> record(const std::string& patient_id) const;
  const RiskModel& risk_model() const { return cfg_.risk; }

 private:
  api::ApiResponse route(const api::ApiRequest& req);
  api::ApiResponse login(const api::ApiRequest& req);
  api::ApiResponse add_patient(const Session& s, const api::ApiRequest& req);
  api::ApiResponse view_patient(const Session& s, const std::string& id);
  api::ApiResponse delete_patient(const Session& s, const std::string& id);
  api::ApiResponse enter_data(const Session& s, const api::ApiRequest& req);
  api::ApiResponse collect_data(const Session& s, const api::ApiRequest& req);
  api::ApiResponse upload_info(const Session& s, const api::ApiRequest& req);
  api::ApiResponse download_info(const Session& s, const api::ApiRequest& req);
  api::ApiResponse alerts_endpoint(const Session& s, const api::ApiRequest& req);

  void commit(nlohmann::ordered_json record);  // caller holds the writer lock
  void apply(const nlohmann::json& record);
  nlohmann::ordered_json state_json() const;
  void load_state(const nlohmann::json& state);
  void maybe_snapshot();
  PatientRecord& live_patient(const std::string& id);

  ServiceConfig cfg_;
  LogStore store_;
  Authenticator auth_;
  AlertHub hub_;

  mutable std::shared_mutex mu_;
  std::map<std::string, PatientRecord> patients_;
  std::map<std::string, std::string> idempotency_;  // key -> patient id
  std::uint64_t next_patient_ = 1;
  std::uint64_t next_info_ = 1;
  std::uint64_t next_alert_ = 1;
  std::uint64_t torn_bytes_ = 0;
};

}  // namespace sowban::mhs
