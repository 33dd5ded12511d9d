#include "sowban/mhs/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace sowban::mhs {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json parse_body(const api::ApiRequest& req) {
  if (req.body.empty()) throw Error(ErrorKind::Schema, "request body is empty");
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Parse, "request body is not valid JSON");
  return j;
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw Error(ErrorKind::Schema, std::string("missing field '") + key + "'");
  std::string v = it->get<std::string>();
  if (v.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorKind::Schema, std::string("field '") + key + "' is empty");
  }
  return v;
}

double parse_number(const std::string& s, const char* what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::Schema, std::string("'") + what + "' is not a number");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const char* what) {
  Int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorKind::Schema, std::string("'") + what + "' is not an integer");
  }
  return v;
}

void require_practitioner(const Session& s) {
  if (s.role != api::Role::Practitioner) throw Error(ErrorKind::Forbidden, "practitioner role required");
}

void validate_packet(const VitalsPacket& p) {
  if (p.patient_id.empty()) throw Error(ErrorKind::Schema, "empty patient_id");
  if (p.t < 0.0) throw Error(ErrorKind::Schema, "t must be >= 0");
  if (p.spo2 < 0.0 || p.spo2 > 100.0) throw Error(ErrorKind::Schema, "spo2 outside [0, 100]");
  if (p.hr < 0.0 || p.hr > 300.0) throw Error(ErrorKind::Schema, "hr outside [0, 300]");
  if (std::fabs(p.location.lat) > 90.0 || std::fabs(p.location.lon) > 180.0) {
    throw Error(ErrorKind::Schema, "location out of range");
  }
}

ordered_json packet_row(const StoredPacket& sp) {
  ordered_json j = to_json(sp.packet);
  j["risk"] = sp.risk;
  j["alert_id"] = sp.alert_id ? ordered_json(*sp.alert_id) : ordered_json(nullptr);
  return j;
}

std::string patient_code(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%04llu", static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

Service::Service(ServiceConfig cfg)
    : cfg_(std::move(cfg)),
      store_(cfg_.data_dir, cfg_.fsync),
      auth_(cfg_.token_ttl_s, cfg_.clock),
      hub_(cfg_.alert_retention) {
  cfg_.risk.validate();
  RecoveredLog rec = store_.recover();
  torn_bytes_ = rec.torn_bytes;
  std::unique_lock lock(mu_);
  if (rec.snapshot) load_state(*rec.snapshot);
  for (const auto& r : rec.records) apply(r);
}

Service::~Service() { hub_.close(); }

void Service::ensure_practitioner(const std::string& principal, const std::string& password) {
  std::unique_lock lock(mu_);
  if (auth_.has(principal)) return;
  Credential c{principal, api::Role::Practitioner, hash_password(password), ""};
  ordered_json rec;
  rec["type"] = "credential";
  rec["credential"] = to_json(c);
  commit(std::move(rec));
}

void Service::commit(ordered_json record) {
  store_.append(record);
  apply(record);
  maybe_snapshot();
}

void Service::maybe_snapshot() {
  if (cfg_.snapshot_every > 0 && store_.records_since_snapshot() >= cfg_.snapshot_every) {
    store_.snapshot(state_json());
  }
}

void Service::snapshot() {
  std::unique_lock lock(mu_);
  store_.snapshot(state_json());
}

void Service::apply(const json& r) {
  const std::string type = r.at("type").get<std::string>();
  if (type == "credential") {
    auth_.add(credential_from_json(r.at("credential")));
  } else if (type == "patient_add") {
    const auto& pj = r.at("patient");
    PatientRecord p;
    p.patient_id = pj.at("patient_id").get<std::string>();
    p.name = pj.at("name").get<std::string>();
    p.mrn = pj.at("mrn").get<std::string>();
    next_patient_ = std::max(next_patient_, pj.at("number").get<std::uint64_t>() + 1);
    if (r.contains("idempotency_key") && r["idempotency_key"].is_string()) {
      idempotency_[r["idempotency_key"].get<std::string>()] = p.patient_id;
    }
    if (r.contains("credential") && !r["credential"].is_null()) {
      auth_.add(credential_from_json(r["credential"]));
    }
    patients_[p.patient_id] = std::move(p);
  } else if (type == "patient_delete") {
    const auto id = r.at("patient_id").get<std::string>();
    patients_.at(id).deleted = true;
    auth_.revoke_patient(id);
  } else if (type == "ingest") {
    for (const auto& e : r.at("entries")) {
      StoredPacket sp;
      sp.packet = packet_from_json(e.at("packet"));
      sp.risk = e.at("risk").get<double>();
      if (e.contains("alert") && !e["alert"].is_null()) {
        AlertEvent a = alert_from_json(e["alert"]);
        sp.alert_id = a.id;
        next_alert_ = std::max(next_alert_, a.id + 1);
        hub_.publish(std::move(a));
      }
      PatientRecord& p = patients_.at(sp.packet.patient_id);
      p.keys.insert(time_key_us(sp.packet.t));
      p.history.push_back(std::move(sp));
    }
  } else if (type == "info") {
    for (const auto& ij : r.at("items")) {
      api::InfoItem it = api::info_from_json(ij);
      next_info_ = std::max(next_info_, it.id + 1);
      patients_.at(it.patient_id).info.push_back(std::move(it));
    }
  } else {
    throw Error(ErrorKind::Io, "unknown log record type '" + type + "'");
  }
}

ordered_json Service::state_json() const {
  ordered_json s;
  s["next_patient"] = next_patient_;
  s["next_info"] = next_info_;
  s["next_alert"] = next_alert_;
  s["credentials"] = ordered_json::array();
  for (const auto& c : auth_.credentials()) s["credentials"].push_back(to_json(c));
  s["idempotency"] = ordered_json::object();
  for (const auto& [k, v] : idempotency_) s["idempotency"][k] = v;
  s["patients"] = ordered_json::array();
  for (const auto& [id, p] : patients_) {
    ordered_json pj;
    pj["patient_id"] = p.patient_id;
    pj["name"] = p.name;
    pj["mrn"] = p.mrn;
    pj["deleted"] = p.deleted;
    pj["history"] = ordered_json::array();
    for (const auto& sp : p.history) pj["history"].push_back(packet_row(sp));
    pj["info"] = ordered_json::array();
    for (const auto& it : p.info) pj["info"].push_back(api::to_json(it));
    s["patients"].push_back(std::move(pj));
  }
  s["alerts"] = ordered_json::array();
  for (const auto& a : hub_.all()) s["alerts"].push_back(to_json(a));
  s["last_alert_id"] = hub_.last_id();
  return s;
}

void Service::load_state(const json& s) {
  next_patient_ = s.at("next_patient").get<std::uint64_t>();
  next_info_ = s.at("next_info").get<std::uint64_t>();
  next_alert_ = s.at("next_alert").get<std::uint64_t>();
  for (const auto& c : s.at("credentials")) auth_.add(credential_from_json(c));
  for (const auto& [k, v] : s.at("idempotency").items()) idempotency_[k] = v.get<std::string>();
  for (const auto& pj : s.at("patients")) {
    PatientRecord p;
    p.patient_id = pj.at("patient_id").get<std::string>();
    p.name = pj.at("name").get<std::string>();
    p.mrn = pj.at("mrn").get<std::string>();
    p.deleted = pj.at("deleted").get<bool>();
    for (const auto& hj : pj.at("history")) {
      StoredPacket sp;
      sp.packet = packet_from_json(hj);
      sp.risk = hj.at("risk").get<double>();
      if (!hj.at("alert_id").is_null()) sp.alert_id = hj["alert_id"].get<std::uint64_t>();
      p.keys.insert(time_key_us(sp.packet.t));
      p.history.push_back(std::move(sp));
    }
    for (const auto& ij : pj.at("info")) p.info.push_back(api::info_from_json(ij));
    patients_[p.patient_id] = std::move(p);
  }
  std::vector<AlertEvent> alerts;
  for (const auto& a : s.at("alerts")) alerts.push_back(alert_from_json(a));
  hub_.restore(std::move(alerts), s.at("last_alert_id").get<std::uint64_t>());
}

PatientRecord& Service::live_patient(const std::string& id) {
  auto it = patients_.find(id);
  if (it == patients_.end() || it->second.deleted) {
    throw Error(ErrorKind::NotFound, "unknown patient '" + id + "'");
  }
  return it->second;
}

Session Service::authenticate(const api::ApiRequest& req) const { return auth_.authenticate(bearer_token(req)); }

AlertFilter Service::alert_filter(const Session& s, const std::optional<std::string>& patient_id) const {
  AlertFilter f;
  f.role = s.role;
  if (s.role == api::Role::Patient) {
    if (patient_id && *patient_id != s.patient_id) {
      throw Error(ErrorKind::Forbidden, "patients may only follow their own alerts");
    }
    f.patient_id = s.patient_id;
  } else {
    f.patient_id = patient_id;
  }
  return f;
}

ServiceStats Service::stats() const {
  std::shared_lock lock(mu_);
  ServiceStats st;
  for (const auto& [id, p] : patients_) {
    if (!p.deleted) ++st.patients;
    st.packets += p.history.size();
  }
  st.alerts = hub_.all().size();
  st.log_seq = store_.last_seq();
  st.torn_bytes = torn_bytes_;
  return st;
}

std::optional<PatientRecord> Service::record(const std::string& patient_id) const {
  std::shared_lock lock(mu_);
  auto it = patients_.find(patient_id);
  if (it == patients_.end()) return std::nullopt;
  return it->second;
}

api::ApiResponse Service::handle(const api::ApiRequest& req) {
  try {
    return route(req);
  } catch (const Error& e) {
    return api::error_response(api::status_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return api::error_response(400, "schema", e.what());
  } catch (const std::exception& e) {
    return api::error_response(500, "internal", e.what());
  }
}

api::ApiResponse Service::route(const api::ApiRequest& req) {
  const std::string& m = req.method;
  const std::string& path = req.path;
  if (path == "/login") {
    if (m != "POST") return api::error_response(405, "method_not_allowed", "use POST");
    return login(req);
  }
  // Everything except login requires a session, whether or not the route exists.
  const Session s = authenticate(req);

  constexpr std::string_view kPatients = "/patients/";
  if (path == "/patients") {
    if (m == "POST") return add_patient(s, req);
  } else if (path.rfind(kPatients, 0) == 0 && path.size() > kPatients.size()) {
    const std::string id = path.substr(kPatients.size());
    if (id.find('/') != std::string::npos) return api::error_response(404, "not_found", "no such route");
    if (m == "GET") return view_patient(s, id);
    if (m == "DELETE") return delete_patient(s, id);
  } else if (path == "/enterData") {
    if (m == "POST") return enter_data(s, req);
  } else if (path == "/collectData") {
    if (m == "GET") return collect_data(s, req);
  } else if (path == "/uploadInfo") {
    if (m == "POST") return upload_info(s, req);
  } else if (path == "/downloadInfo") {
    if (m == "GET") return download_info(s, req);
  } else if (path == "/alerts") {
    if (m == "GET") return alerts_endpoint(s, req);
  } else {
    return api::error_response(404, "not_found", "no such route");
  }
  return api::error_response(405, "method_not_allowed", m + " not supported on " + path);
}

api::ApiResponse Service::login(const api::ApiRequest& req) {
  const json j = parse_body(req);
  const IssuedToken t = auth_.login(required_string(j, "principal"), required_string(j, "password"));
  ordered_json out;
  out["token"] = t.token;
  out["role"] = api::to_string(t.session.role);
  out["patient_id"] = t.session.patient_id.empty() ? ordered_json(nullptr) : ordered_json(t.session.patient_id);
  out["expires_in"] = t.ttl_s;
  return api::json_response(200, out);
}

api::ApiResponse Service::add_patient(const Session& s, const api::ApiRequest& req) {
  require_practitioner(s);
  const json j = parse_body(req);
  if (!j.is_object()) throw Error(ErrorKind::Schema, "patient must be an object");
  const std::string name = required_string(j, "name");
  const std::string mrn = required_string(j, "mrn");
  std::string password;
  if (j.contains("password")) password = required_string(j, "password");
  const std::string key = req.header("idempotency-key");

  auto respond = [&](const PatientRecord& p, int status) {
    ordered_json out;
    out["patient_id"] = p.patient_id;
    out["name"] = p.name;
    out["mrn"] = p.mrn;
    return api::json_response(status, out);
  };

  // Hash outside the writer lock; it is deliberately slow.
  std::optional<std::string> hash;
  if (!password.empty()) hash = hash_password(password);

  std::unique_lock lock(mu_);
  if (!key.empty()) {
    if (auto it = idempotency_.find(key); it != idempotency_.end()) {
      return respond(patients_.at(it->second), 201);
    }
  }
  for (const auto& [id, p] : patients_) {
    if (!p.deleted && p.mrn == mrn) throw Error(ErrorKind::Conflict, "a patient with mrn '" + mrn + "' exists");
  }
  const std::uint64_t number = next_patient_;
  const std::string id = patient_code(number);
  ordered_json rec;
  rec["type"] = "patient_add";
  rec["patient"] = {{"patient_id", id}, {"name", name}, {"mrn", mrn}, {"number", number}};
  rec["idempotency_key"] = key.empty() ? ordered_json(nullptr) : ordered_json(key);
  if (hash) {
    if (auth_.has(id)) throw Error(ErrorKind::Conflict, "principal '" + id + "' exists");
    rec["credential"] = to_json(Credential{id, api::Role::Patient, *hash, id});
  } else {
    rec["credential"] = nullptr;
  }
  commit(std::move(rec));
  return respond(patients_.at(id), 201);
}

api::ApiResponse Service::view_patient(const Session& s, const std::string& id) {
  require_practitioner(s);
  std::shared_lock lock(mu_);
  const PatientRecord& p = live_patient(id);
  ordered_json out;
  out["patient_id"] = p.patient_id;
  out["name"] = p.name;
  out["mrn"] = p.mrn;
  out["status"] = p.history.empty() ? "registered" : "monitoring";
  ordered_json hist;
  hist["packets"] = p.history.size();
  hist["first_t"] = p.history.empty() ? ordered_json(nullptr) : ordered_json(p.history.front().packet.t);
  hist["last_t"] = p.history.empty() ? ordered_json(nullptr) : ordered_json(p.history.back().packet.t);
  hist["alerts"] = std::count_if(p.history.begin(), p.history.end(), [](const auto& sp) { return sp.alert_id.has_value(); });
  out["monitoring_history"] = hist;
  out["latest"] = p.history.empty() ? ordered_json(nullptr) : packet_row(p.history.back());
  out["info_items"] = p.info.size();
  return api::json_response(200, out);
}

api::ApiResponse Service::delete_patient(const Session& s, const std::string& id) {
  require_practitioner(s);
  std::unique_lock lock(mu_);
  live_patient(id);
  ordered_json rec;
  rec["type"] = "patient_delete";
  rec["patient_id"] = id;
  commit(std::move(rec));
  ordered_json out;
  out["patient_id"] = id;
  out["deleted"] = true;
  return api::json_response(200, out);
}

api::ApiResponse Service::enter_data(const Session& s, const api::ApiRequest& req) {
  const json body = parse_body(req);
  const json* arr = &body;
  if (body.is_object()) {
    auto it = body.find("packets");
    if (it == body.end()) throw Error(ErrorKind::Schema, "missing field 'packets'");
    arr = &*it;
  }
  if (!arr->is_array()) throw Error(ErrorKind::Schema, "'packets' must be an array");

  api::EnterAck ack;
  std::unique_lock lock(mu_);
  ordered_json rec;
  rec["type"] = "ingest";
  rec["entries"] = ordered_json::array();
  // Packets accepted earlier in this batch, per patient (not yet applied).
  std::map<std::string, std::vector<VitalsPacket>> pending;
  std::map<std::string, std::set<std::int64_t>> pending_keys;
  std::uint64_t alert_id = next_alert_;

  std::size_t index = 0;
  for (const auto& pj : *arr) {
    api::PacketResult r;
    r.index = index++;
    auto reject = [&](std::string reason) {
      r.status = api::Disposition::Rejected;
      r.reason = std::move(reason);
      ++ack.rejected;
      ack.results.push_back(r);
    };
    VitalsPacket p;
    try {
      p = packet_from_json(pj);
      validate_packet(p);
    } catch (const Error& e) {
      reject(std::string("malformed: ") + e.what());
      continue;
    }
    if (s.role == api::Role::Patient && p.patient_id != s.patient_id) {
      reject("forbidden");
      continue;
    }
    auto pit = patients_.find(p.patient_id);
    if (pit == patients_.end()) {
      reject("unknown_patient");
      continue;
    }
    if (pit->second.deleted) {
      reject("patient_deleted");
      continue;
    }
    const std::int64_t key = time_key_us(p.t);
    if (pit->second.keys.count(key) || pending_keys[p.patient_id].count(key)) {
      r.status = api::Disposition::Deduped;
      ++ack.deduped;
      ack.results.push_back(r);
      continue;
    }
    auto& batch = pending[p.patient_id];
    const VitalsPacket* prev = !batch.empty()                    ? &batch.back()
                               : !pit->second.history.empty() ? &pit->second.history.back().packet
                                                              : nullptr;
    if (prev && p.t < prev->t) {
      reject("out_of_order");
      continue;
    }
    const RiskResult risk = score_risk(p, prev, cfg_.risk);
    ordered_json entry;
    entry["packet"] = to_json(p);
    entry["risk"] = risk.p;
    entry["alert"] = nullptr;
    if (risk.alert) {
      AlertEvent a;
      a.id = alert_id++;
      a.patient_id = p.patient_id;
      a.t = p.t;
      a.severity = *risk.severity;
      a.causes = risk.causes;
      a.risk = risk.p;
      a.location = p.location;
      entry["alert"] = to_json(a);
      r.alert_id = a.id;
    }
    r.risk = risk.p;
    rec["entries"].push_back(std::move(entry));
    batch.push_back(p);
    pending_keys[p.patient_id].insert(key);
    ++ack.accepted;
    ack.results.push_back(r);
  }
  if (!rec["entries"].empty()) commit(std::move(rec));
  return api::json_response(200, api::to_json(ack));
}

api::ApiResponse Service::collect_data(const Session& s, const api::ApiRequest& req) {
  require_practitioner(s);
  const auto pid = req.param("patient_id");
  if (!pid || pid->empty()) throw Error(ErrorKind::Schema, "missing parameter 'patient_id'");
  const double from = req.param("from") ? parse_number(*req.param("from"), "from") : -INFINITY;
  const double to = req.param("to") ? parse_number(*req.param("to"), "to") : INFINITY;
  if (from > to) throw Error(ErrorKind::Schema, "malformed range: from > to");
  std::size_t limit = cfg_.page_limit;
  if (auto l = req.param("limit")) {
    limit = parse_int<std::size_t>(*l, "limit");
    if (limit == 0 || limit > cfg_.max_page_limit) throw Error(ErrorKind::Schema, "limit out of range");
  }
  std::optional<std::int64_t> cursor;
  if (auto c = req.param("cursor"); c && !c->empty()) cursor = parse_int<std::int64_t>(*c, "cursor");

  std::shared_lock lock(mu_);
  const PatientRecord& p = live_patient(*pid);
  ordered_json out;
  out["patient_id"] = p.patient_id;
  out["packets"] = ordered_json::array();
  std::int64_t next = cursor ? *cursor : (std::isfinite(from) ? time_key_us(from) : 0);
  bool more = false;
  std::size_t n = 0;
  for (const auto& sp : p.history) {
    const double t = sp.packet.t;
    const std::int64_t key = time_key_us(t);
    if (t < from || t > to) continue;
    if (cursor && key < *cursor) continue;
    if (n == limit) {
      more = true;
      next = key;
      break;
    }
    out["packets"].push_back(packet_row(sp));
    ++n;
    next = key + 1;
  }
  out["next_cursor"] = std::to_string(next);
  out["has_more"] = more;
  return api::json_response(200, out);
}

api::ApiResponse Service::upload_info(const Session& s, const api::ApiRequest& req) {
  require_practitioner(s);
  const json body = parse_body(req);
  if (!body.is_object()) throw Error(ErrorKind::Schema, "body must be an object");
  std::vector<json> raw;
  const bool batch = body.contains("items");
  if (batch) {
    if (!body["items"].is_array() || body["items"].empty()) throw Error(ErrorKind::Schema, "'items' must be a non-empty array");
    for (auto item : body["items"]) {
      if (!item.is_object()) throw Error(ErrorKind::Schema, "info item must be an object");
      if (!item.contains("patient_id") && body.contains("patient_id")) item["patient_id"] = body["patient_id"];
      raw.push_back(std::move(item));
    }
  } else {
    raw.push_back(body);
  }

  std::unique_lock lock(mu_);
  std::vector<api::InfoItem> items;
  std::uint64_t id = next_info_;
  for (auto& j : raw) {
    j.erase("id");
    api::InfoItem it = api::info_from_json(j);
    if (it.text.find_first_not_of(" \t\r\n") == std::string::npos) throw Error(ErrorKind::Schema, "empty item");
    if (it.kind == api::InfoKind::Consultation && !it.at) {
      throw Error(ErrorKind::Schema, "consultation slot needs 'at'");
    }
    live_patient(it.patient_id);
    it.id = id++;
    items.push_back(std::move(it));
  }
  ordered_json rec;
  rec["type"] = "info";
  rec["items"] = ordered_json::array();
  for (const auto& it : items) rec["items"].push_back(api::to_json(it));
  commit(std::move(rec));

  ordered_json out;
  if (batch) {
    out["item_ids"] = ordered_json::array();
    for (const auto& it : items) out["item_ids"].push_back(it.id);
  } else {
    out["item_id"] = items.front().id;
  }
  return api::json_response(201, out);
}

api::ApiResponse Service::download_info(const Session& s, const api::ApiRequest& req) {
  std::string pid = req.param("patient_id").value_or("");
  if (s.role == api::Role::Patient) {
    if (pid.empty()) pid = s.patient_id;
    if (pid != s.patient_id) throw Error(ErrorKind::Forbidden, "patients may only read their own items");
  }
  if (pid.empty()) throw Error(ErrorKind::Schema, "missing parameter 'patient_id'");
  const std::uint64_t since = req.param("since") ? parse_int<std::uint64_t>(*req.param("since"), "since") : 0;
  std::optional<api::InfoKind> kind;
  if (auto k = req.param("kind")) kind = api::info_kind_from_string(*k);

  std::shared_lock lock(mu_);
  const PatientRecord& p = live_patient(pid);
  std::vector<api::InfoItem> items;
  std::uint64_t cursor = since;
  for (const auto& it : p.info) {
    if (it.id <= since || (kind && it.kind != *kind)) continue;
    items.push_back(it);
    cursor = std::max(cursor, it.id);
  }
  if (kind == api::InfoKind::Consultation) {
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return *a.at < *b.at; });
  }
  ordered_json out;
  out["patient_id"] = pid;
  out["items"] = ordered_json::array();
  for (const auto& it : items) out["items"].push_back(api::to_json(it));
  out["cursor"] = cursor;
  return api::json_response(200, out);
}

api::ApiResponse Service::alerts_endpoint(const Session& s, const api::ApiRequest& req) {
  const AlertFilter filter = alert_filter(s, req.param("patient_id"));
  std::optional<std::uint64_t> after;
  std::string resume = req.header("last-event-id");
  if (resume.empty()) resume = req.param("last_event_id").value_or("");
  if (!resume.empty()) after = parse_int<std::uint64_t>(resume, "last-event-id");
  const AlertPage page = hub_.since(after, filter);

  if (req.param("follow").value_or("1") == "0") {
    ordered_json out;
    out["alerts"] = ordered_json::array();
    for (const auto& e : page.events) out["alerts"].push_back(to_json(e));
    out["last_id"] = page.head;
    out["replayed"] = page.replayed;
    return api::json_response(200, out);
  }
  api::ApiResponse res;
  res.content_type = "text/event-stream";
  if (page.replayed) res.body = "event: replay\ndata: {}\n\n";
  for (const auto& e : page.events) res.body += sse_frame(e);
  return res;
}

}  // namespace sowban::mhs
