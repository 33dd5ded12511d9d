#include "sowban/relay/client.hpp"

#include <httplib.h>

#include <charconv>
#include <memory>
#include <mutex>

namespace sowban::relay {

namespace {

api::ApiRequest make(std::string method, std::string path) {
  api::ApiRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  return r;
}

}  // namespace

api::ApiHandler http_transport(std::string host, int port, std::chrono::milliseconds timeout) {
  struct Conn {
    std::mutex mu;
    httplib::Client cli;
    Conn(const std::string& h, int p) : cli(h, p) {}
  };
  auto conn = std::make_shared<Conn>(host, port);
  conn->cli.set_connection_timeout(timeout);
  conn->cli.set_read_timeout(timeout);
  conn->cli.set_write_timeout(timeout);
  return [conn](const api::ApiRequest& req) {
    httplib::Request hr;
    hr.method = req.method;
    httplib::Params params(req.query.begin(), req.query.end());
    hr.path = params.empty() ? req.path : httplib::append_query_params(req.path, params);
    for (const auto& [k, v] : req.headers) hr.set_header(k, v);
    if (!req.body.empty() || req.method == "POST") {
      hr.body = req.body;
      hr.set_header("Content-Type", "application/json");
    }
    std::lock_guard lock(conn->mu);
    auto res = conn->cli.send(hr);
    if (!res) return api::ApiResponse{0, "text/plain", httplib::to_string(res.error())};
    return api::ApiResponse{res->status, res->get_header_value("Content-Type"), res->body};
  };
}

nlohmann::json MhsClient::call(api::ApiRequest req) {
  if (!token_.empty()) req.headers["authorization"] = "Bearer " + token_;
  const api::ApiResponse res = transport_(req);
  if (res.status < 200 || res.status >= 300) {
    std::string msg = req.method + " " + req.path + ": status " + std::to_string(res.status);
    auto j = nlohmann::json::parse(res.body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("message") && j["message"].is_string()) {
      msg += ": " + j["message"].get<std::string>();
    } else if (res.status == 0) {
      msg += ": " + res.body;
    }
    throw Error(api::kind_for_status(res.status), msg);
  }
  if (res.body.empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(res.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Parse, req.path + ": response is not JSON");
  return j;
}

LoginResult MhsClient::login(const std::string& principal, const std::string& password) {
  auto req = make("POST", "/login");
  req.body = nlohmann::json{{"principal", principal}, {"password", password}}.dump();
  const std::string saved = std::exchange(token_, std::string());
  nlohmann::json j;
  try {
    j = call(std::move(req));
  } catch (...) {
    token_ = saved;
    throw;
  }
  LoginResult r;
  r.token = j.value("token", "");
  r.role = api::role_from_string(j.value("role", ""));
  r.expires_in_s = j.value("expires_in", 0.0);
  token_ = r.token;
  return r;
}

std::string MhsClient::add_patient(const PatientSpec& spec, const std::string& idempotency_key) {
  auto req = make("POST", "/patients");
  nlohmann::json body{{"name", spec.name}, {"mrn", spec.mrn}};
  if (!spec.password.empty()) body["password"] = spec.password;
  req.body = body.dump();
  if (!idempotency_key.empty()) req.headers["idempotency-key"] = idempotency_key;
  return call(std::move(req)).value("patient_id", "");
}

nlohmann::json MhsClient::view_patient(const std::string& patient_id) {
  return call(make("GET", "/patients/" + patient_id));
}

void MhsClient::delete_patient(const std::string& patient_id) {
  call(make("DELETE", "/patients/" + patient_id));
}

api::EnterAck MhsClient::enter_data(const std::vector<VitalsPacket>& packets) {
  auto req = make("POST", "/enterData");
  nlohmann::ordered_json body;
  body["packets"] = nlohmann::ordered_json::array();
  for (const auto& p : packets) body["packets"].push_back(to_json(p));
  req.body = body.dump();
  return api::ack_from_json(call(std::move(req)));
}

nlohmann::json MhsClient::collect_data(const std::string& patient_id, std::optional<double> from,
                                       std::optional<double> to, const std::string& cursor,
                                       std::size_t limit) {
  auto req = make("GET", "/collectData");
  req.query["patient_id"] = patient_id;
  if (from) req.query["from"] = format_double(*from);
  if (to) req.query["to"] = format_double(*to);
  if (!cursor.empty()) req.query["cursor"] = cursor;
  if (limit > 0) req.query["limit"] = std::to_string(limit);
  return call(std::move(req));
}

std::uint64_t MhsClient::upload_info(const api::InfoItem& item) {
  auto req = make("POST", "/uploadInfo");
  auto body = api::to_json(item);
  body.erase("id");
  req.body = body.dump();
  return call(std::move(req)).value("item_id", std::uint64_t{0});
}

InfoPage MhsClient::download_info(const std::string& patient_id, std::uint64_t since) {
  auto req = make("GET", "/downloadInfo");
  req.query["patient_id"] = patient_id;
  req.query["since"] = std::to_string(since);
  const auto j = call(std::move(req));
  InfoPage page;
  page.cursor = j.value("cursor", since);
  if (j.contains("items")) {
    for (const auto& it : j["items"]) page.items.push_back(api::info_from_json(it));
  }
  return page;
}

nlohmann::json MhsClient::alerts_snapshot(std::optional<std::string> patient_id,
                                          std::optional<std::uint64_t> after) {
  auto req = make("GET", "/alerts");
  req.query["follow"] = "0";
  if (patient_id) req.query["patient_id"] = *patient_id;
  if (after) req.headers["last-event-id"] = std::to_string(*after);
  return call(std::move(req));
}

std::vector<api::InfoItem> InfoSync::sync(MhsClient& client) {
  InfoPage page = client.download_info(patient_id_, cursor_);
  cursor_ = std::max(cursor_, page.cursor);
  return std::move(page.items);
}

}  // namespace sowban::relay
