#include "sowban/mhs/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

namespace sowban::mhs {

namespace {

api::ApiRequest to_api(const httplib::Request& r) {
  api::ApiRequest a;
  a.method = r.method;
  a.path = r.path;
  for (const auto& [k, v] : r.params) a.query.emplace(k, v);
  for (const auto& [k, v] : r.headers) {
    std::string key = k;
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    a.headers.emplace(std::move(key), v);
  }
  a.body = r.body;
  return a;
}

void send(httplib::Response& res, const api::ApiResponse& a) {
  res.status = a.status;
  res.set_content(a.body, a.content_type);
}

}  // namespace

HttpServer::HttpServer(Service& service, std::string host, int port)
    : service_(service), host_(std::move(host)), port_(port), server_(std::make_unique<httplib::Server>()) {
  // httplib's default adds SO_REUSEPORT, which would let a second server share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  install();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install() {
  auto generic = [this](const httplib::Request& req, httplib::Response& res) {
    send(res, service_.handle(to_api(req)));
  };

  server_->Get("/alerts", [this](const httplib::Request& req, httplib::Response& res) {
    const api::ApiRequest areq = to_api(req);
    if (areq.param("follow").value_or("1") == "0") {
      send(res, service_.handle(areq));
      return;
    }
    AlertFilter filter;
    std::optional<std::uint64_t> after;
    try {
      const Session s = service_.authenticate(areq);
      filter = service_.alert_filter(s, areq.param("patient_id"));
      std::string resume = areq.header("last-event-id");
      if (resume.empty()) resume = areq.param("last_event_id").value_or("");
      if (!resume.empty()) after = std::stoull(resume);
    } catch (const Error& e) {
      send(res, api::error_response(api::status_for(e.kind()), to_string(e.kind()), e.what()));
      return;
    } catch (const std::exception&) {
      send(res, api::error_response(400, "schema", "bad last-event-id"));
      return;
    }

    struct Cursor {
      std::optional<std::uint64_t> after;
      bool first = true;
    };
    auto cursor = std::make_shared<Cursor>(Cursor{after});
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, filter, cursor](std::size_t, httplib::DataSink& sink) {
          std::string out;
          if (cursor->first) {
            cursor->first = false;
            const AlertPage page = service_.alerts().since(cursor->after, filter);
            out = "retry: 1000\n\n";
            if (page.replayed) out += "event: replay\ndata: {}\n\n";
            for (const auto& e : page.events) out += sse_frame(e);
            cursor->after = page.head;
          } else {
            const auto deadline = std::chrono::steady_clock::now() + keepalive;
            while (out.empty() && !stopping_.load() && !service_.alerts().closed()) {
              const AlertPage page =
                  service_.alerts().wait(cursor->after.value_or(0), filter, std::chrono::milliseconds(250));
              for (const auto& e : page.events) out += sse_frame(e);
              cursor->after = std::max(cursor->after.value_or(0), page.head);
              if (out.empty() && std::chrono::steady_clock::now() >= deadline) out = ": keepalive\n\n";
            }
          }
          if (out.empty()) {
            sink.done();
            return true;
          }
          return sink.write(out.data(), out.size());
        });
  });

  const char* any = R"(/.*)";
  server_->Get(any, generic);
  server_->Post(any, generic);
  server_->Delete(any, generic);
  server_->Put(any, generic);
  server_->Patch(any, generic);
}

void HttpServer::bind() {
  if (bound_) return;
  if (port_ == 0) {
    port_ = server_->bind_to_any_port(host_);
    if (port_ < 0) throw Error(ErrorKind::Bind, host_ + ": cannot bind any port");
  } else if (!server_->bind_to_port(host_, port_)) {
    throw Error(ErrorKind::Bind, host_ + ":" + std::to_string(port_) + ": address in use or unavailable");
  }
  bound_ = true;
}

void HttpServer::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HttpServer::run() {
  bind();
  server_->listen_after_bind();
}

void HttpServer::stop() {
  stopping_ = true;
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace sowban::mhs
