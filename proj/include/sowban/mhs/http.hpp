#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "sowban/mhs/service.hpp"

namespace httplib {
class Server;
}

namespace sowban::mhs {

inline constexpr int kDefaultHttpPort = 8080;

/// Serves a Service over HTTP. GET /alerts streams server-sent events
/// unless follow=0.
class HttpServer {
 public:
  HttpServer(Service& service, std::string host = "127.0.0.1", int port = kDefaultHttpPort);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Throws Error{Bind}.
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

  std::chrono::milliseconds keepalive{15000};

 private:
  void install();
  void bind();

  Service& service_;
  std::string host_;
  int port_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  bool bound_ = false;
};

}  // namespace sowban::mhs
