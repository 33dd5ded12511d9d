#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sowban/fabric/frame.hpp"

namespace sowban::fabric {

inline constexpr std::uint16_t kDefaultListenPort = 60000;

/// Splits a byte stream into newline-terminated lines. Lines longer than
/// `max_line` are dropped whole and counted.
class LineDecoder {
 public:
  explicit LineDecoder(std::size_t max_line = 64 * 1024) : max_line_(max_line) {}

  std::vector<std::string> feed(std::string_view bytes);
  std::size_t pending() const { return buf_.size(); }
  /// Drops the unterminated tail. Returns true if there was one.
  bool discard_partial();
  std::uint64_t overlong() const { return overlong_; }

 private:
  std::size_t max_line_;
  std::string buf_;
  bool skipping_ = false;
  std::uint64_t overlong_ = 0;
};

struct ListenerStats {
  std::uint64_t connections = 0;
  std::uint64_t frames = 0;
  std::uint64_t malformed = 0;         // lines that failed to decode, including overlong ones
  std::uint64_t partial_discards = 0;  // unterminated tails dropped on disconnect or close
  std::uint64_t queue_drops = 0;       // oldest frames evicted from a full ingest queue
};

/// TCP endpoint accepting newline-delimited frames from any number of
/// clients. A background thread decodes lines into a bounded queue that the
/// consumer drains.
class FrameListener {
 public:
  /// Port 0 picks an ephemeral port. Throws Error{Bind} if the port is taken.
  static std::unique_ptr<FrameListener> open(const std::string& address = "127.0.0.1",
                                             std::uint16_t port = kDefaultListenPort,
                                             std::size_t queue_capacity = 4096);
  ~FrameListener();
  FrameListener(const FrameListener&) = delete;
  FrameListener& operator=(const FrameListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::optional<Frame> pop(std::chrono::milliseconds timeout);
  std::vector<Frame> drain();
  ListenerStats stats() const;
  void close();

 private:
  FrameListener(int fd, std::uint16_t port, std::size_t queue_capacity);
  void run();
  void push(Frame f);

  int listen_fd_;
  int wake_[2] = {-1, -1};
  std::uint16_t port_;
  std::size_t queue_capacity_;
  std::atomic<bool> stop_{false};
  std::thread thread_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Frame> queue_;
  ListenerStats stats_;
};

/// Blocking client for a FrameListener.
class FrameSender {
 public:
  static FrameSender connect(const std::string& address, std::uint16_t port);  // throws Error{Transport}
  FrameSender(FrameSender&& other) noexcept;
  FrameSender& operator=(FrameSender&& other) noexcept;
  ~FrameSender();

  void send(const Frame& frame);
  void send_raw(std::string_view bytes);
  void close();

 private:
  explicit FrameSender(int fd) : fd_(fd) {}
  int fd_ = -1;
};

}  // namespace sowban::fabric
