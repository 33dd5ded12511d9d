#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "sowban/relay/client.hpp"

namespace sowban::relay {

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct UploaderConfig {
  std::size_t queue_capacity = 4096;
  std::size_t batch_size = 64;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_backoff{60000};
  int max_attempts = 0;  // per batch; 0 retries forever
};

/// Delay before retry number `retry` (1-based): initial * 2^(retry-1), capped.
std::chrono::milliseconds backoff_delay(const UploaderConfig& cfg, int retry);

enum class FlushStatus { Drained, Terminal, GaveUp, Stopped };

struct UploadStats {
  std::uint64_t submitted = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t batches = 0;
  std::uint64_t accepted = 0;
  std::uint64_t deduped = 0;
  std::uint64_t rejected = 0;
  std::uint64_t retries = 0;
  std::chrono::milliseconds backoff_total{0};
};

/// Moves packets from a bounded queue to enterData in batches. Transport
/// failures and 5xx responses are retried with exponential backoff; auth and
/// other client errors are terminal and leave the packets queued.
class Uploader {
 public:
  explicit Uploader(MhsClient& client, UploaderConfig cfg = {}, Sleeper sleeper = {});
  ~Uploader();
  Uploader(const Uploader&) = delete;
  Uploader& operator=(const Uploader&) = delete;

  /// Returns false and counts a drop when the queue is full.
  bool submit(VitalsPacket p);

  /// Uploads until the queue is empty or a terminal error. Not for use while
  /// the worker runs.
  FlushStatus flush();

  /// Background worker draining the queue as packets arrive.
  void start();
  /// Stops the worker. With `drain`, first waits for the queue to empty or
  /// for a terminal error.
  void stop(bool drain = true);

  std::size_t pending() const;
  UploadStats stats() const;
  /// Message of the terminal error that halted uploads, if any.
  std::optional<std::string> terminal_error() const;
  /// Clears a terminal error (for example after a fresh login).
  void clear_terminal();

 private:
  FlushStatus flush_locked_out();
  void sleep(std::chrono::milliseconds d);
  void run();

  MhsClient& client_;
  UploaderConfig cfg_;
  Sleeper sleeper_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<VitalsPacket> queue_;
  UploadStats stats_;
  std::optional<std::string> terminal_;
  bool stopping_ = false;
  bool busy_ = false;
  std::thread worker_;
};

}  // namespace sowban::relay
