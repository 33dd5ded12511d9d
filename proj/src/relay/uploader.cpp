#include "sowban/relay/uploader.hpp"

#include <algorithm>

namespace sowban::relay {

std::chrono::milliseconds backoff_delay(const UploaderConfig& cfg, int retry) {
  auto d = cfg.initial_backoff;
  for (int i = 1; i < retry && d < cfg.max_backoff; ++i) d *= 2;
  return std::min(d, cfg.max_backoff);
}

Uploader::Uploader(MhsClient& client, UploaderConfig cfg, Sleeper sleeper)
    : client_(client), cfg_(cfg), sleeper_(std::move(sleeper)) {
  if (cfg_.queue_capacity == 0 || cfg_.batch_size == 0) {
    throw Error(ErrorKind::Range, "uploader queue and batch sizes must be > 0");
  }
}

Uploader::~Uploader() { stop(false); }

bool Uploader::submit(VitalsPacket p) {
  std::lock_guard lock(mu_);
  ++stats_.submitted;
  if (queue_.size() >= cfg_.queue_capacity) {
    ++stats_.queue_drops;
    return false;
  }
  queue_.push_back(std::move(p));
  cv_.notify_all();
  return true;
}

void Uploader::sleep(std::chrono::milliseconds d) {
  if (sleeper_) {
    sleeper_(d);
    return;
  }
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, d, [&] { return stopping_; });
}

FlushStatus Uploader::flush_locked_out() {
  int failures = 0;
  for (;;) {
    std::vector<VitalsPacket> batch;
    {
      std::lock_guard lock(mu_);
      if (terminal_) return FlushStatus::Terminal;
      if (queue_.empty()) return FlushStatus::Drained;
      if (stopping_ && failures > 0) return FlushStatus::Stopped;
      const auto n = std::min(queue_.size(), cfg_.batch_size);
      batch.assign(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(n));
    }
    try {
      const api::EnterAck ack = client_.enter_data(batch);
      std::lock_guard lock(mu_);
      queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(batch.size()));
      ++stats_.batches;
      stats_.accepted += ack.accepted;
      stats_.deduped += ack.deduped;
      stats_.rejected += ack.rejected;
      failures = 0;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Transport) {
        std::lock_guard lock(mu_);
        terminal_ = e.what();
        return FlushStatus::Terminal;
      }
      ++failures;
      if (cfg_.max_attempts > 0 && failures >= cfg_.max_attempts) return FlushStatus::GaveUp;
      const auto d = backoff_delay(cfg_, failures);
      {
        std::lock_guard lock(mu_);
        ++stats_.retries;
        stats_.backoff_total += d;
      }
      sleep(d);
    }
  }
}

FlushStatus Uploader::flush() {
  {
    std::lock_guard lock(mu_);
    if (worker_.joinable()) throw Error(ErrorKind::Conflict, "flush while the upload worker runs");
  }
  return flush_locked_out();
}

void Uploader::start() {
  std::lock_guard lock(mu_);
  if (worker_.joinable()) return;
  stopping_ = false;
  worker_ = std::thread([this] { run(); });
}

void Uploader::run() {
  for (;;) {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || (!queue_.empty() && !terminal_); });
      if (stopping_ && (queue_.empty() || terminal_)) break;
      busy_ = true;
    }
    const FlushStatus st = flush_locked_out();
    std::lock_guard lock(mu_);
    busy_ = false;
    cv_.notify_all();
    if (st == FlushStatus::Stopped) break;
    if (st == FlushStatus::GaveUp && stopping_) break;
  }
  std::lock_guard lock(mu_);
  busy_ = false;
  cv_.notify_all();
}

void Uploader::stop(bool drain) {
  std::thread t;
  {
    std::unique_lock lock(mu_);
    if (!worker_.joinable()) return;
    if (drain) {
      cv_.wait(lock, [&] { return (queue_.empty() && !busy_) || (terminal_ && !busy_); });
    }
    stopping_ = true;
    cv_.notify_all();
    t = std::move(worker_);
  }
  t.join();
}

std::size_t Uploader::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

UploadStats Uploader::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::optional<std::string> Uploader::terminal_error() const {
  std::lock_guard lock(mu_);
  return terminal_;
}

void Uploader::clear_terminal() {
  std::lock_guard lock(mu_);
  terminal_.reset();
  cv_.notify_all();
}

}  // namespace sowban::relay
