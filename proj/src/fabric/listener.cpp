#include "sowban/fabric/listener.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

namespace sowban::fabric {

namespace {

sockaddr_in resolve(const std::string& address, std::uint16_t port, ErrorKind kind) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(address.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(kind, "cannot resolve address '" + address + "'");
  }
  sockaddr_in sa{};
  std::memcpy(&sa, res->ai_addr, sizeof sa);
  freeaddrinfo(res);
  sa.sin_port = htons(port);
  return sa;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::vector<std::string> LineDecoder::feed(std::string_view bytes) {
  std::vector<std::string> lines;
  for (char c : bytes) {
    if (c == '\n') {
      if (skipping_) {
        skipping_ = false;
      } else {
        if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
        lines.push_back(std::move(buf_));
      }
      buf_.clear();
      continue;
    }
    if (skipping_) continue;
    if (buf_.size() >= max_line_) {
      buf_.clear();
      skipping_ = true;
      ++overlong_;
      continue;
    }
    buf_.push_back(c);
  }
  return lines;
}

bool LineDecoder::discard_partial() {
  const bool had = !buf_.empty();
  buf_.clear();
  skipping_ = false;
  return had;
}

FrameListener::FrameListener(int fd, std::uint16_t port, std::size_t queue_capacity)
    : listen_fd_(fd), port_(port), queue_capacity_(queue_capacity) {
  if (::pipe(wake_) != 0) {
    ::close(listen_fd_);
    throw Error(ErrorKind::Io, "pipe: " + errno_text());
  }
  thread_ = std::thread([this] { run(); });
}

std::unique_ptr<FrameListener> FrameListener::open(const std::string& address, std::uint16_t port,
                                                   std::size_t queue_capacity) {
  if (queue_capacity == 0) throw Error(ErrorKind::Range, "listener queue capacity must be > 0");
  const sockaddr_in sa = resolve(address, port, ErrorKind::Bind);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(ErrorKind::Bind, "socket: " + errno_text());
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0 || ::listen(fd, 16) != 0) {
    const std::string why = errno_text();
    ::close(fd);
    throw Error(ErrorKind::Bind, address + ":" + std::to_string(port) + ": " + why);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  return std::unique_ptr<FrameListener>(new FrameListener(fd, ntohs(bound.sin_port), queue_capacity));
}

FrameListener::~FrameListener() { close(); }

void FrameListener::close() {
  if (stop_.exchange(true)) return;
  const char b = 1;
  [[maybe_unused]] auto n = ::write(wake_[1], &b, 1);
  if (thread_.joinable()) thread_.join();
  ::close(listen_fd_);
  ::close(wake_[0]);
  ::close(wake_[1]);
  cv_.notify_all();
}

void FrameListener::push(Frame f) {
  std::lock_guard lock(mu_);
  if (queue_.size() >= queue_capacity_) {
    queue_.pop_front();
    ++stats_.queue_drops;
  }
  queue_.push_back(std::move(f));
  ++stats_.frames;
  cv_.notify_one();
}

void FrameListener::run() {
  std::map<int, LineDecoder> clients;
  std::vector<pollfd> fds;
  char buf[4096];

  auto drop_client = [&](int fd) {
    auto it = clients.find(fd);
    if (it->second.discard_partial()) {
      std::lock_guard lock(mu_);
      ++stats_.partial_discards;
    }
    ::close(fd);
    clients.erase(it);
  };

  while (!stop_.load()) {
    fds.clear();
    fds.push_back({wake_[0], POLLIN, 0});
    fds.push_back({listen_fd_, POLLIN, 0});
    for (const auto& [fd, dec] : clients) fds.push_back({fd, POLLIN, 0});
    if (::poll(fds.data(), fds.size(), -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (fds[0].revents) break;
    if (fds[1].revents & POLLIN) {
      const int c = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (c >= 0) {
        clients.emplace(c, LineDecoder{});
        std::lock_guard lock(mu_);
        ++stats_.connections;
      }
    }
    for (std::size_t i = 2; i < fds.size(); ++i) {
      if (!fds[i].revents) continue;
      const int fd = fds[i].fd;
      const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n <= 0) {
        drop_client(fd);
        continue;
      }
      LineDecoder& dec = clients.at(fd);
      const std::uint64_t overlong_before = dec.overlong();
      const auto lines = dec.feed({buf, static_cast<std::size_t>(n)});
      if (dec.overlong() != overlong_before) {
        std::lock_guard lock(mu_);
        stats_.malformed += dec.overlong() - overlong_before;
      }
      for (const auto& line : lines) {
        if (line.empty()) continue;
        try {
          push(decode_frame(line));
        } catch (const Error&) {
          std::lock_guard lock(mu_);
          ++stats_.malformed;
        }
      }
    }
  }
  while (!clients.empty()) drop_client(clients.begin()->first);
}

std::optional<Frame> FrameListener::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || stop_.load(); });
  if (queue_.empty()) return std::nullopt;
  Frame f = std::move(queue_.front());
  queue_.pop_front();
  return f;
}

std::vector<Frame> FrameListener::drain() {
  std::lock_guard lock(mu_);
  std::vector<Frame> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

ListenerStats FrameListener::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

FrameSender FrameSender::connect(const std::string& address, std::uint16_t port) {
  const sockaddr_in sa = resolve(address, port, ErrorKind::Transport);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(ErrorKind::Transport, "socket: " + errno_text());
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
    const std::string why = errno_text();
    ::close(fd);
    throw Error(ErrorKind::Transport, address + ":" + std::to_string(port) + ": " + why);
  }
  return FrameSender(fd);
}

FrameSender::FrameSender(FrameSender&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

FrameSender& FrameSender::operator=(FrameSender&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

FrameSender::~FrameSender() { close(); }

void FrameSender::send(const Frame& frame) { send_raw(encode_frame(frame) + "\n"); }

void FrameSender::send_raw(std::string_view bytes) {
  if (fd_ < 0) throw Error(ErrorKind::Transport, "sender is closed");
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::Transport, "send: " + errno_text());
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void FrameSender::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace sowban::fabric
