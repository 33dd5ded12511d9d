#include "sowban/mhs/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sowban::mhs {

namespace {

constexpr std::uint32_t kMaxRecord = 64u << 20;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::uint32_t crc_of(std::string_view s) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

[[noreturn]] void io_fail(const std::string& what) {
  throw Error(ErrorKind::Io, what + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::string& what) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail(what);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void sync_dir(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

std::string frame_record(std::string_view payload) {
  std::string out;
  out.reserve(payload.size() + 8);
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  put_u32(out, crc_of(payload));
  out.append(payload);
  return out;
}

LogStore::LogStore(std::filesystem::path dir, bool fsync) : dir_(std::move(dir)), fsync_(fsync) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

LogStore::~LogStore() {
  if (fd_ >= 0) ::close(fd_);
}

void LogStore::open_log() {
  fd_ = ::open((dir_ / kLogFile).c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) io_fail("open log");
}

RecoveredLog LogStore::recover() {
  std::lock_guard lock(mu_);
  RecoveredLog out;
  if (dir_.empty()) return out;

  const auto snap_path = dir_ / kSnapshotFile;
  if (std::filesystem::exists(snap_path)) {
    std::ifstream in(snap_path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("format", 0) != 1 || !j.contains("state")) {
      throw Error(ErrorKind::Io, "snapshot " + snap_path.string() + " is unreadable");
    }
    out.snapshot_seq = j.value("log_seq", std::uint64_t{0});
    out.snapshot = std::move(j["state"]);
  }
  seq_ = out.snapshot_seq;

  const auto log_path = dir_ / kLogFile;
  std::string data;
  if (std::filesystem::exists(log_path)) {
    std::ifstream in(log_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    data = ss.str();
  }
  std::size_t pos = 0;
  while (pos + 8 <= data.size()) {
    const std::uint32_t len = get_u32(data.data() + pos);
    const std::uint32_t crc = get_u32(data.data() + pos + 4);
    if (len > kMaxRecord || pos + 8 + len > data.size()) break;
    const std::string_view payload(data.data() + pos + 8, len);
    if (crc_of(payload) != crc) break;
    auto j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("seq")) break;
    const auto seq = j["seq"].get<std::uint64_t>();
    pos += 8 + len;
    if (seq <= out.snapshot_seq) continue;
    seq_ = std::max(seq_, seq);
    ++since_snapshot_;
    out.records.push_back(std::move(j));
  }
  if (pos < data.size()) {
    out.torn_bytes = data.size() - pos;
    std::filesystem::resize_file(log_path, pos);
  }
  open_log();
  return out;
}

std::uint64_t LogStore::append(nlohmann::ordered_json record) {
  std::lock_guard lock(mu_);
  const std::uint64_t seq = seq_ + 1;
  record["seq"] = seq;
  if (!dir_.empty()) {
    if (fd_ < 0) open_log();
    const off_t before = ::lseek(fd_, 0, SEEK_END);
    try {
      write_all(fd_, frame_record(record.dump()), "append log");
      if (fsync_ && ::fdatasync(fd_) != 0) io_fail("sync log");
    } catch (...) {
      // Never leave a partial record in front of later appends.
      if (before >= 0) [[maybe_unused]] auto rc = ::ftruncate(fd_, before);
      throw;
    }
  }
  seq_ = seq;
  ++since_snapshot_;
  return seq;
}

void LogStore::snapshot(const nlohmann::ordered_json& state) {
  std::lock_guard lock(mu_);
  since_snapshot_ = 0;
  if (dir_.empty()) return;
  nlohmann::ordered_json j;
  j["format"] = 1;
  j["log_seq"] = seq_;
  j["state"] = state;
  const auto tmp = dir_ / "snapshot.json.tmp";
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("open snapshot");
    write_all(fd, j.dump(), "write snapshot");
    if (fsync_) ::fsync(fd);
    ::close(fd);
  }
  std::filesystem::rename(tmp, dir_ / kSnapshotFile);
  if (fsync_) sync_dir(dir_);
  // Records up to log_seq are covered; a crash before this truncation only
  // leaves records that replay skips.
  if (fd_ >= 0) ::close(fd_);
  fd_ = ::open((dir_ / kLogFile).c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) io_fail("reset log");
  if (fsync_) ::fsync(fd_);
}

std::uint64_t LogStore::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

std::uint64_t LogStore::records_since_snapshot() const {
  std::lock_guard lock(mu_);
  return since_snapshot_;
}

}  // namespace sowban::mhs
