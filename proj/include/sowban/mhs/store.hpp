#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sowban/types.hpp"

namespace sowban::mhs {

/// Encodes one log record: u32 little-endian payload length, u32 little-endian
/// CRC-32 of the payload, payload bytes.
std::string frame_record(std::string_view payload);

struct RecoveredLog {
  std::optional<nlohmann::json> snapshot;  // state saved by the last snapshot
  std::uint64_t snapshot_seq = 0;
  std::vector<nlohmann::json> records;  // log records after the snapshot, in order
  std::uint64_t torn_bytes = 0;         // bytes cut from a damaged tail
};

/// Durable append-only log with snapshots. Every record gets a sequence
/// number ("seq"); a snapshot remembers the last seq it covers so replay can
/// skip records the snapshot already contains. An empty directory path keeps
/// everything in memory.
class LogStore {
 public:
  static constexpr const char* kLogFile = "log.bin";
  static constexpr const char* kSnapshotFile = "snapshot.json";

  explicit LogStore(std::filesystem::path dir, bool fsync = true);
  ~LogStore();
  LogStore(const LogStore&) = delete;
  LogStore& operator=(const LogStore&) = delete;

  /// Reads the snapshot and the log, truncating a torn tail. Call once before
  /// appending.
  RecoveredLog recover();

  /// Assigns the next seq, writes and syncs. Returns the seq.
  std::uint64_t append(nlohmann::ordered_json record);

  /// Writes `state` as the snapshot for everything appended so far, then
  /// starts an empty log.
  void snapshot(const nlohmann::ordered_json& state);

  std::uint64_t last_seq() const;
  std::uint64_t records_since_snapshot() const;
  bool persistent() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void open_log();

  std::filesystem::path dir_;
  bool fsync_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::uint64_t seq_ = 0;
  std::uint64_t since_snapshot_ = 0;
};

}  // namespace sowban::mhs
