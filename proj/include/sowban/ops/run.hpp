#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sowban/forge/scenario.hpp"

namespace sowban::ops {

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the script's seed
  std::optional<double> fs;           // accelerometer sampling rate, Hz
  std::optional<int> slots;           // TDMA superframe length
  std::optional<int> serve_port;      // co-launch the MHS over HTTP on this port
  bool exact_delta = false;           // send on any difference
  double pace = 0.0;                  // virtual seconds per wall second; 0 runs flat out
  std::filesystem::path data_dir;     // MHS durable store; empty keeps it in memory
  std::string principal = "practitioner";
  std::string password = "practitioner";
  std::string patient_password;  // non-empty: the patient can log in as their patient id
  // With serve_port: keep serving after the run until *hold becomes true.
  const std::atomic<bool>* hold = nullptr;
};

struct ReportFile {
  std::string name;
  std::string content;
};

struct RunReport {
  std::vector<ReportFile> files;
  std::vector<std::string> violations;  // tripped invariants

  int exit_code() const { return violations.empty() ? 0 : 1; }
  const ReportFile* file(const std::string& name) const;
  /// Writes every report file into `dir`, creating it.
  void write(const std::filesystem::path& dir) const;
};

/// Runs the whole pipeline on one virtual clock: generated sensor streams,
/// both body nodes, the TDMA fabric, the relay with delta suppression and the
/// MHS. Reports are a pure function of the script and options.
RunReport run_scenario(const forge::ScenarioScript& script, const RunOptions& options = {});

}  // namespace sowban::ops
