#include "sowban/ops/run.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "sowban/accel/node.hpp"
#include "sowban/fabric/fabric.hpp"
#include "sowban/forge/forge.hpp"
#include "sowban/mhs/http.hpp"
#include "sowban/mhs/service.hpp"
#include "sowban/ops/replay.hpp"
#include "sowban/oxi/oximeter.hpp"
#include "sowban/relay/client.hpp"
#include "sowban/relay/relay.hpp"
#include "sowban/relay/uploader.hpp"

namespace sowban::ops {

namespace {

using fabric::Micros;

constexpr std::uint32_t kAccelNode = 1;
constexpr std::uint32_t kOxiNode = 2;

Micros to_us(double t) { return static_cast<Micros>(std::llround(t * 1e6)); }

struct Accuracy {
  std::size_t n = 0;
  double sum = 0.0;
  double max = 0.0;
  void add(double err) {
    ++n;
    sum += err;
    max = std::max(max, err);
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

class Metrics {
 public:
  void add(const std::string& name, const std::string& value) { rows_.emplace_back(name, value); }
  void add(const std::string& name, std::uint64_t v) { add(name, std::to_string(v)); }
  void add(const std::string& name, double v) { add(name, format_double(v)); }
  std::string csv() const {
    std::string out = "metric,value\n";
    for (const auto& [k, v] : rows_) out += k + ',' + v + '\n';
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

std::string packet_csv_row(const nlohmann::json& p) {
  auto num = [](const nlohmann::json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); };
  return num(p["t"]) + ',' + std::to_string(p["activity"].get<int>()) + ',' + num(p["spo2"]) + ',' +
         num(p["hr"]) + ',' + num(p["lat"]) + ',' + num(p["lon"]) + ',' +
         std::to_string(p["flags"].get<unsigned>()) + ',' + num(p["risk"]) + ',' +
         (p["alert_id"].is_null() ? std::string() : std::to_string(p["alert_id"].get<std::uint64_t>()));
}

// Label the node should emit for a window inside segment `seg`. Stillness
// after a fall keeps reporting the fall until the node goes back to sleep;
// windows too close to that moment are not scored.
std::optional<StateId> expected_state(const forge::ScenarioScript& script, std::size_t seg, double t0,
                                      double timeout_s) {
  const StateId own = script.segments[seg].activity;
  if (own != StateId::Resting) return own;
  std::size_t k = seg;
  while (k > 0 && script.segments[k - 1].activity == StateId::Resting) --k;
  if (k == 0 || script.segments[k - 1].activity != StateId::Falling) return own;
  const double since_fall = t0 - script.segment_start(k - 1);
  if (since_fall < timeout_s - 10.0) return StateId::Falling;
  if (since_fall < timeout_s + 10.0) return std::nullopt;
  return own;
}

}  // namespace

const ReportFile* RunReport::file(const std::string& name) const {
  for (const auto& f : files) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

void RunReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& f : files) {
    std::ofstream out(dir / f.name, std::ios::binary | std::ios::trunc);
    out << f.content;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / f.name).string());
  }
}

RunReport run_scenario(const forge::ScenarioScript& input, const RunOptions& opt) {
  forge::ScenarioScript script = input;
  if (opt.seed) script.seed = *opt.seed;
  forge::validate(script);
  const bool double_slot =
      std::find(script.faults.begin(), script.faults.end(), "double-slot") != script.faults.end();

  accel::NodeConfig acfg;
  acfg.fs = opt.fs.value_or(script.accel_fs.value_or(50.0));
  oxi::OximeterConfig ocfg;
  ocfg.fs = script.ppg_fs.value_or(100.0);
  ocfg.validate();
  fabric::TdmaConfig tcfg;
  if (opt.slots) tcfg.superframe_slots = *opt.slots;
  tcfg.validate();

  const auto accel_trace = forge::gen_accel_trace(script, acfg.fs);
  const auto ppg_trace = forge::gen_ppg(script, ocfg.constants, ocfg.fs);

  // Medical health server, in process or behind HTTP.
  mhs::ServiceConfig scfg;
  scfg.data_dir = opt.data_dir;
  scfg.fsync = !opt.data_dir.empty();
  mhs::Service service(scfg);
  service.ensure_practitioner(opt.principal, opt.password);
  std::unique_ptr<mhs::HttpServer> http;
  api::ApiHandler transport;
  if (opt.serve_port) {
    http = std::make_unique<mhs::HttpServer>(service, "127.0.0.1", *opt.serve_port);
    http->start();
    transport = relay::http_transport("127.0.0.1", http->port());
  } else {
    transport = [&service](const api::ApiRequest& r) { return service.handle(r); };
  }
  relay::MhsClient client(transport);
  client.set_token(client.login(opt.principal, opt.password).token);
  const std::string pid =
      client.add_patient({script.patient_name, script.patient_mrn, opt.patient_password}, script.patient_mrn);

  fabric::Fabric fab(tcfg);
  fab.register_node({kAccelNode, fabric::NodeKind::Accel, pid, {{"fs", acfg.fs}}, -1});
  fab.register_node({kOxiNode, fabric::NodeKind::Oximeter, pid, {{"fs", ocfg.fs}}, -1});
  if (double_slot) fab.inject_assignment(kOxiNode, fab.node(kAccelNode).assigned_slot);

  relay::Relay cin(pid, opt.exact_delta ? relay::DeltaConfig::exact_mode() : relay::DeltaConfig{},
                   [&script](double t) { return script.location_at(t); });
  relay::UploaderConfig ucfg;
  ucfg.max_attempts = 8;
  relay::Uploader uploader(client, ucfg);

  accel::AccelNode anode(acfg);
  oxi::OximeterNode onode(ocfg);

  std::string windows = std::string(kWindowsHeader) + '\n';
  std::string readings = std::string(kReadingsHeader) + '\n';
  std::vector<std::string> violations;
  // confusion[truth-1][emission-1]; column 4 counts windows without an emission.
  std::array<std::array<std::uint64_t, 5>, 4> confusion{};
  std::uint64_t interior_windows = 0, misclassified = 0;
  Accuracy spo2_err, hr_err;
  std::uint64_t upload_failures = 0;

  auto deliver = [&](Micros now) {
    for (const auto& d : fab.tick(now)) cin.on_fragment(d.frame.payload);
  };

  auto on_window = [&](const accel::WindowReport& rep) {
    windows += window_row(rep) + '\n';
    const double t0 = rep.window.t_start;
    const auto seg = script.segment_index(t0);
    const auto truth_state = expected_state(script, seg, t0, acfg.inactivity_timeout_s);
    if (script.segment_index(t0 + 0.999) == seg && t0 + 1.0 <= script.total_duration() + 1e-9 && truth_state) {
      const int truth = to_int(*truth_state);
      const int col = rep.emission ? to_int(*rep.emission) - 1 : 4;
      ++confusion[truth - 1][col];
      ++interior_windows;
      if (col != truth - 1) ++misclassified;
    }
    if (rep.emission) {
      fab.enqueue(kAccelNode, {pid, t0 + 1.0, fabric::ActivityFragment{*rep.emission}});
    }
  };

  auto on_reading = [&](const oxi::OxiReading& r) {
    readings += reading_row(r) + '\n';
    const double from = r.t - ocfg.window_s;
    const auto seg = script.segment_index(r.t - 1e-9);
    if (from >= 0.0 && script.segment_index(from) == seg) {
      spo2_err.add(std::fabs(r.spo2 - 100.0 * script.segments[seg].spo2_true));
      if (r.hr) hr_err.add(std::fabs(*r.hr - script.segments[seg].hr_true));
    }
    fab.enqueue(kOxiNode, {pid, r.t, fabric::OxiFragment{r.spo2, r.hr, r.flags}});
  };

  const double total = script.total_duration();
  const auto epochs = static_cast<long long>(std::floor(total + 1e-9));
  std::size_t ia = 0, ip = 0;
  for (long long e = 1; e <= epochs; ++e) {
    const double te = static_cast<double>(e);
    for (;;) {
      const bool a_ok = ia < accel_trace.size() && accel_trace[ia].t < te;
      const bool p_ok = ip < ppg_trace.size() && ppg_trace[ip].t < te;
      if (!a_ok && !p_ok) break;
      if (a_ok && (!p_ok || accel_trace[ia].t <= ppg_trace[ip].t)) {
        deliver(to_us(accel_trace[ia].t));
        if (auto rep = anode.push(accel_trace[ia])) on_window(*rep);
        ++ia;
      } else {
        deliver(to_us(ppg_trace[ip].t));
        if (auto r = onode.push(ppg_trace[ip])) on_reading(*r);
        ++ip;
      }
    }
    deliver(to_us(te));
    if (auto p = cin.epoch(te)) uploader.submit(*p);
    if (uploader.flush() != relay::FlushStatus::Drained) ++upload_failures;
    if (opt.pace > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(1.0 / opt.pace));
  }
  anode.discard_partial();

  // What the server holds for this patient.
  std::string packets = "t,activity,spo2,hr,lat,lon,flags,risk,alert_id\n";
  std::uint64_t stored = 0;
  std::optional<VitalsPacket> latest;
  std::string cursor;
  for (;;) {
    const auto page = client.collect_data(pid, std::nullopt, std::nullopt, cursor, 1000);
    for (const auto& p : page["packets"]) {
      packets += packet_csv_row(p) + '\n';
      latest = packet_from_json(p);
      ++stored;
    }
    if (!page["has_more"].get<bool>()) break;
    cursor = page["next_cursor"].get<std::string>();
  }
  std::string alerts = "id,t,severity,causes,risk,lat,lon\n";
  std::uint64_t alert_count = 0, critical = 0;
  const auto feed = client.alerts_snapshot(pid);
  for (const auto& a : feed["alerts"]) {
    std::string causes;
    for (const auto& c : a["causes"]) causes += (causes.empty() ? "" : "|") + c.get<std::string>();
    alerts += std::to_string(a["id"].get<std::uint64_t>()) + ',' + format_double(a["t"].get<double>()) + ',' +
              a["severity"].get<std::string>() + ',' + causes + ',' + format_double(a["risk"].get<double>()) + ',' +
              (a["location"].is_null() ? std::string(",")
                                       : format_double(a["location"]["lat"].get<double>()) + ',' +
                                             format_double(a["location"]["lon"].get<double>())) +
              '\n';
    ++alert_count;
    critical += a["severity"] == "critical";
  }

  // Invariants.
  const auto& fm = fab.metrics();
  const double beacon_share = static_cast<double>(tcfg.beacon_listen_us) / static_cast<double>(tcfg.superframe_us());
  const double duty_bound = 1.0 / tcfg.superframe_slots + beacon_share;
  double worst_duty = 0.0;
  for (std::uint32_t id : {kAccelNode, kOxiNode}) worst_duty = std::max(worst_duty, fab.power(id).duty_cycle());
  const auto& bs2 = cin.delta().bs_data2;
  const auto& rs = cin.stats();

  if (fm.collisions > 0) violations.push_back("collisions: " + std::to_string(fm.collisions) + " slots");
  if (fm.overflow_drops > 0) violations.push_back("queue overflow drops: " + std::to_string(fm.overflow_drops));
  if (worst_duty > duty_bound + 1e-12) {
    violations.push_back("radio duty cycle " + format_double(worst_duty) + " exceeds " + format_double(duty_bound));
  }
  if (misclassified > 0) {
    violations.push_back("misclassified interior windows: " + std::to_string(misclassified));
  }
  if (upload_failures > 0 || uploader.pending() > 0) violations.push_back("uploads did not drain");
  if (stored != rs.sent) {
    violations.push_back("server holds " + std::to_string(stored) + " packets, relay sent " + std::to_string(rs.sent));
  }
  if (bs2 != latest) violations.push_back("server latest state differs from the relay's last sent packet");

  const auto us = uploader.stats();
  Metrics m;
  m.add("duration_s", total);
  m.add("seed", script.seed);
  m.add("accel_fs_hz", acfg.fs);
  m.add("ppg_fs_hz", ocfg.fs);
  m.add("superframe_slots", static_cast<std::uint64_t>(tcfg.superframe_slots));
  m.add("superframes", fm.superframes);
  m.add("frames_delivered", fm.delivered);
  m.add("collisions", fm.collisions);
  m.add("collision_drops", fm.collision_drops);
  m.add("overflow_drops", fm.overflow_drops);
  m.add("duty_cycle_max", worst_duty);
  m.add("duty_cycle_bound", duty_bound);
  m.add("windows_interior", interior_windows);
  m.add("windows_misclassified", misclassified);
  m.add("spo2_abs_err_mean_pts", spo2_err.mean());
  m.add("spo2_abs_err_max_pts", spo2_err.max);
  m.add("hr_abs_err_mean_bpm", hr_err.mean());
  m.add("hr_abs_err_max_bpm", hr_err.max);
  m.add("relay_epochs", rs.epochs);
  m.add("relay_incomplete", rs.incomplete);
  m.add("relay_sent", rs.sent);
  m.add("relay_suppressed", rs.suppressed);
  m.add("upload_batches", us.batches);
  m.add("upload_accepted", us.accepted);
  m.add("upload_deduped", us.deduped);
  m.add("upload_rejected", us.rejected);
  m.add("server_packets", stored);
  m.add("alerts", alert_count);
  m.add("alerts_critical", critical);
  m.add("violations", static_cast<std::uint64_t>(violations.size()));

  std::string confusion_csv = "truth,pred_1,pred_2,pred_3,pred_4,none\n";
  for (int t = 0; t < 4; ++t) {
    confusion_csv += std::to_string(t + 1);
    for (auto n : confusion[static_cast<std::size_t>(t)]) confusion_csv += ',' + std::to_string(n);
    confusion_csv += '\n';
  }

  std::ostringstream power;
  fab.write_power_csv(power);

  std::ostringstream sum;
  sum << "scenario seed " << script.seed << ", " << format_double(total) << " s, " << script.segments.size()
      << " segments\n";
  sum << "patient " << pid << " (" << script.patient_name << ")\n";
  sum << "sampling: accel " << format_double(acfg.fs) << " Hz, ppg " << format_double(ocfg.fs) << " Hz\n";
  sum << "tdma: " << tcfg.superframe_slots << " slots x " << tcfg.slot_us / 1000 << " ms";
  if (double_slot) sum << ", fault double-slot injected";
  sum << '\n';
  sum << "delta mode: " << (opt.exact_delta ? "exact" : "thresholded") << '\n';
  sum << "\nfabric: " << fm.delivered << " frames delivered, " << fm.collisions << " collisions, duty max "
      << format_double(worst_duty) << " (bound " << format_double(duty_bound) << ")\n";
  sum << "activity: " << interior_windows << " interior windows, " << misclassified
      << " misclassified (stillness after a fall counts as ID 4)\n";
  sum << "oximetry: spo2 err mean " << format_double(spo2_err.mean()) << " pts, hr err mean "
      << format_double(hr_err.mean()) << " bpm\n";
  sum << "relay: " << rs.epochs << " epochs, " << rs.sent << " sent, " << rs.suppressed << " suppressed\n";
  sum << "server: " << stored << " packets, " << alert_count << " alerts (" << critical << " critical)\n";
  sum << '\n';
  if (violations.empty()) {
    sum << "invariants: all hold\n";
  } else {
    for (const auto& v : violations) sum << "VIOLATION " << v << '\n';
  }

  RunReport report;
  report.violations = violations;
  report.files = {{"summary.txt", sum.str()},   {"metrics.csv", m.csv()},       {"windows.csv", windows},
                  {"readings.csv", readings},   {"packets.csv", packets},       {"alerts.csv", alerts},
                  {"confusion.csv", confusion_csv}, {"power.csv", power.str()}};

  if (http && opt.hold) {
    while (!opt.hold->load()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  if (http) http->stop();
  return report;
}

}  // namespace sowban::ops
