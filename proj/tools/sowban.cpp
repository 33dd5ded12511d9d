#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "sowban/fabric/listener.hpp"
#include "sowban/forge/forge.hpp"
#include "sowban/mhs/http.hpp"
#include "sowban/mhs/service.hpp"
#include "sowban/ops/replay.hpp"
#include "sowban/ops/run.hpp"
#include "sowban/relay/client.hpp"

using namespace sowban;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signals() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

// Sampling rate of a trace from its first two timestamps.
double infer_fs(const std::string& path) {
  std::ifstream in(path);
  std::string header, a, b;
  if (!std::getline(in, header) || !std::getline(in, a) || !std::getline(in, b)) return 0.0;
  const double t0 = std::stod(a.substr(0, a.find(',')));
  const double t1 = std::stod(b.substr(0, b.find(',')));
  return t1 > t0 ? std::round(1.0 / (t1 - t0) * 1000.0) / 1000.0 : 0.0;
}

int cmd_run(const std::string& scenario, ops::RunOptions opt, const std::string& report_dir, bool hold) {
  const auto script = forge::load_scenario(scenario);
  if (hold && opt.serve_port) {
    install_signals();
    opt.hold = &g_stop;
  }
  if (opt.serve_port) {
    std::cerr << "serving MHS on 127.0.0.1:" << *opt.serve_port << " as '" << opt.principal << "'\n";
  }
  const ops::RunReport report = ops::run_scenario(script, opt);
  report.write(report_dir);
  std::cout << report.file("summary.txt")->content;
  std::cout << "reports written to " << report_dir << '\n';
  return report.exit_code();
}

int cmd_replay(const std::string& trace, const std::string& kind, std::optional<double> fs, const std::string& out_path) {
  const ops::TraceKind k = ops::trace_kind_from_string(kind);
  std::ifstream in(trace);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + trace);
  const double rate = fs.value_or(infer_fs(trace));
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw Error(ErrorKind::Io, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  ops::ReplayResult res;
  if (k == ops::TraceKind::Accel) {
    accel::NodeConfig cfg;
    if (rate > 0) cfg.fs = rate;
    res = ops::replay_accel(in, out, cfg);
  } else {
    oxi::OximeterConfig cfg;
    if (rate > 0) cfg.fs = rate;
    res = ops::replay_ppg(in, out, cfg);
  }
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_gen(const std::string& scenario, const std::string& kind, std::optional<double> fs,
            std::optional<std::uint64_t> seed, const std::string& out_path) {
  auto script = forge::load_scenario(scenario);
  if (seed) script.seed = *seed;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw Error(ErrorKind::Io, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  if (ops::trace_kind_from_string(kind) == ops::TraceKind::Accel) {
    forge::write_accel_csv(out, forge::gen_accel_trace(script, fs.value_or(script.accel_fs.value_or(50.0))));
  } else {
    forge::write_ppg_csv(out, forge::gen_ppg(script, {}, fs.value_or(script.ppg_fs.value_or(100.0))));
  }
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = mhs::kDefaultHttpPort;
  std::string data_dir = "mhs-data";
  std::string user = "practitioner";
  std::string password;
  std::string risk_model;
  bool no_fsync = false;
};

int cmd_serve(const ServeArgs& a) {
  mhs::ServiceConfig cfg;
  cfg.data_dir = a.data_dir;
  cfg.fsync = !a.no_fsync;
  if (!a.risk_model.empty()) {
    std::ifstream in(a.risk_model);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::Parse, a.risk_model + ": not JSON");
    cfg.risk = mhs::risk_model_from_json(j);
  }
  mhs::Service service(cfg);
  if (!a.password.empty()) service.ensure_practitioner(a.user, a.password);
  const auto st = service.stats();
  if (st.torn_bytes) std::cerr << "recovered: cut " << st.torn_bytes << " bytes of torn log tail\n";
  mhs::HttpServer http(service, a.host, a.port);
  install_signals();
  http.start();
  std::cerr << "MHS listening on " << a.host << ':' << http.port() << " (" << st.patients << " patients, "
            << st.packets << " packets)\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  http.stop();
  std::cerr << "stopped\n";
  return 0;
}

struct WatchArgs {
  std::string host = "127.0.0.1";
  int port = mhs::kDefaultHttpPort;
  std::string user;
  std::string password;
  double interval_s = 2.0;
  bool once = false;
};

// Patient-side view: new info items and alerts, polled.
int cmd_watch(const WatchArgs& a) {
  relay::MhsClient client(relay::http_transport(a.host, a.port));
  const auto session = client.login(a.user, a.password);
  client.set_token(session.token);
  relay::InfoSync info(a.user);
  std::optional<std::uint64_t> last_alert;
  install_signals();
  while (!g_stop) {
    for (const auto& it : info.sync(client)) {
      std::cout << "[" << api::to_string(it.kind) << "] " << it.text;
      if (it.at) std::cout << " @ " << format_double(*it.at);
      std::cout << '\n';
    }
    const auto feed = client.alerts_snapshot(std::nullopt, last_alert);
    for (const auto& e : feed["alerts"]) {
      std::cout << "ALERT #" << e["id"] << ' ' << e["severity"].get<std::string>() << " t=" << e["t"] << ' '
                << e["causes"].dump() << '\n';
    }
    last_alert = feed["last_id"].get<std::uint64_t>();
    std::cout.flush();
    if (a.once) break;
    std::this_thread::sleep_for(std::chrono::duration<double>(a.interval_s));
  }
  return 0;
}

int cmd_listen(const std::string& host, int port, std::size_t count) {
  auto listener = fabric::FrameListener::open(host, static_cast<std::uint16_t>(port));
  std::cerr << "listening for node frames on " << host << ':' << listener->port() << '\n';
  install_signals();
  std::size_t seen = 0;
  while (!g_stop && (count == 0 || seen < count)) {
    if (auto f = listener->pop(std::chrono::milliseconds(200))) {
      std::cout << fabric::encode_frame(*f) << '\n' << std::flush;
      ++seen;
    }
  }
  const auto st = listener->stats();
  std::cerr << st.frames << " frames, " << st.malformed << " malformed, " << st.connections << " connections\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sowban: body-area-network monitoring pipeline"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a scenario end to end and write reports");
  std::string scenario;
  std::string report_dir = "report";
  std::optional<std::uint64_t> seed;
  std::optional<double> fs;
  std::optional<int> slots;
  std::optional<int> serve_port;
  bool exact = false, hold = false;
  ops::RunOptions ropt;
  std::string run_data_dir;
  run->add_option("--scenario", scenario, "scenario script")->required()->envname("SOWBAN_SCENARIO");
  run->add_option("--seed", seed, "override the script seed")->envname("SOWBAN_SEED");
  run->add_option("--fs", fs, "accelerometer sampling rate, Hz")->envname("SOWBAN_FS");
  run->add_option("--slots", slots, "TDMA slots per superframe")->envname("SOWBAN_SLOTS");
  run->add_option("--serve", serve_port, "co-launch the MHS over HTTP on this port")->envname("SOWBAN_SERVE");
  run->add_option("--report-dir", report_dir, "report directory")->envname("SOWBAN_REPORT_DIR");
  run->add_flag("--exact-delta", exact, "send on any difference")->envname("SOWBAN_EXACT_DELTA");
  run->add_option("--pace", ropt.pace, "virtual seconds per wall second (0: flat out)")->envname("SOWBAN_PACE");
  run->add_option("--data-dir", run_data_dir, "durable MHS store (default: memory)")->envname("SOWBAN_DATA_DIR");
  run->add_option("--user", ropt.principal, "practitioner login")->envname("SOWBAN_USER");
  run->add_option("--password", ropt.password, "practitioner password")->envname("SOWBAN_PASSWORD");
  run->add_option("--patient-password", ropt.patient_password, "let the patient log in")
      ->envname("SOWBAN_PATIENT_PASSWORD");
  run->add_flag("--hold", hold, "with --serve, keep serving until interrupted");

  // replay
  auto* replay = app.add_subcommand("replay", "run a node pipeline over a recorded trace");
  std::string trace, kind = "accel", out_path;
  std::optional<double> replay_fs;
  replay->add_option("trace", trace, "trace CSV")->required();
  replay->add_option("--kind", kind, "accel or ppg")->envname("SOWBAN_KIND");
  replay->add_option("--fs", replay_fs, "sampling rate (default: inferred)")->envname("SOWBAN_FS");
  replay->add_option("-o,--out", out_path, "output CSV (default: stdout)");

  // gen
  auto* gen = app.add_subcommand("gen", "export a generated trace as CSV");
  std::string gen_scenario, gen_kind = "accel", gen_out;
  std::optional<double> gen_fs;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--scenario", gen_scenario, "scenario script")->required()->envname("SOWBAN_SCENARIO");
  gen->add_option("--kind", gen_kind, "accel or ppg");
  gen->add_option("--fs", gen_fs, "sampling rate, Hz")->envname("SOWBAN_FS");
  gen->add_option("--seed", gen_seed, "override the script seed")->envname("SOWBAN_SEED");
  gen->add_option("-o,--out", gen_out, "output CSV (default: stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "run the MHS HTTP API");
  ServeArgs sa;
  serve->add_option("--host", sa.host)->envname("SOWBAN_HOST");
  serve->add_option("--port", sa.port)->envname("SOWBAN_PORT");
  serve->add_option("--data-dir", sa.data_dir, "durable store directory")->envname("SOWBAN_DATA_DIR");
  serve->add_option("--user", sa.user, "practitioner login to create")->envname("SOWBAN_USER");
  serve->add_option("--password", sa.password, "its password")->envname("SOWBAN_PASSWORD");
  serve->add_option("--risk-model", sa.risk_model, "risk model JSON")->envname("SOWBAN_RISK_MODEL");
  serve->add_flag("--no-fsync", sa.no_fsync, "skip fdatasync (tests only)");

  // watch
  auto* watch = app.add_subcommand("watch", "patient view: info items and alerts");
  WatchArgs wa;
  watch->add_option("--host", wa.host)->envname("SOWBAN_HOST");
  watch->add_option("--port", wa.port)->envname("SOWBAN_PORT");
  watch->add_option("--user", wa.user, "patient id")->required()->envname("SOWBAN_USER");
  watch->add_option("--password", wa.password)->required()->envname("SOWBAN_PASSWORD");
  watch->add_option("--interval", wa.interval_s, "poll interval, s");
  watch->add_flag("--once", wa.once, "poll once and exit");

  // listen
  auto* listen = app.add_subcommand("listen", "print frames sent by body nodes over TCP");
  std::string listen_host = "127.0.0.1";
  int listen_port = fabric::kDefaultListenPort;
  std::size_t listen_count = 0;
  listen->add_option("--host", listen_host)->envname("SOWBAN_HOST");
  listen->add_option("--port", listen_port)->envname("SOWBAN_LISTEN_PORT");
  listen->add_option("--count", listen_count, "stop after N frames (0: run until interrupted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ropt.seed = seed;
      ropt.fs = fs;
      ropt.slots = slots;
      ropt.serve_port = serve_port;
      ropt.exact_delta = exact;
      ropt.data_dir = run_data_dir;
      return cmd_run(scenario, ropt, report_dir, hold);
    }
    if (*replay) return cmd_replay(trace, kind, replay_fs, out_path);
    if (*gen) return cmd_gen(gen_scenario, gen_kind, gen_fs, gen_seed, gen_out);
    if (*serve) return cmd_serve(sa);
    if (*watch) return cmd_watch(wa);
    if (*listen) return cmd_listen(listen_host, listen_port, listen_count);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
