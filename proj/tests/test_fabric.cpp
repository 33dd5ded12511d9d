#include <doctest.h>

#include <random>
#include <sstream>
#include <thread>

#include "sowban/fabric/fabric.hpp"
#include "sowban/fabric/listener.hpp"

using namespace sowban;
using namespace sowban::fabric;
using namespace std::chrono_literals;

namespace {

NodeDescriptor desc(std::uint32_t id, NodeKind kind = NodeKind::Accel, std::string pid = "p1") {
  NodeDescriptor d;
  d.node_id = id;
  d.kind = kind;
  d.patient_id = std::move(pid);
  return d;
}

Fragment activity(double t, StateId s = StateId::Walking, std::string pid = "p1") {
  return {std::move(pid), t, ActivityFragment{s}};
}

Fragment oxi(double t, double spo2, std::optional<double> hr, unsigned f = 0) {
  return {"p1", t, OxiFragment{spo2, hr, f}};
}

constexpr Micros kSec = 1'000'000;

// Frame-arrival oracle: wait until `n` frames are queued or the deadline passes.
std::vector<Frame> collect(FrameListener& l, std::size_t n) {
  std::vector<Frame> got;
  while (got.size() < n) {
    auto f = l.pop(2000ms);
    if (!f) break;
    got.push_back(*f);
  }
  return got;
}

template <class Pred>
bool eventually(Pred p) {
  for (int i = 0; i < 400; ++i) {
    if (p()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return p();
}

}  // namespace

TEST_CASE("frame codec round trip") {
  Frame a{3, 17, 1.25, activity(4.0, StateId::Falling)};
  CHECK(decode_frame(encode_frame(a)) == a);
  Frame b{9, 0, 0.0, oxi(12.0, 96.5, 71.25, 3)};
  CHECK(decode_frame(encode_frame(b)) == b);
  Frame c{9, 1, 0.1, oxi(13.0, 0.0, std::nullopt, 4)};
  CHECK(decode_frame(encode_frame(c)) == c);
  CHECK(encode_frame(a).find('\n') == std::string::npos);
}

TEST_CASE("frame decode rejects malformed input") {
  const char* bad[] = {
      "",
      "{",
      "[]",
      R"({"v":2,"src":1,"seq":0,"t_tx":0,"pid":"p","t":0,"kind":"activity","state":1})",
      R"({"src":1,"seq":0,"t_tx":0,"pid":"p","t":0,"kind":"activity","state":1})",
      R"({"v":1,"src":-1,"seq":0,"t_tx":0,"pid":"p","t":0,"kind":"activity","state":1})",
      R"({"v":1,"src":1,"seq":0,"t_tx":0,"pid":"p","t":0,"kind":"activity","state":5})",
      R"({"v":1,"src":1,"seq":0,"t_tx":0,"pid":7,"t":0,"kind":"activity","state":1})",
      R"({"v":1,"src":1,"seq":0,"t_tx":0,"pid":"p","t":"x","kind":"activity","state":1})",
      R"({"v":1,"src":1,"seq":0,"t_tx":0,"pid":"p","t":0,"kind":"gps"})",
      R"({"v":1,"src":1,"seq":0,"t_tx":0,"pid":"p","t":0,"kind":"oxi","spo2":97})",
  };
  for (const char* s : bad) {
    CAPTURE(s);
    try {
      decode_frame(s);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Parse);
    }
  }
}

TEST_CASE("register_node assigns lowest free slot") {
  Fabric fab;
  CHECK(fab.register_node(desc(10)) == 1);
  CHECK(fab.register_node(desc(11)) == 2);
  CHECK(fab.node(11).assigned_slot == 2);
  for (std::uint32_t id = 12; id < 17; ++id) fab.register_node(desc(id));
  CHECK(fab.schedule().valid());
  try {
    fab.register_node(desc(17));
    FAIL("8th data node accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capacity);
  }
  Fabric other;
  other.register_node(desc(1));
  try {
    other.register_node(desc(1));
    FAIL("duplicate accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Conflict);
  }
  CHECK(other.schedule().owners(2).empty());
}

TEST_CASE("nodes_for_patient") {
  Fabric fab;
  fab.register_node(desc(1, NodeKind::Accel, "a"));
  fab.register_node(desc(2, NodeKind::Oximeter, "b"));
  fab.register_node(desc(3, NodeKind::Oximeter, "a"));
  CHECK(fab.nodes_for_patient("a") == std::vector<std::uint32_t>{1, 3});
  CHECK(fab.nodes_for_patient("z").empty());
}

TEST_CASE("two nodes deliver in slot order without collisions") {
  Fabric fab;
  fab.register_node(desc(20));
  fab.register_node(desc(21, NodeKind::Oximeter));
  // enqueue in reverse of slot order
  fab.enqueue(21, oxi(0.0, 97.0, 72.0));
  fab.enqueue(20, activity(0.0));
  fab.enqueue(20, activity(0.0, StateId::Running));
  const auto d = fab.tick(400'000);
  REQUIRE(d.size() == 3);
  CHECK(d[0].frame.src == 20);
  CHECK(d[0].slot == 1);
  CHECK(d[0].frame.seq == 0);
  CHECK(d[1].frame.src == 20);
  CHECK(d[1].frame.seq == 1);
  CHECK(d[2].frame.src == 21);
  CHECK(d[2].slot == 2);
  CHECK(d[0].t_rx_us == 100'000);
  CHECK(d[2].t_rx_us == 150'000);
  CHECK(d[0].frame.t_tx == doctest::Approx(0.05));
  CHECK(fab.metrics().collisions == 0);
  CHECK(fab.metrics().delivered == 3);
}

TEST_CASE("frames wait for the first slot starting after enqueue") {
  Fabric fab;
  fab.register_node(desc(1));
  fab.tick(60'000);  // slot 1 of the first superframe is in progress
  fab.enqueue(1, activity(0.0));
  CHECK(fab.tick(400'000).empty());
  const auto d = fab.tick(500'000);
  REQUIRE(d.size() == 1);
  CHECK(d[0].t_rx_us == 500'000);
}

TEST_CASE("adversarial double assignment collides and drops frames") {
  Fabric fab;
  fab.register_node(desc(1));
  fab.register_node(desc(2));
  fab.inject_assignment(2, 1);
  CHECK_FALSE(fab.schedule().valid());
  fab.enqueue(1, activity(0.0));
  fab.enqueue(2, activity(0.0));
  const auto d = fab.tick(400'000);
  CHECK(fab.metrics().collisions == 1);
  CHECK(fab.metrics().collision_drops == 2);
  CHECK(d.empty());
  CHECK(fab.queued(1) == 0);
  CHECK(fab.queued(2) == 0);

  // A lone transmitter in the shared slot still gets through.
  fab.enqueue(1, activity(1.0));
  const auto d2 = fab.tick(800'000);
  REQUIRE(d2.size() == 1);
  CHECK(d2[0].frame.src == 1);
  CHECK(fab.metrics().collisions == 1);
}

TEST_CASE("power ledger accounting replay") {
  // Oracle: every node pays sensor and controller current for all elapsed
  // time, plus radio current for each beacon listen and for each slot in
  // which it actually transmits.
  const TdmaConfig cfg;
  const PowerCurrents cur;
  Fabric fab(cfg, cur);
  fab.register_node(desc(1));  // idle
  fab.register_node(desc(2));  // transmits every superframe
  const int superframes = 50;
  for (int k = 0; k < superframes; ++k) {
    fab.enqueue(2, activity(k));
    fab.tick((k + 1) * cfg.superframe_us());
  }
  const double elapsed = superframes * 0.4;
  const double beacons = superframes * 0.002;

  const PowerEntry& idle = fab.power(1);
  CHECK(idle.elapsed_us == superframes * 400'000);
  CHECK(idle.sensor_mAs == doctest::Approx(0.023 * elapsed).epsilon(1e-12));
  CHECK(idle.controller_mAs == doctest::Approx(40.0 * elapsed).epsilon(1e-12));
  CHECK(idle.radio_on_us == superframes * 2'000);
  CHECK(idle.radio_mAs == doctest::Approx(38.0 * beacons).epsilon(1e-12));

  const PowerEntry& busy = fab.power(2);
  CHECK(busy.radio_on_us == superframes * (2'000 + 50'000));
  CHECK(busy.radio_mAs == doctest::Approx(38.0 * (beacons + superframes * 0.05)).epsilon(1e-12));
  CHECK(busy.duty_cycle() == doctest::Approx(52.0 / 400.0));

  std::ostringstream csv;
  fab.write_power_csv(csv);
  CHECK(csv.str().rfind("node_id,kind,patient_id,slots,sent,", 0) == 0);
  CHECK(csv.str().find("\n2,accel,p1,1,50,") != std::string::npos);
}

TEST_CASE("seven nodes stay collision free and within the duty-cycle bound") {
  const TdmaConfig cfg;
  Fabric fab(cfg);
  for (std::uint32_t id = 1; id <= 7; ++id) fab.register_node(desc(id, id % 2 ? NodeKind::Accel : NodeKind::Oximeter));
  std::map<std::uint32_t, std::uint64_t> next_seq;
  const int seconds = 2000;
  std::uint64_t delivered = 0;
  for (int s = 0; s < seconds; ++s) {
    for (std::uint32_t id = 1; id <= 7; ++id) fab.enqueue(id, activity(s));
    for (const auto& d : fab.tick((s + 1) * kSec)) {
      CHECK(d.frame.seq == next_seq[d.frame.src]++);
      ++delivered;
    }
  }
  CHECK(fab.metrics().collisions == 0);
  CHECK(fab.metrics().overflow_drops == 0);
  CHECK(delivered == 7u * seconds);
  const double beacon_overhead = 2'000.0 / 400'000.0;
  for (std::uint32_t id = 1; id <= 7; ++id) {
    CHECK(fab.power(id).duty_cycle() <= 1.0 / 8.0 + beacon_overhead + 1e-12);
  }
}

TEST_CASE("randomized valid schedules never collide") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    TdmaConfig cfg;
    cfg.superframe_slots = 2 + static_cast<int>(rng() % 15);
    Fabric fab(cfg);
    const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.superframe_slots - 1));
    for (int i = 0; i < n; ++i) fab.register_node(desc(static_cast<std::uint32_t>(100 + i)));
    CHECK(fab.schedule().valid());
    Micros now = 0;
    for (int step = 0; step < 200; ++step) {
      const auto id = static_cast<std::uint32_t>(100 + rng() % static_cast<unsigned>(n));
      fab.enqueue(id, activity(step));
      now += static_cast<Micros>(rng() % 300'000);
      fab.tick(now);
    }
    CHECK(fab.metrics().collisions == 0);
    for (int i = 0; i < n; ++i) {
      const auto& p = fab.power(static_cast<std::uint32_t>(100 + i));
      const double bound = static_cast<double>(1 + fab.schedule().slot_count(100 + i)) / cfg.superframe_slots;
      CHECK(p.duty_cycle() <= bound + 1e-12);
    }
  }
}

TEST_CASE("queue overflow drops the oldest frame") {
  TdmaConfig cfg;
  cfg.queue_capacity = 4;
  Fabric fab(cfg);
  fab.register_node(desc(1));
  for (int i = 0; i < 6; ++i) fab.enqueue(1, activity(i));
  CHECK(fab.metrics().overflow_drops == 2);
  const auto d = fab.tick(cfg.superframe_us());
  REQUIRE(d.size() == 4);
  CHECK(d.front().frame.seq == 2);
  CHECK(d.back().frame.seq == 5);
}

TEST_CASE("slot byte budget spreads a backlog over superframes") {
  TdmaConfig cfg;
  cfg.bitrate_bps = 64'000;  // 400 bytes per 50 ms slot
  Fabric fab(cfg);
  fab.register_node(desc(1));
  const std::size_t one = encode_frame(Frame{1, 0, 0.05, activity(0.0)}).size() + 1;
  const std::size_t per_slot = cfg.slot_capacity_bytes() / one;
  REQUIRE(per_slot >= 1);
  for (int i = 0; i < 10; ++i) fab.enqueue(1, activity(0.0));
  const auto d = fab.tick(cfg.superframe_us());
  CHECK(d.size() == per_slot);
  Fragment big{std::string(500, 'x'), 0.0, ActivityFragment{}};
  try {
    fab.enqueue(1, big);
    FAIL("oversized frame accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capacity);
  }
}

TEST_CASE("identical inputs give identical timelines and ledgers") {
  auto run = [] {
    Fabric fab;
    for (std::uint32_t id = 1; id <= 3; ++id) fab.register_node(desc(id));
    std::ostringstream out;
    std::mt19937_64 rng(42);
    for (int s = 0; s < 200; ++s) {
      for (std::uint32_t id = 1; id <= 3; ++id) {
        if (rng() % 3 == 0) fab.enqueue(id, activity(s));
      }
      for (const auto& d : fab.tick((s + 1) * kSec)) out << d.t_rx_us << ' ' << encode_frame(d.frame) << '\n';
    }
    fab.write_power_csv(out);
    fab.write_metrics_csv(out);
    return out.str();
  };
  CHECK(run() == run());
}

TEST_CASE("line decoder") {
  LineDecoder dec(8);
  auto a = dec.feed("ab\ncd");
  CHECK(a == std::vector<std::string>{"ab"});
  CHECK(dec.pending() == 2);
  auto b = dec.feed("e\r\n0123456789abc\nok\n");
  CHECK(b == std::vector<std::string>{"cde", "ok"});
  CHECK(dec.overlong() == 1);
  dec.feed("tail");
  CHECK(dec.discard_partial());
  CHECK_FALSE(dec.discard_partial());
}

TEST_CASE("listener receives frames in order") {
  auto l = FrameListener::open("127.0.0.1", 0);
  REQUIRE(l->port() != 0);
  auto tx = FrameSender::connect("127.0.0.1", l->port());
  std::vector<Frame> sent;
  for (std::uint64_t i = 0; i < 3; ++i) {
    sent.push_back(Frame{5, i, 0.1 * static_cast<double>(i), activity(static_cast<double>(i))});
    tx.send(sent.back());
  }
  CHECK(collect(*l, 3) == sent);
  CHECK(l->stats().frames == 3);
  CHECK(l->stats().malformed == 0);
}

TEST_CASE("listener on the default port, and bind conflict") {
  std::unique_ptr<FrameListener> l;
  try {
    l = FrameListener::open();
  } catch (const Error& e) {
    // Something else on this host owns 60000; the conflict path is still checked below.
    CHECK(e.kind() == ErrorKind::Bind);
  }
  if (l) CHECK(l->port() == kDefaultListenPort);

  auto a = FrameListener::open("127.0.0.1", 0);
  try {
    FrameListener::open("127.0.0.1", a->port());
    FAIL("second bind succeeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Bind);
  }
}

TEST_CASE("fuzzed malformed lines are rejected and the stream survives") {
  auto l = FrameListener::open("127.0.0.1", 0);
  auto tx = FrameSender::connect("127.0.0.1", l->port());
  std::mt19937_64 rng(99);
  const std::string good = encode_frame(Frame{1, 0, 0.0, activity(0.0)});
  int bad = 0;
  std::uint64_t seq = 0;
  for (int i = 0; i < 200; ++i) {
    std::string line = good;
    switch (rng() % 4) {
      case 0:  // flip bytes
        for (int k = 0; k < 3; ++k) line[rng() % line.size()] = static_cast<char>('!' + rng() % 90);
        break;
      case 1:  // truncate
        line.resize(rng() % line.size());
        break;
      case 2:  // random garbage
        line.clear();
        for (int k = 0; k < 20; ++k) line.push_back(static_cast<char>(1 + rng() % 126));
        break;
      default:
        break;
    }
    std::erase(line, '\n');
    if (line.empty()) continue;
    bool ok = true;
    try {
      decode_frame(line);
    } catch (const Error&) {
      ok = false;
    }
    if (ok) {
      line = encode_frame(Frame{1, seq++, 0.0, activity(0.0)});
    } else {
      ++bad;
    }
    tx.send_raw(line + "\n");
  }
  tx.send(Frame{1, seq++, 0.0, activity(0.0)});
  const auto got = collect(*l, seq);
  CHECK(got.size() == seq);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].seq == i);
  CHECK(bad > 50);
  CHECK(eventually([&] { return l->stats().malformed == static_cast<std::uint64_t>(bad); }));
}

TEST_CASE("close mid-stream discards the partial frame") {
  auto l = FrameListener::open("127.0.0.1", 0);
  {
    auto tx = FrameSender::connect("127.0.0.1", l->port());
    tx.send(Frame{1, 0, 0.0, activity(0.0)});
    const std::string half = encode_frame(Frame{1, 1, 0.0, activity(1.0)});
    tx.send_raw(half.substr(0, half.size() / 2));
  }
  CHECK(collect(*l, 1).size() == 1);
  CHECK(eventually([&] { return l->stats().partial_discards == 1; }));
  CHECK(l->stats().frames == 1);

  // listener torn down while a client still holds a partial line
  auto tx2 = FrameSender::connect("127.0.0.1", l->port());
  CHECK(eventually([&] { return l->stats().connections == 2; }));
  tx2.send_raw("{\"v\":1,");
  std::this_thread::sleep_for(20ms);
  l->close();
  CHECK(l->stats().partial_discards == 2);
  CHECK_FALSE(l->pop(1ms).has_value());
}
