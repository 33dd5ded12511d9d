#include <doctest.h>

#include <random>
#include <set>

#include "sowban/relay/relay.hpp"
#include "sowban/relay/uploader.hpp"

using namespace sowban;
using namespace sowban::relay;
using namespace std::chrono_literals;

namespace {

VitalsPacket pkt(double t, double spo2 = 97.0, double hr = 72.0, StateId a = StateId::Resting,
                 LatLon loc = {51.5, -0.12}) {
  VitalsPacket p;
  p.patient_id = "P1";
  p.t = t;
  p.activity = a;
  p.spo2 = spo2;
  p.hr = hr;
  p.location = loc;
  return p;
}

// Independent reading comparison with the default tolerances, written
// without reference to the library's differs().
bool oracle_changed(const VitalsPacket& a, const VitalsPacket& b) {
  constexpr double kPi = 3.14159265358979323846;
  const double la1 = a.location.lat * kPi / 180, la2 = b.location.lat * kPi / 180;
  const double dla = la2 - la1, dlo = (b.location.lon - a.location.lon) * kPi / 180;
  const double h = std::pow(std::sin(dla / 2), 2) + std::cos(la1) * std::cos(la2) * std::pow(std::sin(dlo / 2), 2);
  const double dist = 2 * 6371008.8 * std::asin(std::sqrt(h));
  return a.activity != b.activity || !(std::abs(a.spo2 - b.spo2) < 1.0) || !(std::abs(a.hr - b.hr) < 1.0) ||
         !(dist < 10.0);
}

// The CIN loop executed literally: the first reading initialises bsData2 and
// goes out; afterwards a reading goes out iff bsData1 != bsData2.
template <class Neq>
std::vector<std::size_t> literal_replay(const std::vector<VitalsPacket>& stream, Neq neq) {
  std::vector<std::size_t> sent;
  std::optional<VitalsPacket> bsData1, bsData2;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (!bsData1) {
      bsData1 = stream[i];
      bsData2 = bsData1;
      sent.push_back(i);
    } else {
      bsData1 = stream[i];
      if (neq(*bsData1, *bsData2)) {
        sent.push_back(i);
        bsData2 = bsData1;
      }
    }
  }
  return sent;
}

std::vector<std::size_t> run_should_send(const std::vector<VitalsPacket>& stream, const DeltaConfig& cfg) {
  std::vector<std::size_t> sent;
  DeltaState st;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    auto d = should_send(stream[i], st, cfg);
    if (d.send) sent.push_back(i);
    st = d.state;
  }
  return sent;
}

LatLon offset_m(LatLon base, double north_m, double east_m) {
  constexpr double kPi = 3.14159265358979323846;
  const double dlat = north_m / 6371008.8 * 180 / kPi;
  const double dlon = east_m / (6371008.8 * std::cos(base.lat * kPi / 180)) * 180 / kPi;
  return {base.lat + dlat, base.lon + dlon};
}

// Stream of `n` packets with `k` seeded change events: between events, the
// monitored values jitter below their thresholds.
std::vector<VitalsPacket> change_stream(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::set<std::size_t> events;
  while (events.size() < k) events.insert(1 + rng() % (n - 1));
  double spo2 = 96.0, hr = 70.0;
  int act = 1;
  LatLon loc{51.5, -0.12};
  std::vector<VitalsPacket> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (events.count(i)) {
      switch (rng() % 4) {
        case 0:
          spo2 += (spo2 > 93 ? -1 : 1) * (2.0 + 3.0 * std::abs(u(rng)));
          break;
        case 1:
          hr += (hr > 90 ? -1 : 1) * (3.0 + 10.0 * std::abs(u(rng)));
          break;
        case 2:
          act = act == 1 ? 2 + static_cast<int>(rng() % 2) : 1;
          break;
        default:
          loc = offset_m(loc, 40.0 + 30.0 * std::abs(u(rng)), 20.0 * u(rng));
          break;
      }
    }
    out.push_back(pkt(static_cast<double>(i), spo2 + 0.3 * u(rng), hr + 0.4 * u(rng),
                      static_cast<StateId>(act), offset_m(loc, 2.0 * u(rng), 2.0 * u(rng))));
  }
  return out;
}

// Minimal enterData server: dedup on (patient_id, t_us), optional failure
// script consulted per call.
struct FakeServer {
  std::set<std::pair<std::string, std::int64_t>> keys;
  std::vector<VitalsPacket> stored;
  std::vector<int> script;  // per call: 0 ok, 503 error, -1 connection failure, 1 process-then-fail, 401
  std::size_t calls = 0;

  api::ApiResponse operator()(const api::ApiRequest& req) {
    const int action = calls < script.size() ? script[calls] : 0;
    ++calls;
    if (action == -1) return {0, "text/plain", "connection refused"};
    if (action == 503) return api::error_response(503, "unavailable", "down");
    if (action == 401) return api::error_response(401, "unauthorized", "bad token");
    REQUIRE(req.path == "/enterData");
    CHECK(req.header("authorization") == "Bearer tok");
    const auto j = nlohmann::json::parse(req.body);
    api::EnterAck ack;
    std::size_t idx = 0;
    for (const auto& pj : j["packets"]) {
      const VitalsPacket p = packet_from_json(pj);
      api::PacketResult r;
      r.index = idx++;
      if (keys.insert({p.patient_id, time_key_us(p.t)}).second) {
        stored.push_back(p);
        ++ack.accepted;
      } else {
        r.status = api::Disposition::Deduped;
        ++ack.deduped;
      }
      ack.results.push_back(r);
    }
    if (action == 1) return {0, "text/plain", "connection reset"};
    return api::json_response(200, api::to_json(ack));
  }
};

}  // namespace

TEST_CASE("equal packets are sent once") {
  std::vector<VitalsPacket> s;
  for (int i = 0; i < 10; ++i) s.push_back(pkt(i));
  CHECK(run_should_send(s, {}) == std::vector<std::size_t>{0});
  CHECK(run_should_send(s, DeltaConfig::exact_mode()) == std::vector<std::size_t>{0});
}

TEST_CASE("A A B B B A sends A B A") {
  const double vals[] = {97, 97, 94, 94, 94, 97};
  std::vector<VitalsPacket> s;
  for (int i = 0; i < 6; ++i) s.push_back(pkt(i, vals[i]));
  const auto literal = literal_replay(s, [](const VitalsPacket& a, const VitalsPacket& b) {
    return a.spo2 != b.spo2;
  });
  CHECK(literal == std::vector<std::size_t>{0, 2, 5});
  CHECK(run_should_send(s, {}) == literal);
  CHECK(run_should_send(s, DeltaConfig::exact_mode()) == literal);
}

TEST_CASE("sub-threshold changes are suppressed") {
  DeltaState st;
  st = should_send(pkt(0), st).state;
  auto d = should_send(pkt(1, 97.4), st);
  CHECK_FALSE(d.send);
  CHECK(d.state.bs_data2->t == 0.0);
  CHECK_FALSE(should_send(pkt(1, 97.0, 72.9), st).send);
  CHECK(should_send(pkt(1, 98.0), st).send);
  CHECK(should_send(pkt(1, 97.0, 73.0), st).send);
  CHECK(should_send(pkt(1, 97.0, 72.0, StateId::Walking), st).send);
  CHECK_FALSE(should_send(pkt(1, 97.0, 72.0, StateId::Resting, offset_m({51.5, -0.12}, 9.0, 0)), st).send);
  CHECK(should_send(pkt(1, 97.0, 72.0, StateId::Resting, offset_m({51.5, -0.12}, 10.5, 0)), st).send);
  CHECK(should_send(pkt(1, 97.4), st, DeltaConfig::exact_mode()).send);
}

TEST_CASE("whole-record mode compares flags") {
  DeltaState st;
  st = should_send(pkt(0), st).state;
  auto flagged = pkt(1);
  flagged.flags = flags::kTooFewPeaks;
  CHECK_FALSE(should_send(flagged, st).send);
  DeltaConfig whole;
  whole.whole_record = true;
  CHECK(should_send(flagged, st, whole).send);
}

TEST_CASE("falls bypass suppression") {
  DeltaState st;
  const auto fall = pkt(0, 97, 72, StateId::Falling);
  st = should_send(fall, st).state;
  CHECK(should_send(pkt(1, 97, 72, StateId::Falling), st).send);
  DeltaConfig no_bypass;
  no_bypass.fall_bypass = false;
  CHECK_FALSE(should_send(pkt(1, 97, 72, StateId::Falling), st, no_bypass).send);
}

TEST_CASE("k change events give k+1 transmissions matching the literal replay") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto s = change_stream(1000, 37, seed);
    const auto oracle = literal_replay(s, oracle_changed);
    CHECK(oracle.size() == 38);
    CHECK(run_should_send(s, {}) == oracle);
  }
}

TEST_CASE("relay assembles one packet per epoch once both node kinds reported") {
  std::vector<double> asked;
  Relay r("P1", {}, [&](double t) {
    asked.push_back(t);
    return LatLon{1.0, 2.0};
  });
  CHECK_FALSE(r.epoch(1.0));
  r.on_fragment({"P1", 0.5, fabric::ActivityFragment{StateId::Walking}});
  CHECK_FALSE(r.epoch(2.0));
  r.on_fragment({"P2", 0.5, fabric::OxiFragment{90.0, 60.0, 0}});
  CHECK(r.stats().foreign_fragments == 1);
  CHECK_FALSE(r.epoch(3.0));
  CHECK(r.stats().incomplete == 3);
  r.on_fragment({"P1", 3.5, fabric::OxiFragment{96.0, std::nullopt, flags::kTooFewPeaks}});
  auto p = r.epoch(4.0);
  REQUIRE(p);
  CHECK(p->t == 4.0);
  CHECK(p->activity == StateId::Walking);
  CHECK(p->spo2 == 96.0);
  CHECK(p->hr == 0.0);
  CHECK(p->flags == flags::kTooFewPeaks);
  CHECK(p->location == LatLon{1.0, 2.0});
  CHECK_FALSE(r.epoch(5.0));
  CHECK(r.stats().suppressed == 1);
  CHECK(r.last_assembled()->t == 5.0);
  CHECK(r.delta().bs_data2->t == 4.0);
  r.on_fragment({"P1", 5.5, fabric::ActivityFragment{StateId::Running}});
  CHECK(r.epoch(6.0));
  CHECK(r.stats().sent == 2);
}

TEST_CASE("backoff doubles up to the cap") {
  UploaderConfig cfg;
  std::vector<long> got;
  for (int i = 1; i <= 9; ++i) got.push_back(backoff_delay(cfg, i).count());
  CHECK(got == std::vector<long>{1000, 2000, 4000, 8000, 16000, 32000, 60000, 60000, 60000});
}

TEST_CASE("healthy upload") {
  FakeServer srv;
  MhsClient client(std::ref(srv));
  client.set_token("tok");
  std::vector<std::chrono::milliseconds> slept;
  Uploader up(client, {}, [&](auto d) { slept.push_back(d); });
  for (int i = 0; i < 5; ++i) CHECK(up.submit(pkt(i)));
  CHECK(up.flush() == FlushStatus::Drained);
  CHECK(up.stats().accepted == 5);
  CHECK(srv.stored.size() == 5);
  CHECK(slept.empty());
  CHECK(up.pending() == 0);
}

TEST_CASE("outage then recovery acks every packet exactly once") {
  FakeServer srv;
  // 503, then the server stores the batch but the reply is lost, then a refused connection.
  srv.script = {503, 1, -1};
  MhsClient client(std::ref(srv));
  client.set_token("tok");
  std::vector<std::chrono::milliseconds> slept;
  UploaderConfig cfg;
  cfg.batch_size = 3;
  Uploader up(client, cfg, [&](auto d) { slept.push_back(d); });
  for (int i = 0; i < 5; ++i) up.submit(pkt(i));
  CHECK(up.flush() == FlushStatus::Drained);
  CHECK(slept == std::vector<std::chrono::milliseconds>{1000ms, 2000ms, 4000ms});
  CHECK(srv.stored.size() == 5);
  std::set<double> ts;
  for (const auto& p : srv.stored) ts.insert(p.t);
  CHECK(ts.size() == 5);
  const auto st = up.stats();
  CHECK(st.accepted == 2);  // second batch
  CHECK(st.deduped == 3);   // replay of the batch whose reply was lost
  CHECK(st.retries == 3);
}

TEST_CASE("bad token is terminal and holds packets") {
  FakeServer srv;
  srv.script = {401};
  MhsClient client(std::ref(srv));
  client.set_token("tok");
  int sleeps = 0;
  Uploader up(client, {}, [&](auto) { ++sleeps; });
  for (int i = 0; i < 5; ++i) up.submit(pkt(i));
  CHECK(up.flush() == FlushStatus::Terminal);
  CHECK(up.pending() == 5);
  CHECK(sleeps == 0);
  CHECK(srv.calls == 1);
  REQUIRE(up.terminal_error());
  CHECK(up.flush() == FlushStatus::Terminal);
  CHECK(srv.calls == 1);
  up.clear_terminal();
  CHECK(up.flush() == FlushStatus::Drained);
  CHECK(srv.stored.size() == 5);
}

TEST_CASE("bounded attempts give up and keep the queue") {
  FakeServer srv;
  srv.script = {-1, -1, -1, -1};
  MhsClient client(std::ref(srv));
  client.set_token("tok");
  UploaderConfig cfg;
  cfg.max_attempts = 3;
  Uploader up(client, cfg, [](auto) {});
  up.submit(pkt(0));
  CHECK(up.flush() == FlushStatus::GaveUp);
  CHECK(up.pending() == 1);
  CHECK(srv.calls == 3);
}

TEST_CASE("queue is bounded") {
  FakeServer srv;
  MhsClient client(std::ref(srv));
  UploaderConfig cfg;
  cfg.queue_capacity = 3;
  Uploader up(client, cfg);
  for (int i = 0; i < 5; ++i) up.submit(pkt(i));
  CHECK(up.pending() == 3);
  CHECK(up.stats().queue_drops == 2);
}

TEST_CASE("worker drains in the background") {
  FakeServer srv;
  srv.script = {503};
  MhsClient client(std::ref(srv));
  client.set_token("tok");
  UploaderConfig cfg;
  cfg.initial_backoff = 1ms;
  cfg.batch_size = 7;
  Uploader up(client, cfg);
  up.start();
  for (int i = 0; i < 100; ++i) up.submit(pkt(i));
  up.stop(true);
  CHECK(up.pending() == 0);
  CHECK(srv.stored.size() == 100);
  for (std::size_t i = 0; i < srv.stored.size(); ++i) CHECK(srv.stored[i].t == static_cast<double>(i));
}

TEST_CASE("info sync cursor") {
  std::vector<api::InfoItem> items;
  bool fail = false;
  MhsClient client([&](const api::ApiRequest& req) {
    if (fail) return api::ApiResponse{0, "text/plain", "down"};
    REQUIRE(req.path == "/downloadInfo");
    const auto since = std::stoull(req.query.at("since"));
    nlohmann::ordered_json j;
    j["items"] = nlohmann::ordered_json::array();
    std::uint64_t cursor = since;
    for (const auto& it : items) {
      if (it.id > since) {
        j["items"].push_back(api::to_json(it));
        cursor = std::max(cursor, it.id);
      }
    }
    j["cursor"] = cursor;
    return api::json_response(200, j);
  });
  InfoSync sync("P1");
  CHECK(sync.sync(client).empty());
  CHECK(sync.cursor() == 0);
  items.push_back({1, "P1", api::InfoKind::Prescription, "aspirin", std::nullopt});
  items.push_back({2, "P1", api::InfoKind::Consultation, "clinic", 3600.0});
  fail = true;
  CHECK_THROWS_AS(sync.sync(client), Error);
  CHECK(sync.cursor() == 0);
  fail = false;
  const auto got = sync.sync(client);
  CHECK(got == items);
  CHECK(sync.cursor() == 2);
  CHECK(sync.sync(client).empty());
  CHECK(sync.cursor() == 2);
}

TEST_CASE("client maps statuses to error kinds") {
  int status = 401;
  MhsClient client([&](const api::ApiRequest&) { return api::error_response(status, "x", "msg"); });
  auto kind_of = [&] {
    try {
      client.view_patient("P1");
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind_of() == ErrorKind::Auth);
  status = 403;
  CHECK(kind_of() == ErrorKind::Forbidden);
  status = 404;
  CHECK(kind_of() == ErrorKind::NotFound);
  status = 409;
  CHECK(kind_of() == ErrorKind::Conflict);
  status = 500;
  CHECK(kind_of() == ErrorKind::Transport);
}
