#include <doctest.h>

#include "antdt/error.hpp"
#include "antdt/monitor.hpp"
#include "antdt/services.hpp"

using namespace antdt;

namespace {

IterationRecord rec(NodeId node, std::int64_t iter, double wall, double t_w, std::int64_t batch = 4096,
                    double t_s = 0.05, double t_m = 0.05) {
  IterationRecord r;
  r.node = node;
  r.iteration = iter;
  r.wall_time = SimTime::from_seconds(wall);
  r.worker_compute = t_w;
  r.server_compute = t_s;
  r.comm = t_m;
  r.batch_size = batch;
  return r;
}

SimTime at(double s) { return SimTime::from_seconds(s); }

}  // namespace

TEST_CASE("ingest then query sees the records") {
  Monitor m;
  const NodeId w0 = NodeId::worker(0);
  m.ingest(rec(w0, 1, 1.0, 1.0));
  m.ingest(rec(w0, 2, 2.0, 2.0));
  m.ingest(rec(w0, 3, 3.0, 3.0));
  CHECK(m.mean_bpt(w0, 10, at(3)) == doctest::Approx(2.0));
}

TEST_CASE("out-of-order ingestion per node is rejected") {
  Monitor m;
  const NodeId w0 = NodeId::worker(0);
  m.ingest(rec(w0, 1, 5.0, 1.0));
  CHECK_THROWS_AS(m.ingest(rec(w0, 2, 4.0, 1.0)), OutOfOrder);
  // Other nodes are unaffected.
  CHECK_NOTHROW(m.ingest(rec(NodeId::worker(1), 1, 4.0, 1.0)));
}

TEST_CASE("window cut excludes old records without deleting them prematurely") {
  Monitor m;
  const NodeId w0 = NodeId::worker(0);
  m.ingest(rec(w0, 1, 1.0, 9.0));
  m.ingest(rec(w0, 2, 100.0, 2.0));
  CHECK(m.mean_bpt(w0, 50, at(100)) == doctest::Approx(2.0));
  // The old record is still reachable with a wide enough horizon.
  CHECK(m.mean_bpt(w0, 200, at(100)) == doctest::Approx(5.5));
}

TEST_CASE("empty window returns no data") {
  Monitor m;
  CHECK_FALSE(m.mean_bpt(NodeId::worker(0), 10, at(5)).has_value());
  m.ingest(rec(NodeId::worker(0), 1, 1.0, 1.0));
  CHECK_FALSE(m.mean_bpt(NodeId::worker(0), 10, at(500)).has_value());
}

TEST_CASE("server nodes aggregate their own compute time") {
  Monitor m;
  const NodeId s0 = NodeId::server(0);
  IterationRecord r = rec(s0, 1, 1.0, 0.0, 0);
  r.server_compute = 4.0;
  m.ingest(r);
  CHECK(m.mean_bpt(s0, 10, at(1)) == doctest::Approx(4.0));
}

TEST_CASE("fleet mean averages per-node means and skips empty nodes") {
  Monitor m;
  m.ingest(rec(NodeId::worker(0), 1, 1.0, 1.0));
  m.ingest(rec(NodeId::worker(1), 1, 1.0, 2.0));
  m.ingest(rec(NodeId::worker(2), 1, 1.0, 3.0));
  CHECK(m.fleet_mean_bpt(Role::Worker, 10, at(1)) == doctest::Approx(2.0));

  // A node whose data fell out of the window must not drag the mean.
  m.ingest(rec(NodeId::worker(3), 1, 2.0, 100.0));
  CHECK_FALSE(m.fleet_mean_bpt(Role::Worker, 10, at(300)).has_value());
  m.ingest(rec(NodeId::worker(0), 2, 300.0, 1.0));
  m.ingest(rec(NodeId::worker(1), 2, 300.0, 2.0));
  CHECK(m.fleet_mean_bpt(Role::Worker, 10, at(300)) == doctest::Approx(1.5));

  Monitor empty;
  CHECK_FALSE(empty.fleet_mean_bpt(Role::Worker, 10, at(0)).has_value());
}

TEST_CASE("throughput is the mean of per-record batch/time") {
  Monitor m;
  const NodeId w0 = NodeId::worker(0);
  m.ingest(rec(w0, 1, 1.0, 2.0, 4096));
  m.ingest(rec(w0, 2, 2.0, 4.0, 4096));
  CHECK(m.throughput(w0, 10, at(2)) == doctest::Approx(1536.0));  // (2048 + 1024) / 2

  Monitor single;
  single.ingest(rec(w0, 1, 1.0, 1.0, 100));
  CHECK(single.throughput(w0, 10, at(1)) == doctest::Approx(100.0));

  CHECK_FALSE(m.throughput(NodeId::worker(5), 10, at(2)).has_value());
}

TEST_CASE("zero-compute records are excluded from throughput and counted") {
  Monitor m;
  const NodeId w0 = NodeId::worker(0);
  m.ingest(rec(w0, 1, 1.0, 0.0, 4096));
  m.ingest(rec(w0, 2, 2.0, 2.0, 4096));
  CHECK(m.throughput(w0, 10, at(2)) == doctest::Approx(2048.0));
  CHECK(m.anomaly_count() == 1);
}

TEST_CASE("queries are pure: re-querying returns identical values") {
  Monitor m;
  m.ingest(rec(NodeId::worker(0), 1, 1.0, 1.25));
  m.ingest(rec(NodeId::worker(0), 2, 2.0, 1.75));
  const auto a = m.mean_bpt(NodeId::worker(0), 10, at(2));
  const auto b = m.mean_bpt(NodeId::worker(0), 10, at(2));
  CHECK(a == b);
}

TEST_CASE("constant stream has its constant as the mean at any horizon") {
  Monitor m;
  for (int i = 1; i <= 50; ++i) m.ingest(rec(NodeId::worker(0), i, i * 0.5, 1.234));
  for (double horizon : {1.0, 5.0, 24.9, 1000.0}) {
    CHECK(m.mean_bpt(NodeId::worker(0), horizon, at(25)) == doctest::Approx(1.234));
  }
}

TEST_CASE("throughput scales as 1/c under uniform time scaling") {
  Monitor base, scaled;
  const double c = 3.0;
  for (int i = 1; i <= 20; ++i) {
    base.ingest(rec(NodeId::worker(0), i, i, 0.5 + 0.01 * i, 1000));
    scaled.ingest(rec(NodeId::worker(0), i, i, c * (0.5 + 0.01 * i), 1000));
  }
  const double v = *base.throughput(NodeId::worker(0), 100, at(20));
  const double vs = *scaled.throughput(NodeId::worker(0), 100, at(20));
  CHECK(vs == doctest::Approx(v / c).epsilon(1e-12));
}

TEST_CASE("node events map to directives") {
  Monitor m;
  NodeEvent ev;
  ev.node = NodeId::worker(1);
  ev.at = at(10);
  ev.kind = NodeEvent::Kind::Terminated;
  ev.error = ErrorClass::retryable(ErrorClass::Cause::Eviction);
  CHECK(m.on_node_event(ev) == Directive::RequeueShards);

  ev.error = ErrorClass::unretryable(ErrorClass::Cause::ConfigError);
  CHECK(m.on_node_event(ev) == Directive::AbortJob);

  ev.node = NodeId::server(0);
  ev.error = ErrorClass::retryable(ErrorClass::Cause::NetworkError);
  CHECK(m.on_node_event(ev) == Directive::None);  // server recovery holds no shards

  ev.kind = NodeEvent::Kind::Launched;
  CHECK(m.on_node_event(ev) == Directive::None);
}

TEST_CASE("relaunch empties the node's window") {
  Monitor m;
  const NodeId w0 = NodeId::worker(0);
  m.ingest(rec(w0, 1, 1.0, 5.0));
  REQUIRE(m.mean_bpt(w0, 100, at(2)).has_value());
  NodeEvent ev;
  ev.node = w0;
  ev.at = at(3);
  ev.kind = NodeEvent::Kind::Launched;
  m.on_node_event(ev);
  CHECK_FALSE(m.mean_bpt(w0, 100, at(3)).has_value());
  CHECK(m.launch_time(w0) == at(3));
}

TEST_CASE("cluster busy signal follows the pending-time threshold") {
  Monitor m(Monitor::Options{1200, 0, 120});
  CHECK_FALSE(m.cluster_signal().busy);
  m.set_pending_time(121);
  CHECK(m.cluster_signal().busy);
  CHECK(m.cluster_signal().pending_time == 121);
}

TEST_CASE("monitor wire protocol") {
  MonitorService svc;
  FramedServer server("127.0.0.1", 0, [&svc](const json& req) { return svc.handle(req); });
  FramedClient client("127.0.0.1", server.port());

  json ingest = rec(NodeId::worker(0), 1, 1.0, 2.0, 4096).to_json();
  ingest["op"] = "ingest";
  CHECK(client.call(ingest) == json{{"ok", true}});

  const json q = client.call(json{
      {"op", "query"}, {"kind", "mean_bpt"}, {"node", json::array({"worker", 0})}, {"horizon", 10}, {"now", 1.0}});
  CHECK(q["value"].get<double>() == doctest::Approx(2.0));

  const json fleet = client.call(json{{"op", "query"}, {"kind", "fleet"}, {"role", "worker"}, {"horizon", 10}, {"now", 1.0}});
  CHECK(fleet["value"].get<double>() == doctest::Approx(2.0));

  const json nodata = client.call(json{
      {"op", "query"}, {"kind", "throughput"}, {"node", json::array({"worker", 3})}, {"horizon", 10}, {"now", 1.0}});
  CHECK(nodata == json{{"no_data", true}});

  const json ev = client.call(json{{"op", "event"},
                                   {"node", json::array({"worker", 0})},
                                   {"at", 5.0},
                                   {"kind", "terminated"},
                                   {"error", json{{"class", "retryable"}, {"cause", "eviction"}}}});
  CHECK(ev == json{{"directive", "requeue_shards"}});

  server.stop();
}
