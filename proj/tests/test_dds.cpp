#include <doctest.h>

#include <set>

#include "antdt/dds.hpp"
#include "antdt/error.hpp"
#include "antdt/rng.hpp"
#include "antdt/services.hpp"

using namespace antdt;

namespace {

SimTime at(double s) { return SimTime::from_seconds(s); }

void check_conserved(const ShardLedger& l) {
  const auto p = l.epoch_progress();
  CHECK(p.todo + p.doing + p.done == l.total_shards());
}

}  // namespace

TEST_CASE("build_shards: Criteo-scale constants give K=6 with a short tail") {
  const auto l = ShardLedger::build(45'000'000, 81'920, 100, 0, 1);
  REQUIRE(l.total_shards() == 6);
  std::int64_t full = 0, tail = 0;
  for (std::int64_t id = 0; id < 6; ++id) {
    if (l.shard(id).length == 8'192'000) ++full;
    if (l.shard(id).length == 4'040'000) ++tail;
  }
  CHECK(full == 5);
  CHECK(tail == 1);
  CHECK(l.shard(5).length == 4'040'000);  // the remainder is the last range
}

TEST_CASE("build_shards: one full shard boundary") {
  const auto l = ShardLedger::build(300, 100, 3, 0, 9);
  REQUIRE(l.total_shards() == 1);
  CHECK(l.shard(0).start_offset == 0);
  CHECK(l.shard(0).length == 300);
}

TEST_CASE("build_shards: hand-enumerated small case") {
  const auto l = ShardLedger::build(10, 3, 1, 0, 4);
  REQUIRE(l.total_shards() == 4);
  CHECK(l.shard(0).length == 3);
  CHECK(l.shard(1).length == 3);
  CHECK(l.shard(2).length == 3);
  CHECK(l.shard(3).length == 1);
}

TEST_CASE("build_shards: shards partition the sample range exactly") {
  SeededRng rng(23);
  for (int i = 0; i < 100; ++i) {
    const std::int64_t B = 1 + static_cast<std::int64_t>(rng.bounded(50));
    const std::int64_t M = 1 + static_cast<std::int64_t>(rng.bounded(10));
    const std::int64_t N = 1 + static_cast<std::int64_t>(rng.bounded(5000));
    const auto l = ShardLedger::build(N, B, M, 0, rng.next_u64());
    const std::int64_t expect_k = (N + B * M - 1) / (B * M);
    CHECK(l.total_shards() == expect_k);
    std::int64_t covered = 0;
    for (std::int64_t id = 0; id < l.total_shards(); ++id) {
      CHECK(l.shard(id).start_offset == covered);
      CHECK(l.shard(id).length >= 1);
      if (id + 1 < l.total_shards()) CHECK(l.shard(id).length == B * M);
      covered += l.shard(id).length;
    }
    CHECK(covered == N);
  }
}

TEST_CASE("shuffle order is deterministic in (seed, epoch)") {
  auto a = ShardLedger::build(1000, 10, 5, 2, 77);
  auto b = ShardLedger::build(1000, 10, 5, 2, 77);
  auto c = ShardLedger::build(1000, 10, 5, 3, 77);
  std::vector<std::int64_t> oa, ob, oc;
  for (;;) {
    auto ra = a.fetch_shard(NodeId::worker(0), at(0));
    if (std::holds_alternative<ShardLedger::EpochExhausted>(ra)) break;
    oa.push_back(std::get<Shard>(ra).id);
    ob.push_back(std::get<Shard>(b.fetch_shard(NodeId::worker(0), at(0))).id);
    auto rc = c.fetch_shard(NodeId::worker(0), at(0));
    if (std::holds_alternative<Shard>(rc)) oc.push_back(std::get<Shard>(rc).id);
  }
  CHECK(oa == ob);
  CHECK(oa != oc);  // 20 shards: identical permutations across epochs are not credible
}

TEST_CASE("fetch pops in shuffled order and transitions to DOING") {
  auto l = ShardLedger::build(60, 10, 1, 0, 5);
  REQUIRE(l.total_shards() == 6);
  const auto r = l.fetch_shard(NodeId::worker(2), at(1.5));
  REQUIRE(std::holds_alternative<Shard>(r));
  const Shard s = std::get<Shard>(r);
  CHECK(l.state(s.id).phase == ShardState::Phase::Doing);
  CHECK(l.state(s.id).holder == NodeId::worker(2));
  check_conserved(l);
}

TEST_CASE("fetch on an empty queue reports epoch exhaustion while shards are in flight") {
  auto l = ShardLedger::build(20, 10, 1, 0, 5);
  (void)l.fetch_shard(NodeId::worker(0), at(0));
  (void)l.fetch_shard(NodeId::worker(1), at(0));
  const auto r = l.fetch_shard(NodeId::worker(2), at(0));
  CHECK(std::holds_alternative<ShardLedger::EpochExhausted>(r));
  const auto p = l.epoch_progress();
  CHECK(p.doing == 2);
  CHECK(p.done == 0);
}

TEST_CASE("servers cannot fetch shards") {
  auto l = ShardLedger::build(20, 10, 1, 0, 5);
  CHECK_THROWS_AS((void)l.fetch_shard(NodeId::server(0), at(0)), ProtocolError);
}

TEST_CASE("report_done enforces the holder and the lifecycle") {
  auto l = ShardLedger::build(20, 10, 1, 0, 5);
  const Shard s = std::get<Shard>(l.fetch_shard(NodeId::worker(1), at(0)));

  CHECK_THROWS_AS(l.report_done(s.id, NodeId::worker(2), at(1)), IllegalTransition);
  l.report_done(s.id, NodeId::worker(1), at(1));
  CHECK(l.state(s.id).phase == ShardState::Phase::Done);
  CHECK_THROWS_AS(l.report_done(s.id, NodeId::worker(1), at(2)), IllegalTransition);  // DONE is terminal

  const Shard other = std::get<Shard>(l.fetch_shard(NodeId::worker(0), at(2)));
  l.recover_node(NodeId::worker(0));
  CHECK_THROWS_AS(l.report_done(other.id, NodeId::worker(0), at(3)), IllegalTransition);  // back to TODO
  check_conserved(l);
}

TEST_CASE("recover_node requeues to the tail and is idempotent") {
  auto l = ShardLedger::build(60, 10, 1, 0, 5);
  const Shard s0 = std::get<Shard>(l.fetch_shard(NodeId::worker(0), at(0)));
  (void)l.fetch_shard(NodeId::worker(1), at(1));

  CHECK(l.recover_node(NodeId::worker(0)) == 1);
  check_conserved(l);
  CHECK(l.recover_node(NodeId::worker(0)) == 0);
  CHECK(l.recover_node(NodeId::worker(9)) == 0);

  // Drain the queue: the recovered shard must come out last.
  std::vector<std::int64_t> order;
  for (;;) {
    auto r = l.fetch_shard(NodeId::worker(3), at(2));
    if (std::holds_alternative<ShardLedger::EpochExhausted>(r)) break;
    order.push_back(std::get<Shard>(r).id);
  }
  REQUIRE(order.size() == 5);
  CHECK(order.back() == s0.id);
}

TEST_CASE("recover_node keeps lease order for multiple held shards") {
  auto l = ShardLedger::build(60, 10, 1, 0, 5);
  const Shard a = std::get<Shard>(l.fetch_shard(NodeId::worker(0), at(1)));
  const Shard b = std::get<Shard>(l.fetch_shard(NodeId::worker(0), at(2)));
  CHECK(l.recover_node(NodeId::worker(0)) == 2);
  std::vector<std::int64_t> order;
  for (;;) {
    auto r = l.fetch_shard(NodeId::worker(1), at(3));
    if (std::holds_alternative<ShardLedger::EpochExhausted>(r)) break;
    order.push_back(std::get<Shard>(r).id);
  }
  REQUIRE(order.size() == 6);
  CHECK(order[4] == a.id);
  CHECK(order[5] == b.id);
}

TEST_CASE("epoch progress counts") {
  auto l = ShardLedger::build(60, 10, 1, 0, 5);
  auto p = l.epoch_progress();
  CHECK(p.todo == 6);
  CHECK(p.doing == 0);
  CHECK(p.done == 0);

  const Shard s = std::get<Shard>(l.fetch_shard(NodeId::worker(0), at(0)));
  p = l.epoch_progress();
  CHECK(p.todo == 5);
  CHECK(p.doing == 1);

  l.report_done(s.id, NodeId::worker(0), at(1));
  for (;;) {
    auto r = l.fetch_shard(NodeId::worker(0), at(2));
    if (std::holds_alternative<ShardLedger::EpochExhausted>(r)) break;
    l.report_done(std::get<Shard>(r).id, NodeId::worker(0), at(2));
  }
  p = l.epoch_progress();
  CHECK(p.done == 6);
  CHECK(l.complete());
}

TEST_CASE("at-least-once: random failure schedules still cover the range exactly") {
  SeededRng rng(31);
  for (int round = 0; round < 50; ++round) {
    const std::int64_t N = 50 + static_cast<std::int64_t>(rng.bounded(500));
    const std::int64_t B = 1 + static_cast<std::int64_t>(rng.bounded(9));
    const std::int64_t M = 1 + static_cast<std::int64_t>(rng.bounded(4));
    auto l = ShardLedger::build(N, B, M, 0, rng.next_u64());
    const std::int32_t n_workers = 3;
    std::vector<std::optional<std::int64_t>> held(n_workers);

    while (!l.complete()) {
      const std::int32_t w = static_cast<std::int32_t>(rng.bounded(n_workers));
      const double dice = rng.next_double();
      if (held[static_cast<std::size_t>(w)]) {
        if (dice < 0.25) {
          l.recover_node(NodeId::worker(w));  // crash before completing
          held[static_cast<std::size_t>(w)].reset();
        } else {
          l.report_done(*held[static_cast<std::size_t>(w)], NodeId::worker(w), at(round));
          held[static_cast<std::size_t>(w)].reset();
        }
      } else {
        auto r = l.fetch_shard(NodeId::worker(w), at(round));
        if (std::holds_alternative<Shard>(r)) held[static_cast<std::size_t>(w)] = std::get<Shard>(r).id;
      }
      check_conserved(l);
    }

    const auto ranges = l.done_ranges();
    std::int64_t cursor = 0;
    for (const auto& [lo, hi] : ranges) {
      CHECK(lo == cursor);
      cursor = hi;
    }
    CHECK(cursor == N);
  }
}

TEST_CASE("even partition mode serves each worker only its own shards") {
  auto l = ShardLedger::build(120, 10, 1, 0, 3, /*partition_workers=*/3);
  REQUIRE(l.total_shards() == 12);
  std::set<std::int64_t> w0_ids;
  for (int i = 0; i < 4; ++i) {
    auto r = l.fetch_shard(NodeId::worker(0), at(0));
    REQUIRE(std::holds_alternative<Shard>(r));
    w0_ids.insert(std::get<Shard>(r).id);
  }
  CHECK(std::holds_alternative<ShardLedger::EpochExhausted>(l.fetch_shard(NodeId::worker(0), at(0))));
  // Other workers still see their own queues.
  CHECK(std::holds_alternative<Shard>(l.fetch_shard(NodeId::worker(1), at(0))));
  CHECK(w0_ids.size() == 4);
}

TEST_CASE("dds wire protocol over a real socket") {
  auto ledger = ShardLedger::build(60, 10, 1, 0, 5);
  SimTime now = at(0);
  DdsService service(std::move(ledger), [&now] { return now; });
  FramedServer server("127.0.0.1", 0, [&service](const json& req) { return service.handle(req); });
  FramedClient client("127.0.0.1", server.port());

  const json fetched = client.call(json{{"op", "fetch"}, {"worker", 0}});
  REQUIRE(fetched.contains("shard"));
  const std::int64_t id = fetched["shard"]["id"].get<std::int64_t>();
  CHECK(fetched["shard"]["len"] == 10);

  CHECK(client.call(json{{"op", "done"}, {"worker", 0}, {"shard", id}}) == json{{"ok", true}});

  const json progress = client.call(json{{"op", "progress"}});
  CHECK(progress["done"] == 1);
  CHECK(progress["todo"] == 5);
  CHECK(progress["doing"] == 0);

  (void)client.call(json{{"op", "fetch"}, {"worker", 1}});
  const json rec = client.call(json{{"op", "recover"}, {"node", json::array({"worker", 1})}});
  CHECK(rec == json{{"requeued", 1}});

  // Protocol errors surface as error payloads, not dropped connections.
  const json err = client.call(json{{"op", "done"}, {"worker", 0}, {"shard", id}});
  CHECK(err.contains("error"));

  server.stop();
}
