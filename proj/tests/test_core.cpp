#include <doctest.h>

#include "antdt/config.hpp"
#include "antdt/error.hpp"
#include "antdt/presets.hpp"
#include "antdt/rng.hpp"
#include "antdt/types.hpp"

using namespace antdt;

namespace {

ScenarioConfig default_nd() {
  auto cfg = preset_config("nd-worker-si08");
  REQUIRE(cfg.has_value());
  return *cfg;
}

Action random_action(SeededRng& rng) {
  Action a;
  a.issue_iteration = static_cast<std::int64_t>(rng.bounded(100000));
  switch (rng.bounded(5)) {
    case 0: a.kind = Action::None{}; break;
    case 1: {
      Action::AdjustBs adj;
      const std::int32_t n = 1 + static_cast<std::int32_t>(rng.bounded(6));
      for (std::int32_t i = 0; i < n; ++i)
        adj.alloc.per_worker.push_back({i, 1 + static_cast<std::int64_t>(rng.bounded(5000)),
                                        1 + static_cast<std::int32_t>(rng.bounded(4))});
      a.kind = std::move(adj);
      break;
    }
    case 2: a.kind = Action::BackupWorkers{1 + static_cast<std::int32_t>(rng.bounded(5))}; break;
    case 3:
      a.kind = Action::KillRestart{rng.bounded(2) ? NodeId::worker(static_cast<std::int32_t>(rng.bounded(20)))
                                                  : NodeId::server(static_cast<std::int32_t>(rng.bounded(8)))};
      break;
    default: {
      Action::AdjustLr lr;
      lr.scales.push_back({0, 0.25 + rng.next_double()});
      a.kind = std::move(lr);
      break;
    }
  }
  return a;
}

}  // namespace

TEST_CASE("validate_config accepts the default AntDT-ND setup") {
  ScenarioConfig cfg = default_nd();
  // Cluster-A: 20 workers, 8 servers; lambda 1.5, windows 5/10 minutes.
  CHECK(cfg.n_workers == 20);
  CHECK(cfg.n_servers == 8);
  CHECK(cfg.detection.lambda == 1.5);
  CHECK(cfg.detection.window_transient == 300);
  CHECK(cfg.detection.window_persistent == 600);
  CHECK(validate_config(cfg).empty());
}

TEST_CASE("validate_config reports lambda at the boundary") {
  ScenarioConfig cfg = default_nd();
  cfg.detection.lambda = 1.0;
  const auto v = validate_config(cfg);
  REQUIRE(v.size() == 1);
  CHECK(v[0].path == "detection.lambda");
  CHECK(v[0].message == "lambda must exceed 1");
}

TEST_CASE("validate_config reports degenerate sample count") {
  ScenarioConfig cfg = default_nd();
  cfg.samples = 0;
  bool found = false;
  for (const auto& v : validate_config(cfg)) {
    if (v.path == "samples" && v.message.find("N >= B") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("config json round-trip is strict about unknown keys") {
  ScenarioConfig cfg = default_nd();
  json j = cfg.to_json();
  CHECK_NOTHROW(ScenarioConfig::from_json(j));
  j["typo_key"] = 1;
  CHECK_THROWS_AS(ScenarioConfig::from_json(j), ConfigError);

  json j2 = cfg.to_json();
  j2["detection"]["lamda"] = 1.5;
  CHECK_THROWS_WITH_AS(ScenarioConfig::from_json(j2), doctest::Contains("lamda"), ConfigError);
}

TEST_CASE("config survives serialize/parse unchanged") {
  for (const auto& p : presets()) {
    const json a = p.cfg.to_json();
    const json b = ScenarioConfig::from_json(a).to_json();
    CHECK(a == b);
  }
}

TEST_CASE("actions round-trip through serialization bit-exactly") {
  SeededRng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Action a = random_action(rng);
    const std::string wire = a.to_json().dump();
    const Action back = Action::from_json(json::parse(wire));
    CHECK(back == a);
    CHECK(back.to_json().dump() == wire);  // byte-stable for the agent protocol
  }
}

TEST_CASE("node ids serialize as [role, index]") {
  const NodeId n = NodeId::server(3);
  CHECK(n.to_json().dump() == "[\"server\",3]");
  CHECK(NodeId::from_json(json::parse("[\"worker\",7]")) == NodeId::worker(7));
  CHECK_THROWS_AS(NodeId::from_json(json::parse("[\"gpu\",1]")), ConfigError);
}

TEST_CASE("every preset validates") {
  CHECK(presets().size() >= 9);
  for (const auto& p : presets()) {
    INFO(p.name);
    CHECK(validate_config(p.cfg).empty());
  }
}
