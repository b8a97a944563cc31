#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "antdt/config.hpp"
#include "antdt/time.hpp"
#include "antdt/types.hpp"

namespace antdt {

struct RunMetrics {
  SimTime jct;
  bool aborted = false;
  std::int64_t iterations = 0;  // BSP global iterations / ASP total worker cycles
  std::int32_t epochs_completed = 0;
  std::vector<std::int64_t> done_shards_per_worker;
  std::int64_t processed_samples = 0;   // committed consumption, recomputation included
  std::int64_t recomputed_samples = 0;  // samples consumed more than once
  std::int64_t actions_adjust_bs = 0;
  std::int64_t actions_kill = 0;
  std::int64_t actions_backup = 0;
  std::int64_t actions_none = 0;
  SimTime sync_overhead;
  double sync_overhead_fraction = 0;
  std::int64_t envelopes_applied = 0;
  std::int64_t envelopes_aborted = 0;
  std::int64_t late_envelopes = 0;

  json to_json() const;
};

struct TraceRow {
  SimTime t;
  NodeId node;
  double bpt = 0;  // T^w + T^s + T^m for the node's iteration
  std::int64_t batch = 0;
};

struct RunResult {
  RunMetrics metrics;
  std::string event_log;        // JSON lines, one event per line
  std::vector<TraceRow> trace;  // per-iteration per-node rows when requested
};

struct RunOptions {
  bool collect_trace = false;
};

// Deterministic discrete-event simulation of one scenario. Identical config
// and seed produce a byte-identical event log.
RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {});

// Scheduling + application part of a KILL_RESTART: pending time (busy or
// idle queue) plus node init plus state restore.
SimTime kill_restart_downtime(const FailoverConfig& f, bool cluster_busy);

// BSP barrier rule: iteration duration is the largest accepted finish time
// after dropping the `backup_b` slowest workers.
double bsp_gate_duration(std::vector<double> durations, std::int32_t backup_b);

// Injected straggler delays, evaluated functionally from (node, time) so
// event order never perturbs draws.
class PatternOracle {
 public:
  PatternOracle(const ScenarioConfig& cfg) : cfg_(cfg) {}

  // Additive per-iteration compute delay (transient windows + persistent).
  double compute_delay(NodeId node, SimTime t, bool persistent_cleared) const;
  // 2x when a persistent comm pattern targets the node.
  double comm_factor(NodeId node, bool persistent_cleared) const;
  // Product of deterministic speed multipliers targeting the node.
  double speed_multiplier(NodeId node) const;

 private:
  const ScenarioConfig& cfg_;
};

}  // namespace antdt
