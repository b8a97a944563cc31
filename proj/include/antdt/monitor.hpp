#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>

#include "antdt/time.hpp"
#include "antdt/types.hpp"

namespace antdt {

struct ErrorClass {
  enum class Kind { Retryable, Unretryable };
  enum class Cause { ProactiveKill, NetworkError, Eviction, ConfigError, ProgramError };
  Kind kind = Kind::Retryable;
  Cause cause = Cause::Eviction;

  static ErrorClass retryable(Cause c) { return {Kind::Retryable, c}; }
  static ErrorClass unretryable(Cause c) { return {Kind::Unretryable, c}; }
};

struct NodeEvent {
  enum class Kind { Terminated, Launched, CheckpointSaved };
  NodeId node;
  SimTime at;
  Kind kind = Kind::Launched;
  ErrorClass error;  // meaningful for Terminated
};

enum class Directive { RequeueShards, AbortJob, None };

struct ClusterSignal {
  double pending_time = 0;  // seconds
  bool busy = false;
};

// Ingests per-iteration reports and node lifecycle events; serves sliding
// window aggregates to the Controller. Single writer; queries read a
// snapshot of whatever has been ingested.
class Monitor {
 public:
  struct Options {
    double evict_horizon = 1200;  // drop records older than this (2 * L^per)
    double pending_time = 0;
    double busy_threshold = 120;
  };
  explicit Monitor(Options opt = {}) : opt_(opt) {}

  void ingest(const IterationRecord& rec);
  Directive on_node_event(const NodeEvent& ev);

  // Mean of T^w (workers) or the server's own aggregation time (servers)
  // over records in [now - horizon, now]. nullopt when the window is empty.
  std::optional<double> mean_bpt(NodeId node, double horizon, SimTime now) const;
  // Mean of per-node means over nodes (of the role) that have data.
  std::optional<double> fleet_mean_bpt(Role role, double horizon, SimTime now) const;
  // Mean over window records of batch_size / T^w. Records with T^w = 0 are
  // excluded and counted as anomalies.
  std::optional<double> throughput(NodeId worker, double horizon, SimTime now) const;

  ClusterSignal cluster_signal() const;
  void set_pending_time(double seconds) { opt_.pending_time = seconds; }

  // Timestamp of the node's most recent launch (run start counts as one).
  // Used by callers that require a fully ramped window before judging.
  std::optional<SimTime> launch_time(NodeId node) const;
  void register_launch(NodeId node, SimTime at) { launch_[node] = at; }

  std::int64_t anomaly_count() const { return anomalies_; }

 private:
  struct NodeWindow {
    std::deque<IterationRecord> records;
    bool has_last = false;
    SimTime last;
  };

  Options opt_;
  std::unordered_map<NodeId, NodeWindow, NodeIdHash> windows_;
  std::unordered_map<NodeId, SimTime, NodeIdHash> launch_;
  mutable std::int64_t anomalies_ = 0;
};

}  // namespace antdt
