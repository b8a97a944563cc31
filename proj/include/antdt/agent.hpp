#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "antdt/monitor.hpp"
#include "antdt/types.hpp"

namespace antdt {

// A global action scheduled for one specific iteration on every worker.
struct SyncEnvelope {
  Action action;
  std::int64_t apply_at_iteration = 0;
  std::int64_t broadcast_seq = 0;

  json to_json() const;
  static SyncEnvelope from_json(const json& j);
};

// Per-node agent: batches iteration reports toward the Monitor and applies
// controller actions at a synchronized iteration boundary.
class Agent {
 public:
  struct Applied {
    std::optional<std::int64_t> batch;
    std::optional<std::int32_t> accum;
    std::optional<std::int32_t> backup_b;
    bool terminate = false;  // KillRestart aimed at this node
  };

  Agent(NodeId node, std::int32_t report_every) : node_(node), report_every_(report_every) {}

  NodeId node() const { return node_; }

  // Buffers the record; every report_every-th iteration flushes the buffer
  // to the monitor. When the monitor is unreachable the batch stays buffered
  // (bounded at 1000 records, oldest dropped) and is delivered in order on
  // the next successful flush.
  void report_tick(std::int64_t iteration, const IterationRecord& rec, Monitor* monitor, bool monitor_up);

  void deliver(const SyncEnvelope& env) { pending_ = env; }
  bool has_pending() const { return pending_.has_value(); }
  void drop_pending() { pending_.reset(); }

  // Applies the pending envelope when `iteration` is its apply point. An
  // envelope seen only after its iteration passed is a protocol violation:
  // it is skipped and counted.
  std::optional<Applied> barrier_apply(std::int64_t iteration);

  std::int64_t dropped_records() const { return dropped_; }
  std::int64_t late_envelopes() const { return late_; }

 private:
  NodeId node_;
  std::int32_t report_every_;
  std::deque<IterationRecord> buffer_;
  std::optional<SyncEnvelope> pending_;
  std::int64_t dropped_ = 0;
  std::int64_t late_ = 0;
};

// Primary-agent broadcast: turns one controller action into envelopes for
// all live workers, all-or-nothing.
class AgentGroup {
 public:
  AgentGroup(std::int32_t n_workers, std::int32_t report_every);

  Agent& agent(std::int32_t worker) { return agents_[static_cast<std::size_t>(worker)]; }

  // Lowest live worker index; re-elected when the primary dies.
  std::int32_t primary() const;
  void set_alive(std::int32_t worker, bool alive);
  bool alive(std::int32_t worker) const { return alive_[static_cast<std::size_t>(worker)]; }
  std::vector<std::int32_t> live_workers() const;

  // Broadcast from the primary. None actions send nothing. If any live
  // secondary is unreachable the whole envelope is aborted (global actions
  // are all-or-nothing) and nullopt is returned.
  std::optional<SyncEnvelope> broadcast(const Action& action, std::int64_t current_global_iteration);

  void set_unreachable(std::int32_t worker, bool u) { unreachable_[static_cast<std::size_t>(worker)] = u; }
  std::int64_t aborted_broadcasts() const { return aborted_; }

  static constexpr std::int64_t kSyncLead = 1;  // apply in the next iteration

 private:
  std::vector<Agent> agents_;
  std::vector<bool> alive_;
  std::vector<bool> unreachable_;
  std::int64_t seq_ = 0;
  std::int64_t aborted_ = 0;
};

}  // namespace antdt
