#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "antdt/config.hpp"
#include "antdt/monitor.hpp"
#include "antdt/solver.hpp"
#include "antdt/types.hpp"

namespace antdt {

struct StragglerVerdict {
  enum class Kind { Transient, Persistent, None };
  NodeId node;
  Kind kind = Kind::None;
  double observed_bpt = 0;
  double fleet_bpt = 0;

  double ratio() const { return fleet_bpt > 0 ? observed_bpt / fleet_bpt : 0; }
};

enum class WindowKind { Transient, Persistent };

// Runs the mitigation policies against Monitor aggregates and emits one
// Action per tick. Node membership (who is live, who is in post-restart
// cooldown) is fed by the host.
class Controller {
 public:
  Controller(const ScenarioConfig& cfg, const Monitor& monitor);

  // Verdicts for every live node of the role with window data. A node is
  // flagged iff its window mean is >= lambda times the fleet mean; nodes
  // without data (or without a fully ramped window) are never flagged.
  std::vector<StragglerVerdict> detect(Role role, WindowKind window, SimTime now) const;

  // AntDT-ND worker procedure: persistent straggler -> KILL_RESTART when the
  // cluster is idle and the target is out of cooldown; else any transient
  // straggler -> ADJUST_BS from the current throughput estimates; else None.
  Action nd_worker_step(SimTime now);
  // AntDT-ND server procedure: persistent server straggler -> KILL_RESTART
  // (same gates); never ADJUST_BS.
  Action nd_server_step(SimTime now);
  // AntDT-DD: one ADJUST_BS carrying (B_i, C_i) from the grad-accum solve,
  // then None for the rest of the run.
  Action dd_step(SimTime now);
  Action baseline_step(SimTime now);

  // One decision per tick for the configured policy.
  Action tick(SimTime now, std::int64_t current_iteration);

  // Membership feed.
  void on_node_launched(NodeId node, SimTime at);
  void on_node_terminated(NodeId node);
  void set_live_workers(const std::vector<std::int32_t>& live) { live_workers_ = live; }

  bool dd_adjusted() const { return dd_adjusted_; }

 private:
  bool in_cooldown(NodeId node, SimTime now) const;
  bool kill_in_flight(NodeId node) const;
  std::optional<Action> try_kill(Role role, SimTime now);
  std::optional<BatchAllocation> solve_current_allocation(SimTime now, bool bounded);

  const ScenarioConfig& cfg_;
  const Monitor& monitor_;
  std::vector<std::int32_t> live_workers_;
  std::unordered_map<NodeId, SimTime, NodeIdHash> cooldown_until_;
  std::unordered_map<NodeId, bool, NodeIdHash> kill_in_flight_;
  bool dd_adjusted_ = false;
  std::int64_t current_iteration_ = 0;
};

}  // namespace antdt
