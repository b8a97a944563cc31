#include "antdt/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "antdt/error.hpp"

namespace antdt {

Controller::Controller(const ScenarioConfig& cfg, const Monitor& monitor) : cfg_(cfg), monitor_(monitor) {
  live_workers_.resize(static_cast<std::size_t>(cfg.n_workers));
  for (std::int32_t i = 0; i < cfg.n_workers; ++i) live_workers_[static_cast<std::size_t>(i)] = i;
}

bool Controller::in_cooldown(NodeId node, SimTime now) const {
  auto it = cooldown_until_.find(node);
  return it != cooldown_until_.end() && now < it->second;
}

bool Controller::kill_in_flight(NodeId node) const {
  auto it = kill_in_flight_.find(node);
  return it != kill_in_flight_.end() && it->second;
}

std::vector<StragglerVerdict> Controller::detect(Role role, WindowKind window, SimTime now) const {
  const double horizon =
      window == WindowKind::Transient ? cfg_.detection.window_transient : cfg_.detection.window_persistent;
  const auto fleet = monitor_.fleet_mean_bpt(role, horizon, now);

  std::vector<NodeId> candidates;
  if (role == Role::Worker) {
    for (std::int32_t i : live_workers_) candidates.push_back(NodeId::worker(i));
  } else {
    for (std::int32_t i = 0; i < cfg_.n_servers; ++i) candidates.push_back(NodeId::server(i));
  }

  std::vector<StragglerVerdict> out;
  for (NodeId node : candidates) {
    const auto mean = monitor_.mean_bpt(node, horizon, now);
    if (!mean) continue;
    StragglerVerdict v;
    v.node = node;
    v.observed_bpt = *mean;
    v.fleet_bpt = fleet.value_or(0);
    bool flagged = fleet && *fleet > 0 && *mean >= cfg_.detection.lambda * *fleet;
    // A node observed for less than the window, or inside its post-restart
    // cooldown, is never judged.
    const auto launched = monitor_.launch_time(node);
    if (!launched || (now - *launched).seconds() < horizon) flagged = false;
    if (in_cooldown(node, now)) flagged = false;
    v.kind = flagged ? (window == WindowKind::Transient ? StragglerVerdict::Kind::Transient
                                                        : StragglerVerdict::Kind::Persistent)
                     : StragglerVerdict::Kind::None;
    out.push_back(v);
  }
  return out;
}

std::optional<Action> Controller::try_kill(Role role, SimTime now) {
  if (monitor_.cluster_signal().busy) return std::nullopt;
  auto verdicts = detect(role, WindowKind::Persistent, now);
  const StragglerVerdict* worst = nullptr;
  for (const auto& v : verdicts) {
    if (v.kind != StragglerVerdict::Kind::Persistent) continue;
    if (kill_in_flight(v.node)) continue;
    if (!worst || v.ratio() > worst->ratio()) worst = &v;
  }
  if (!worst) return std::nullopt;
  kill_in_flight_[worst->node] = true;
  Action a;
  a.kind = Action::KillRestart{worst->node};
  a.issue_iteration = current_iteration_;
  return a;
}

std::optional<BatchAllocation> Controller::solve_current_allocation(SimTime now, bool bounded) {
  const double horizon = cfg_.detection.window_transient;
  if (bounded && !cfg_.device_classes.empty()) {
    // Per-class speeds: mean throughput over the class's members with data.
    GradAccumProblem p;
    p.global_batch = cfg_.global_batch;
    p.c_min = 1;
    p.c_max = 1;
    std::int32_t base = 0;
    for (const auto& d : cfg_.device_classes) {
      double sum = 0;
      std::int32_t with_data = 0;
      for (std::int32_t i = 0; i < d.count; ++i) {
        if (auto t = monitor_.throughput(NodeId::worker(base + i), horizon, now)) {
          sum += *t;
          ++with_data;
        }
      }
      if (with_data == 0) return std::nullopt;
      p.classes.push_back({d.count, sum / with_data, d.b_min, d.b_max});
      base += d.count;
    }
    auto r = solve_grad_accum(p);
    if (!is_feasible(r)) return std::nullopt;
    return solution(r).allocation;
  }

  BatchProblem p;
  p.global_batch = cfg_.global_batch;
  std::vector<double> speeds;
  std::vector<double> known;
  for (std::int32_t i : live_workers_) {
    auto t = monitor_.throughput(NodeId::worker(i), horizon, now);
    speeds.push_back(t.value_or(-1));
    if (t) known.push_back(*t);
  }
  if (known.empty()) return std::nullopt;
  // Workers with cold windows (fresh restarts) take the fleet-average speed.
  const double fallback = std::accumulate(known.begin(), known.end(), 0.0) / static_cast<double>(known.size());
  for (double& s : speeds)
    if (s < 0) s = fallback;
  p.speeds = std::move(speeds);
  auto r = solve_batch(p);
  if (!is_feasible(r)) return std::nullopt;
  // Map solution slots back to live worker indexes.
  BatchAllocation alloc;
  const auto& sol = solution(r).allocation;
  for (std::size_t s = 0; s < sol.per_worker.size(); ++s) {
    alloc.per_worker.push_back({live_workers_[s], sol.per_worker[s].batch, sol.per_worker[s].accum});
  }
  return alloc;
}

Action Controller::nd_worker_step(SimTime now) {
  if (auto kill = try_kill(Role::Worker, now)) return *kill;

  bool any_transient = false;
  for (const auto& v : detect(Role::Worker, WindowKind::Transient, now)) {
    if (v.kind == StragglerVerdict::Kind::Transient) any_transient = true;
  }
  Action a;
  a.issue_iteration = current_iteration_;
  if (any_transient) {
    if (auto alloc = solve_current_allocation(now, /*bounded=*/false)) {
      if (alloc->total() != cfg_.global_batch)
        throw ProtocolError("adjust_bs allocation does not sum to the global batch");
      a.kind = Action::AdjustBs{std::move(*alloc)};
      return a;
    }
  }
  a.kind = Action::None{};
  return a;
}

Action Controller::nd_server_step(SimTime now) {
  if (auto kill = try_kill(Role::Server, now)) return *kill;
  Action a;
  a.kind = Action::None{};
  a.issue_iteration = current_iteration_;
  return a;
}

Action Controller::dd_step(SimTime now) {
  Action a;
  a.kind = Action::None{};
  a.issue_iteration = current_iteration_;
  if (dd_adjusted_ || cfg_.device_classes.empty()) return a;

  const double horizon = cfg_.detection.window_transient;
  GradAccumProblem p;
  p.global_batch = cfg_.global_batch;
  p.c_min = cfg_.accum.c_min;
  p.c_max = cfg_.accum.c_max;
  std::int32_t base = 0;
  for (const auto& d : cfg_.device_classes) {
    double sum = 0;
    std::int32_t with_data = 0;
    for (std::int32_t i = 0; i < d.count; ++i) {
      const NodeId node = NodeId::worker(base + i);
      const auto launched = monitor_.launch_time(node);
      if (!launched || (now - *launched).seconds() < horizon) continue;
      if (auto t = monitor_.throughput(node, horizon, now)) {
        sum += *t;
        ++with_data;
      }
    }
    if (with_data == 0) return a;  // wait until every class has ramped data
    p.classes.push_back({d.count, sum / with_data, d.b_min, d.b_max});
    base += d.count;
  }
  auto r = solve_grad_accum(p);
  if (!is_feasible(r)) return a;
  if (solution(r).allocation.total() != cfg_.global_batch)
    throw ProtocolError("grad-accum allocation does not sum to the global batch");
  a.kind = Action::AdjustBs{solution(r).allocation};
  dd_adjusted_ = true;
  return a;
}

Action Controller::baseline_step(SimTime now) {
  Action a;
  a.kind = Action::None{};
  a.issue_iteration = current_iteration_;
  switch (cfg_.policy) {
    case PolicyKind::NativeBSP:
    case PolicyKind::NativeASP:
    case PolicyKind::AspDds:
      return a;
    case PolicyKind::BackupWorkers:
      a.kind = Action::BackupWorkers{cfg_.backup_b};
      return a;
    case PolicyKind::LbBsp: {
      bool any_transient = false;
      for (const auto& v : detect(Role::Worker, WindowKind::Transient, now)) {
        if (v.kind == StragglerVerdict::Kind::Transient) any_transient = true;
      }
      if (any_transient) {
        if (auto alloc = solve_current_allocation(now, /*bounded=*/!cfg_.device_classes.empty())) {
          if (alloc->total() != cfg_.global_batch)
            throw ProtocolError("adjust_bs allocation does not sum to the global batch");
          a.kind = Action::AdjustBs{std::move(*alloc)};
        }
      }
      return a;
    }
    default:
      return a;
  }
}

Action Controller::tick(SimTime now, std::int64_t current_iteration) {
  current_iteration_ = current_iteration;
  switch (cfg_.policy) {
    case PolicyKind::AntDtNd: {
      // Server stragglers gate the whole job; resolve them first.
      if (cfg_.architecture == Architecture::ParameterServer) {
        Action s = nd_server_step(now);
        if (!s.is_none()) return s;
      }
      if (cfg_.consistency == Consistency::ASP) {
        // In ASP the DDS already balances load; only KILL_RESTART applies.
        if (auto kill = try_kill(Role::Worker, now)) return *kill;
        Action a;
        a.kind = Action::None{};
        a.issue_iteration = current_iteration_;
        return a;
      }
      return nd_worker_step(now);
    }
    case PolicyKind::AntDtDd:
      return dd_step(now);
    default:
      return baseline_step(now);
  }
}

void Controller::on_node_launched(NodeId node, SimTime at) {
  kill_in_flight_[node] = false;
  cooldown_until_[node] = at + SimTime::from_seconds(cfg_.detection.window_persistent);
}

void Controller::on_node_terminated(NodeId node) { kill_in_flight_[node] = true; }

}  // namespace antdt
