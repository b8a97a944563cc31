#include "antdt/sim.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <tuple>

#include "antdt/agent.hpp"
#include "antdt/controller.hpp"
#include "antdt/dds.hpp"
#include "antdt/error.hpp"
#include "antdt/monitor.hpp"
#include "antdt/rng.hpp"
#include "antdt/solver.hpp"

namespace antdt {

json RunMetrics::to_json() const {
  return json{{"jct_seconds", jct.seconds()},
              {"aborted", aborted},
              {"iterations", iterations},
              {"epochs_completed", epochs_completed},
              {"done_shards_per_worker", done_shards_per_worker},
              {"processed_samples", processed_samples},
              {"recomputed_samples", recomputed_samples},
              {"actions", json{{"adjust_bs", actions_adjust_bs},
                               {"kill_restart", actions_kill},
                               {"backup_workers", actions_backup},
                               {"none", actions_none}}},
              {"sync_overhead_seconds", sync_overhead.seconds()},
              {"sync_overhead_fraction", sync_overhead_fraction},
              {"envelopes_applied", envelopes_applied},
              {"envelopes_aborted", envelopes_aborted},
              {"late_envelopes", late_envelopes}};
}

SimTime kill_restart_downtime(const FailoverConfig& f, bool cluster_busy) {
  const double pending = cluster_busy ? f.pending_time_busy : f.pending_time_idle;
  return SimTime::from_seconds(pending + f.node_init + f.restore);
}

double bsp_gate_duration(std::vector<double> durations, std::int32_t backup_b) {
  if (durations.empty()) return 0;
  std::sort(durations.begin(), durations.end());
  const std::int64_t n = static_cast<std::int64_t>(durations.size());
  const std::int64_t b = std::clamp<std::int64_t>(backup_b, 0, n - 1);
  return durations[static_cast<std::size_t>(n - 1 - b)];
}

double PatternOracle::compute_delay(NodeId node, SimTime t, bool persistent_cleared) const {
  double delay = 0;
  std::uint64_t pattern_idx = 0;
  const std::uint64_t node_key =
      (static_cast<std::uint64_t>(node.role == Role::Server) << 32) | static_cast<std::uint32_t>(node.index);
  for (const auto& p : cfg_.patterns) {
    ++pattern_idx;
    if (!p.targets(node)) continue;
    if (p.kind == StragglerPattern::Kind::Transient) {
      const std::int64_t cycle_us = SimTime::from_seconds(p.cycle).us;
      if (cycle_us <= 0) continue;
      const std::int64_t cycle_idx = t.us / cycle_us;
      const bool in_window = (t.us - cycle_idx * cycle_us) < SimTime::from_seconds(p.on_period).us;
      if (!in_window) continue;
      const std::uint64_t draw_key = p.fixed_draw ? 0 : static_cast<std::uint64_t>(cycle_idx);
      if (hash_draw(cfg_.seed + pattern_idx * 0x9e37ULL, node_key, draw_key) < p.probability) {
        delay += p.sleep_duration * p.intensity;
      }
    } else if (p.kind == StragglerPattern::Kind::Persistent && p.affects == StragglerPattern::Affects::Compute &&
               !persistent_cleared) {
      delay += p.delay;
    }
  }
  return delay;
}

double PatternOracle::comm_factor(NodeId node, bool persistent_cleared) const {
  if (persistent_cleared) return 1.0;
  for (const auto& p : cfg_.patterns) {
    if (p.kind == StragglerPattern::Kind::Persistent && p.affects == StragglerPattern::Affects::Comm &&
        p.targets(node))
      return 2.0;
  }
  return 1.0;
}

double PatternOracle::speed_multiplier(NodeId node) const {
  double m = 1.0;
  for (const auto& p : cfg_.patterns) {
    if (p.kind == StragglerPattern::Kind::Deterministic && p.targets(node)) m *= p.multiplier;
  }
  return m;
}

namespace {

struct WorkerRt {
  bool alive = true;
  bool pending_relaunch = false;
  SimTime relaunch_at;
  std::int64_t batch = 0;
  std::int32_t accum = 1;
  std::optional<Shard> lease;
  std::int64_t consumed = 0;   // within the current lease
  std::int64_t iteration = 0;  // worker-local, counts completed iterations
  std::int64_t done_shards = 0;
  bool persistent_cleared = false;
  double speed = 1.0;           // base * deterministic multipliers
  std::int64_t sat_floor = 0;   // device-class saturation point, 0 = linear model
  std::int64_t event_version = 0;
};

struct ServerRt {
  bool alive = true;
  bool pending_relaunch = false;
  SimTime relaunch_at;
  bool persistent_cleared = false;
  std::vector<SimTime> push_ends;
};

class Engine {
 public:
  Engine(const ScenarioConfig& cfg, const RunOptions& opt)
      : cfg_(cfg),
        opt_(opt),
        oracle_(cfg),
        monitor_(Monitor::Options{2 * cfg.detection.window_persistent, cfg.cluster.pending_time,
                                  cfg.cluster.busy_threshold}),
        controller_(cfg, monitor_),
        agents_(cfg.n_workers, cfg.detection.report_every) {}

  RunResult run();

 private:
  void log(SimTime t, const char* kind, json payload);
  void launch_all();
  void build_epoch_ledger(SimTime t);
  void realloc_even(SimTime t);
  double compute_duration(const WorkerRt& w, std::int64_t draw) const;
  void terminate_worker(std::int32_t w, SimTime t, const char* cause);
  void terminate_server(std::int32_t s, SimTime t, const char* cause);
  void relaunch_node(NodeId node, SimTime t);
  void ingest_worker_record(std::int32_t w, SimTime t_end, double t_w, double t_s, double t_m, std::int64_t draw);
  void record_action(const Action& a, SimTime t);
  std::vector<ChaosConfig::ScheduledFailure> chaos_schedule() const;
  double server_compute_for_worker(SimTime t) const;
  void finish_metrics();

  void run_bsp();
  void run_asp();

  void bsp_apply_due_envelope(SimTime t);
  void bsp_boundary(SimTime& t);
  void bsp_handle_kill(NodeId target, SimTime t);
  void checkpoint_snapshot(SimTime t);
  void checkpoint_rollback(SimTime t, std::int32_t killed);

  const ScenarioConfig& cfg_;
  RunOptions opt_;
  PatternOracle oracle_;
  Monitor monitor_;
  Controller controller_;
  AgentGroup agents_;

  std::vector<WorkerRt> workers_;
  std::vector<ServerRt> servers_;
  std::optional<ShardLedger> ledger_;
  std::int32_t epoch_ = 0;
  std::int64_t global_iter_ = 0;
  std::int32_t backup_b_ = 0;
  std::int64_t membership_seq_ = 0;
  std::int64_t envelope_membership_seq_ = -1;
  std::optional<SyncEnvelope> inflight_envelope_;
  double pending_barrier_overhead_ = 0;  // added to the iteration at an apply boundary
  SimTime last_done_;
  SimTime stall_until_;
  std::int64_t next_tick_idx_ = 1;
  std::int64_t next_checkpoint_idx_ = 1;
  std::vector<ChaosConfig::ScheduledFailure> chaos_;
  std::size_t chaos_at_ = 0;

  struct Snapshot {
    ShardLedger ledger;
    std::vector<std::optional<Shard>> leases;
    std::vector<std::int64_t> consumed;
    std::int64_t processed = 0;
    SimTime at;
  };
  std::optional<Snapshot> snapshot_;

  RunMetrics metrics_;
  std::vector<TraceRow> trace_;
  std::ostringstream log_;
};

void Engine::log(SimTime t, const char* kind, json payload) {
  payload["t"] = t.us;
  payload["kind"] = kind;
  log_ << payload.dump() << "\n";
}

std::vector<ChaosConfig::ScheduledFailure> Engine::chaos_schedule() const {
  auto sched = cfg_.chaos.scheduled;
  if (cfg_.chaos.random_failures > 0) {
    SeededRng rng(splitmix64(cfg_.seed ^ 0xc4a05ULL));
    const double span = cfg_.chaos.failure_window_end - cfg_.chaos.failure_window_begin;
    for (std::int32_t i = 0; i < cfg_.chaos.random_failures; ++i) {
      ChaosConfig::ScheduledFailure f;
      f.node = NodeId::worker(static_cast<std::int32_t>(rng.bounded(static_cast<std::uint64_t>(cfg_.n_workers))));
      f.at = cfg_.chaos.failure_window_begin + rng.next_double() * span;
      f.error = rng.next_double() < 0.5 ? "eviction" : "network";
      sched.push_back(f);
    }
  }
  std::sort(sched.begin(), sched.end(), [](const auto& a, const auto& b) {
    if (a.at != b.at) return a.at < b.at;
    return std::make_pair(a.node.role, a.node.index) < std::make_pair(b.node.role, b.node.index);
  });
  return sched;
}

void Engine::launch_all() {
  workers_.assign(static_cast<std::size_t>(cfg_.n_workers), WorkerRt{});
  servers_.assign(static_cast<std::size_t>(cfg_.n_servers), ServerRt{});
  // Device classes occupy consecutive worker index ranges in config order.
  std::int32_t base = 0;
  std::vector<double> class_mult(static_cast<std::size_t>(cfg_.n_workers), 1.0);
  std::vector<std::int64_t> class_sat(static_cast<std::size_t>(cfg_.n_workers), 0);
  for (const auto& d : cfg_.device_classes) {
    for (std::int32_t i = 0; i < d.count; ++i) {
      class_mult[static_cast<std::size_t>(base + i)] = d.speed_multiplier;
      class_sat[static_cast<std::size_t>(base + i)] = d.b_min;
    }
    base += d.count;
  }
  // The initial launch is not a restart: no cooldown, detection starts once
  // the windows have ramped.
  const SimTime pre_start = SimTime::zero() - SimTime::from_seconds(cfg_.detection.window_persistent);
  for (std::int32_t w = 0; w < cfg_.n_workers; ++w) {
    auto& rt = workers_[static_cast<std::size_t>(w)];
    rt.speed = cfg_.cluster.worker_speed * class_mult[static_cast<std::size_t>(w)] *
               oracle_.speed_multiplier(NodeId::worker(w));
    rt.sat_floor = class_sat[static_cast<std::size_t>(w)];
    monitor_.register_launch(NodeId::worker(w), SimTime::zero());
    controller_.on_node_launched(NodeId::worker(w), pre_start);
    log(SimTime::zero(), "launch", json{{"node", NodeId::worker(w).to_json()}});
  }
  for (std::int32_t s = 0; s < cfg_.n_servers; ++s) {
    monitor_.register_launch(NodeId::server(s), SimTime::zero());
    controller_.on_node_launched(NodeId::server(s), pre_start);
    log(SimTime::zero(), "launch", json{{"node", NodeId::server(s).to_json()}});
  }
  metrics_.done_shards_per_worker.assign(static_cast<std::size_t>(cfg_.n_workers), 0);
}

void Engine::build_epoch_ledger(SimTime t) {
  const std::int32_t partition = cfg_.policy == PolicyKind::NativeASP ? cfg_.n_workers : 0;
  ledger_ = ShardLedger::build(cfg_.samples, cfg_.global_batch, cfg_.batches_per_shard, epoch_, cfg_.seed, partition);
  log(t, "epoch_built", json{{"epoch", epoch_}, {"shards", ledger_->total_shards()}});
}

void Engine::realloc_even(SimTime t) {
  ++membership_seq_;
  std::vector<std::int32_t> live;
  for (std::int32_t w = 0; w < cfg_.n_workers; ++w)
    if (workers_[static_cast<std::size_t>(w)].alive) live.push_back(w);
  if (live.empty()) return;
  const std::int64_t n = static_cast<std::int64_t>(live.size());
  const std::int64_t each = cfg_.global_batch / n;
  std::int64_t rem = cfg_.global_batch % n;
  json alloc_log = json::array();
  for (std::int32_t w : live) {
    auto& rt = workers_[static_cast<std::size_t>(w)];
    rt.batch = each + (rem > 0 ? 1 : 0);
    if (rem > 0) --rem;
    rt.accum = 1;
    alloc_log.push_back(json{{"worker", w}, {"batch", rt.batch}});
  }
  log(t, "realloc", json{{"iter", global_iter_}, {"alloc", alloc_log}});
}

double Engine::compute_duration(const WorkerRt& w, std::int64_t draw) const {
  if (draw <= 0) return 0;
  const std::int64_t full = w.batch * w.accum;
  if (w.sat_floor > 0) {
    // Below the saturation point a micro-batch costs as much as one at the
    // saturation point.
    if (draw == full) {
      return static_cast<double>(w.accum) * static_cast<double>(std::max(w.batch, w.sat_floor)) / w.speed;
    }
    return static_cast<double>(std::max(draw, w.sat_floor)) / w.speed;
  }
  return static_cast<double>(draw) / w.speed;
}

double Engine::server_compute_for_worker(SimTime t) const {
  if (cfg_.architecture != Architecture::ParameterServer) return 0;
  double worst = 0;
  for (std::int32_t s = 0; s < cfg_.n_servers; ++s) {
    const auto& rt = servers_[static_cast<std::size_t>(s)];
    const double d =
        cfg_.cluster.server_update_cost + oracle_.compute_delay(NodeId::server(s), t, rt.persistent_cleared);
    worst = std::max(worst, d);
  }
  return worst;
}

void Engine::ingest_worker_record(std::int32_t w, SimTime t_end, double t_w, double t_s, double t_m,
                                  std::int64_t draw) {
  auto& rt = workers_[static_cast<std::size_t>(w)];
  ++rt.iteration;
  IterationRecord rec;
  rec.node = NodeId::worker(w);
  rec.iteration = rt.iteration;
  rec.wall_time = t_end;
  rec.worker_compute = t_w;
  rec.server_compute = t_s;
  rec.comm = t_m;
  rec.batch_size = draw;
  agents_.agent(w).report_tick(rt.iteration, rec, &monitor_, /*monitor_up=*/true);
  if (opt_.collect_trace) trace_.push_back(TraceRow{t_end, rec.node, t_w + t_s + t_m, draw});
}

void Engine::record_action(const Action& a, SimTime t) {
  log(t, "action", json{{"iter", global_iter_}, {"action", a.to_json()}});
  switch (a.kind.index()) {
    case 0: ++metrics_.actions_none; break;
    case 1: ++metrics_.actions_adjust_bs; break;
    case 2: ++metrics_.actions_backup; break;
    case 3: ++metrics_.actions_kill; break;
    default: break;
  }
}

void Engine::terminate_worker(std::int32_t w, SimTime t, const char* cause) {
  auto& rt = workers_[static_cast<std::size_t>(w)];
  if (!rt.alive) return;
  rt.alive = false;
  ++rt.event_version;
  agents_.set_alive(w, false);
  const NodeId node = NodeId::worker(w);
  log(t, "terminate", json{{"node", node.to_json()}, {"cause", cause}});

  NodeEvent ev;
  ev.node = node;
  ev.at = t;
  ev.kind = NodeEvent::Kind::Terminated;
  ev.error = std::string(cause) == "proactive_kill" ? ErrorClass::retryable(ErrorClass::Cause::ProactiveKill)
             : std::string(cause) == "network"      ? ErrorClass::retryable(ErrorClass::Cause::NetworkError)
                                                    : ErrorClass::retryable(ErrorClass::Cause::Eviction);
  const Directive d = monitor_.on_node_event(ev);
  controller_.on_node_terminated(node);

  if (d == Directive::RequeueShards && ledger_) {
    // Partial progress inside the lease is lost; the whole shard goes back
    // to the tail of the queue.
    metrics_.recomputed_samples += rt.consumed;
    const std::int64_t requeued = ledger_->recover_node(node);
    if (requeued > 0) log(t, "shard_requeue", json{{"node", node.to_json()}, {"count", requeued}});
    rt.lease.reset();
    rt.consumed = 0;
  }
  rt.pending_relaunch = true;
  rt.relaunch_at = t + kill_restart_downtime(cfg_.failover, monitor_.cluster_signal().busy);
  log(t, "restart_scheduled", json{{"node", node.to_json()}, {"at_us", rt.relaunch_at.us}});
}

void Engine::terminate_server(std::int32_t s, SimTime t, const char* cause) {
  auto& rt = servers_[static_cast<std::size_t>(s)];
  if (!rt.alive) return;
  rt.alive = false;
  const NodeId node = NodeId::server(s);
  log(t, "terminate", json{{"node", node.to_json()}, {"cause", cause}});
  NodeEvent ev;
  ev.node = node;
  ev.at = t;
  ev.kind = NodeEvent::Kind::Terminated;
  ev.error = ErrorClass::retryable(std::string(cause) == "proactive_kill" ? ErrorClass::Cause::ProactiveKill
                                                                          : ErrorClass::Cause::Eviction);
  monitor_.on_node_event(ev);
  controller_.on_node_terminated(node);
  rt.pending_relaunch = true;
  rt.relaunch_at = t + kill_restart_downtime(cfg_.failover, monitor_.cluster_signal().busy);
  // Parameters live on the servers: the whole job stalls until it is back.
  stall_until_ = std::max(stall_until_, rt.relaunch_at);
  log(t, "stall", json{{"until_us", rt.relaunch_at.us}, {"node", node.to_json()}});
}

void Engine::relaunch_node(NodeId node, SimTime t) {
  if (node.role == Role::Worker) {
    auto& rt = workers_[static_cast<std::size_t>(node.index)];
    rt.alive = true;
    rt.pending_relaunch = false;
    rt.persistent_cleared = true;  // the restart lands on fresh placement
    rt.batch = 0;
    rt.accum = 1;
    agents_.set_alive(node.index, true);
  } else {
    auto& rt = servers_[static_cast<std::size_t>(node.index)];
    rt.alive = true;
    rt.pending_relaunch = false;
    rt.persistent_cleared = true;
    rt.push_ends.clear();
  }
  NodeEvent ev;
  ev.node = node;
  ev.at = t;
  ev.kind = NodeEvent::Kind::Launched;
  monitor_.on_node_event(ev);
  controller_.on_node_launched(node, t);
  log(t, "launch", json{{"node", node.to_json()}});
}

void Engine::finish_metrics() {
  metrics_.jct = last_done_;
  for (std::int32_t w = 0; w < cfg_.n_workers; ++w)
    metrics_.done_shards_per_worker[static_cast<std::size_t>(w)] = workers_[static_cast<std::size_t>(w)].done_shards;
  metrics_.sync_overhead_fraction =
      metrics_.jct.us > 0 ? static_cast<double>(metrics_.sync_overhead.us) / static_cast<double>(metrics_.jct.us) : 0;
  for (std::int32_t w = 0; w < cfg_.n_workers; ++w)
    metrics_.late_envelopes += agents_.agent(w).late_envelopes();
  metrics_.envelopes_aborted += agents_.aborted_broadcasts();
  log(last_done_, "run_complete", json{{"jct_us", metrics_.jct.us}, {"aborted", metrics_.aborted}});
}

RunResult Engine::run() {
  launch_all();
  chaos_ = chaos_schedule();
  build_epoch_ledger(SimTime::zero());
  realloc_even(SimTime::zero());
  if (cfg_.consistency == Consistency::BSP) {
    run_bsp();
  } else {
    run_asp();
  }
  finish_metrics();
  RunResult out;
  out.metrics = metrics_;
  out.event_log = log_.str();
  out.trace = std::move(trace_);
  return out;
}

// ---------------------------------------------------------------------------
// BSP
// ---------------------------------------------------------------------------

void Engine::checkpoint_snapshot(SimTime t) {
  Snapshot s{*ledger_, {}, {}, metrics_.processed_samples, t};
  s.leases.resize(workers_.size());
  s.consumed.resize(workers_.size());
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    s.leases[w] = workers_[w].lease;
    s.consumed[w] = workers_[w].consumed;
  }
  snapshot_ = std::move(s);
  log(t, "checkpoint", json{{"epoch", epoch_}, {"iter", global_iter_}});
}

void Engine::checkpoint_rollback(SimTime t, std::int32_t killed) {
  // Everyone rewinds to the snapshot and re-processes everything consumed
  // since; without a snapshot the epoch restarts from scratch.
  if (!snapshot_ || snapshot_->ledger.epoch() != epoch_) {
    metrics_.recomputed_samples += metrics_.processed_samples;  // upper bound: epoch restart
    build_epoch_ledger(t);
    for (auto& w : workers_) {
      w.lease.reset();
      w.consumed = 0;
    }
  } else {
    metrics_.recomputed_samples += metrics_.processed_samples - snapshot_->processed;
    ledger_ = snapshot_->ledger;
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      workers_[w].lease = snapshot_->leases[w];
      workers_[w].consumed = snapshot_->consumed[w];
    }
  }
  ledger_->recover_node(NodeId::worker(killed));
  workers_[static_cast<std::size_t>(killed)].lease.reset();
  workers_[static_cast<std::size_t>(killed)].consumed = 0;
  log(t, "rollback", json{{"to_us", snapshot_ ? snapshot_->at.us : 0}});
}

void Engine::bsp_handle_kill(NodeId target, SimTime t) {
  if (target.role == Role::Worker) {
    if (!workers_[static_cast<std::size_t>(target.index)].alive) return;
    if (cfg_.failover.recompute_mode == RecomputeMode::CheckpointBased) {
      terminate_worker(target.index, t, "proactive_kill");
      checkpoint_rollback(t, target.index);
      const SimTime until = workers_[static_cast<std::size_t>(target.index)].relaunch_at;
      stall_until_ = std::max(stall_until_, until);
      log(t, "stall", json{{"until_us", until.us}, {"node", target.to_json()}});
    } else {
      terminate_worker(target.index, t, "proactive_kill");
    }
    realloc_even(t);
  } else {
    if (!servers_[static_cast<std::size_t>(target.index)].alive) return;
    terminate_server(target.index, t, "proactive_kill");
  }
}

void Engine::bsp_apply_due_envelope(SimTime t) {
  if (!inflight_envelope_ || inflight_envelope_->apply_at_iteration != global_iter_) return;
  if (envelope_membership_seq_ != membership_seq_) {
    // Membership changed underneath the broadcast; global actions are
    // all-or-nothing, so the envelope aborts and a later tick re-issues.
    ++metrics_.envelopes_aborted;
    log(t, "envelope_aborted", json{{"seq", inflight_envelope_->broadcast_seq}});
    for (std::int32_t w = 0; w < cfg_.n_workers; ++w) agents_.agent(w).drop_pending();
    inflight_envelope_.reset();
    return;
  }
  const Action& act = inflight_envelope_->action;
  for (std::int32_t w : agents_.live_workers()) {
    auto applied = agents_.agent(w).barrier_apply(global_iter_);
    if (!applied) continue;
    ++metrics_.envelopes_applied;
    log(t, "apply",
        json{{"node", NodeId::worker(w).to_json()},
             {"iter", global_iter_},
             {"seq", inflight_envelope_->broadcast_seq},
             {"action", act.kind_name()}});
    if (applied->batch) workers_[static_cast<std::size_t>(w)].batch = *applied->batch;
    if (applied->accum) workers_[static_cast<std::size_t>(w)].accum = *applied->accum;
    if (applied->backup_b) backup_b_ = *applied->backup_b;
  }
  pending_barrier_overhead_ = 2 * cfg_.cluster.sync_latency;
  metrics_.sync_overhead += SimTime::from_seconds(pending_barrier_overhead_);
  inflight_envelope_.reset();
}

void Engine::bsp_boundary(SimTime& t) {
  for (;;) {
    if (t < stall_until_) t = stall_until_;

    bool membership_changed = false;
    for (std::int32_t w = 0; w < cfg_.n_workers; ++w) {
      auto& rt = workers_[static_cast<std::size_t>(w)];
      if (!rt.alive && rt.pending_relaunch && rt.relaunch_at <= t) {
        relaunch_node(NodeId::worker(w), t);
        membership_changed = true;
      }
    }
    for (std::int32_t s = 0; s < cfg_.n_servers; ++s) {
      auto& rt = servers_[static_cast<std::size_t>(s)];
      if (!rt.alive && rt.pending_relaunch && rt.relaunch_at <= t) relaunch_node(NodeId::server(s), t);
    }

    // Chaos failures due at or before the boundary.
    while (chaos_at_ < chaos_.size() && SimTime::from_seconds(chaos_[chaos_at_].at) <= t) {
      const auto& f = chaos_[chaos_at_++];
      if (f.error == "config_error" || f.error == "program_error") {
        log(t, "abort", json{{"node", f.node.to_json()}, {"cause", f.error}});
        metrics_.aborted = true;
        return;
      }
      if (f.node.role == Role::Worker && workers_[static_cast<std::size_t>(f.node.index)].alive) {
        if (cfg_.failover.recompute_mode == RecomputeMode::CheckpointBased) {
          bsp_handle_kill(f.node, t);
        } else {
          terminate_worker(f.node.index, t, f.error.c_str());
          membership_changed = true;
        }
      } else if (f.node.role == Role::Server && servers_[static_cast<std::size_t>(f.node.index)].alive) {
        terminate_server(f.node.index, t, f.error.c_str());
      }
    }
    if (membership_changed) realloc_even(t);
    if (t < stall_until_) continue;

    if (cfg_.failover.recompute_mode == RecomputeMode::CheckpointBased) {
      const SimTime mark = SimTime::from_seconds(cfg_.failover.checkpoint_interval) * next_checkpoint_idx_;
      if (t >= mark) {
        ++next_checkpoint_idx_;
        checkpoint_snapshot(t);
        t += SimTime::from_seconds(cfg_.failover.checkpoint_save);
        continue;
      }
    }

    const SimTime tick_mark = SimTime::from_seconds(cfg_.detection.act_every) * next_tick_idx_;
    if (t >= tick_mark) {
      next_tick_idx_ = t.us / SimTime::from_seconds(cfg_.detection.act_every).us + 1;
      controller_.set_live_workers(agents_.live_workers());
      const Action a = controller_.tick(t, global_iter_);
      record_action(a, t);
      if (const auto* kr = std::get_if<Action::KillRestart>(&a.kind)) {
        bsp_handle_kill(kr->target, t);
      } else if (!a.is_none()) {
        if (auto env = agents_.broadcast(a, global_iter_)) {
          envelope_membership_seq_ = membership_seq_;
          inflight_envelope_ = *env;
          log(t, "broadcast", env->to_json());
        }
      }
      continue;
    }
    break;
  }
}

void Engine::run_bsp() {
  SimTime t = SimTime::zero();
  const double comm_base = cfg_.cluster.comm_time;

  while (epoch_ < cfg_.epochs) {
    bsp_apply_due_envelope(t);
    bsp_boundary(t);
    if (metrics_.aborted) return;

    // Fetch leases for live workers without one.
    for (std::int32_t w = 0; w < cfg_.n_workers; ++w) {
      auto& rt = workers_[static_cast<std::size_t>(w)];
      if (!rt.alive || rt.lease) continue;
      auto r = ledger_->fetch_shard(NodeId::worker(w), t);
      if (std::holds_alternative<Shard>(r)) {
        rt.lease = std::get<Shard>(r);
        rt.consumed = 0;
        log(t, "fetch", json{{"node", NodeId::worker(w).to_json()}, {"shard", rt.lease->id}});
      }
    }

    struct Part {
      std::int32_t w;
      std::int64_t draw;
      double t_w, t_s, t_m, dur;
      bool dropped = false;   // backup-worker drop: batch returns to the lease
      bool failed = false;    // died mid-iteration
    };
    std::vector<Part> parts;
    std::int64_t alloc_total = 0;
    const double t_s_common = server_compute_for_worker(t);
    for (std::int32_t w = 0; w < cfg_.n_workers; ++w) {
      auto& rt = workers_[static_cast<std::size_t>(w)];
      if (!rt.alive) continue;
      alloc_total += rt.batch * rt.accum;
      if (!rt.lease) continue;
      const std::int64_t draw = std::min(rt.batch * rt.accum, rt.lease->length - rt.consumed);
      if (draw <= 0) continue;
      Part p;
      p.w = w;
      p.draw = draw;
      p.t_w = compute_duration(rt, draw) + oracle_.compute_delay(NodeId::worker(w), t, rt.persistent_cleared);
      p.t_s = t_s_common;
      p.t_m = comm_base * oracle_.comm_factor(NodeId::worker(w), rt.persistent_cleared);
      p.dur = p.t_w + p.t_s + p.t_m;
      parts.push_back(p);
    }

    if (parts.empty()) {
      if (ledger_->complete()) {
        log(t, "epoch_complete", json{{"epoch", epoch_}});
        ++metrics_.epochs_completed;
        ++epoch_;
        if (epoch_ < cfg_.epochs) {
          build_epoch_ledger(t);
          snapshot_.reset();
        }
        continue;
      }
      SimTime next = SimTime{std::numeric_limits<std::int64_t>::max()};
      for (const auto& rt : workers_)
        if (!rt.alive && rt.pending_relaunch) next = std::min(next, rt.relaunch_at);
      if (next.us == std::numeric_limits<std::int64_t>::max())
        throw ProtocolError("simulation wedged: no work and no pending relaunch");
      t = std::max(next, t);
      continue;
    }

    // Backup-worker drop set: the b slowest this iteration.
    if (backup_b_ > 0 && static_cast<std::int32_t>(parts.size()) > backup_b_) {
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t i = 0; i < parts.size(); ++i) order.emplace_back(parts[i].dur, i);
      std::sort(order.begin(), order.end());
      for (std::size_t i = parts.size() - static_cast<std::size_t>(backup_b_); i < parts.size(); ++i)
        parts[order[i].second].dropped = true;
    }

    auto gate_now = [&]() {
      double g = 0;
      for (const auto& p : parts)
        if (!p.dropped && !p.failed) g = std::max(g, p.dur);
      return g;
    };

    // Chaos failures inside this iteration abort the victim's batch and may
    // shrink the gate.
    double gate = gate_now();
    bool rolled_back = false;
    bool membership_changed = false;
    while (chaos_at_ < chaos_.size() && gate > 0) {
      const auto& f = chaos_[chaos_at_];
      const SimTime ft = SimTime::from_seconds(f.at);
      if (ft.us >= (t + SimTime::from_seconds(gate)).us) break;
      if (f.node.role != Role::Worker || f.error == "config_error" || f.error == "program_error") break;
      ++chaos_at_;
      if (!workers_[static_cast<std::size_t>(f.node.index)].alive) continue;
      if (cfg_.failover.recompute_mode == RecomputeMode::CheckpointBased) {
        // Checkpoint failover rewinds the whole job; this iteration never
        // commits.
        t = ft;
        bsp_handle_kill(f.node, ft);
        rolled_back = true;
        break;
      }
      for (auto& p : parts)
        if (p.w == f.node.index) p.failed = true;
      terminate_worker(f.node.index, ft, f.error.c_str());
      membership_changed = true;
      gate = gate_now();
    }
    if (rolled_back) continue;
    if (membership_changed) realloc_even(t);

    gate = gate_now();
    if (gate <= 0) {
      // Everyone with work failed; move on, the boundary handles restarts.
      ++global_iter_;
      continue;
    }
    const double iter_dur = gate + pending_barrier_overhead_;
    const double overhead = pending_barrier_overhead_;
    pending_barrier_overhead_ = 0;
    const SimTime t_end = t + SimTime::from_seconds(iter_dur);

    std::int64_t drawn = 0, accepted_samples = 0, requeued = 0;
    for (auto& p : parts) {
      drawn += p.draw;
      auto& rt = workers_[static_cast<std::size_t>(p.w)];
      if (p.failed) {
        requeued += p.draw;  // never committed; the lease itself was requeued
        continue;
      }
      if (p.dropped) {
        // The in-flight batch returns to the pool: the stateful DDS keeps
        // the samples and the same lease serves them again.
        requeued += p.draw;
        metrics_.recomputed_samples += p.draw;
        ingest_worker_record(p.w, t_end, p.t_w, p.t_s, p.t_m, p.draw);
        continue;
      }
      accepted_samples += p.draw;
      rt.consumed += p.draw;
      metrics_.processed_samples += p.draw;
      ingest_worker_record(p.w, t_end, p.t_w, p.t_s, p.t_m, p.draw);
      if (rt.lease && rt.consumed == rt.lease->length) {
        ledger_->report_done(rt.lease->id, NodeId::worker(p.w), t_end);
        ++rt.done_shards;
        last_done_ = t_end;
        log(t_end, "shard_done",
            json{{"node", NodeId::worker(p.w).to_json()},
                 {"shard", rt.lease->id},
                 {"epoch", epoch_},
                 {"start", rt.lease->start_offset},
                 {"len", rt.lease->length}});
        rt.lease.reset();
        rt.consumed = 0;
      }
    }

    for (std::int32_t s = 0; s < cfg_.n_servers; ++s) {
      auto& rt = servers_[static_cast<std::size_t>(s)];
      if (!rt.alive) continue;
      IterationRecord rec;
      rec.node = NodeId::server(s);
      rec.iteration = global_iter_;
      rec.wall_time = t_end;
      rec.server_compute = cfg_.cluster.server_update_cost + oracle_.compute_delay(rec.node, t, rt.persistent_cleared);
      monitor_.ingest(rec);
      if (opt_.collect_trace) trace_.push_back(TraceRow{t_end, rec.node, rec.server_compute, 0});
    }

    log(t_end, "iter",
        json{{"iter", global_iter_},
             {"dur_us", SimTime::from_seconds(iter_dur).us},
             {"alloc_total", alloc_total},
             {"drawn", drawn},
             {"accepted", accepted_samples},
             {"requeued", requeued},
             {"backup_b", backup_b_},
             {"overhead_us", SimTime::from_seconds(overhead).us}});

    t = t_end;
    ++global_iter_;
    ++metrics_.iterations;

    if (ledger_->complete()) {
      log(t, "epoch_complete", json{{"epoch", epoch_}});
      ++metrics_.epochs_completed;
      ++epoch_;
      if (epoch_ < cfg_.epochs) {
        build_epoch_ledger(t);
        snapshot_.reset();
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ASP
// ---------------------------------------------------------------------------

struct AspEvent {
  SimTime at;
  std::int64_t seq = 0;
  enum class Kind { CycleStart, ComputeDone, CycleEnd, Tick, Relaunch, Chaos } kind = Kind::CycleStart;
  std::int32_t worker = -1;  // Relaunch: negative encodes server -(index+1)
  std::int64_t version = 0;
  std::int64_t draw = 0;
  double t_w = 0, t_s = 0, t_m = 0;
  std::size_t chaos_idx = 0;

  bool operator>(const AspEvent& o) const { return std::tie(at.us, seq) > std::tie(o.at.us, o.seq); }
};

void Engine::run_asp() {
  std::priority_queue<AspEvent, std::vector<AspEvent>, std::greater<>> heap;
  std::int64_t seq = 0;
  auto push = [&](AspEvent e) {
    e.seq = ++seq;
    heap.push(e);
  };

  auto even_share = [&](std::int32_t w) {
    return cfg_.global_batch / cfg_.n_workers + (w < cfg_.global_batch % cfg_.n_workers ? 1 : 0);
  };

  const double act_every = cfg_.detection.act_every;
  {
    AspEvent tick;
    tick.at = SimTime::from_seconds(act_every);
    tick.kind = AspEvent::Kind::Tick;
    push(tick);
  }
  for (std::size_t i = 0; i < chaos_.size(); ++i) {
    AspEvent e;
    e.at = SimTime::from_seconds(chaos_[i].at);
    e.kind = AspEvent::Kind::Chaos;
    e.chaos_idx = i;
    push(e);
  }

  std::vector<bool> idle(static_cast<std::size_t>(cfg_.n_workers), false);

  std::function<void(std::int32_t, SimTime)> start_cycle = [&](std::int32_t w, SimTime t) {
    auto& rt = workers_[static_cast<std::size_t>(w)];
    if (!rt.alive) return;
    if (t < stall_until_) t = stall_until_;
    if (!rt.lease) {
      auto r = ledger_->fetch_shard(NodeId::worker(w), t);
      if (std::holds_alternative<ShardLedger::EpochExhausted>(r)) {
        idle[static_cast<std::size_t>(w)] = true;
        log(t, "worker_idle", json{{"node", NodeId::worker(w).to_json()}});
        return;
      }
      rt.lease = std::get<Shard>(r);
      rt.consumed = 0;
      log(t, "fetch", json{{"node", NodeId::worker(w).to_json()}, {"shard", rt.lease->id}});
    }
    const std::int64_t draw = std::min(rt.batch, rt.lease->length - rt.consumed);
    AspEvent e;
    e.kind = AspEvent::Kind::ComputeDone;
    e.worker = w;
    e.version = rt.event_version;
    e.draw = draw;
    e.t_w = compute_duration(rt, draw) + oracle_.compute_delay(NodeId::worker(w), t, rt.persistent_cleared);
    e.at = t + SimTime::from_seconds(e.t_w);
    push(e);
  };

  auto wake_idle = [&](SimTime t) {
    for (std::int32_t w = 0; w < cfg_.n_workers; ++w) {
      if (idle[static_cast<std::size_t>(w)] && workers_[static_cast<std::size_t>(w)].alive) {
        idle[static_cast<std::size_t>(w)] = false;
        start_cycle(w, t);
      }
    }
  };

  for (std::int32_t w = 0; w < cfg_.n_workers; ++w) {
    AspEvent e;
    e.at = SimTime::zero();
    e.kind = AspEvent::Kind::CycleStart;
    e.worker = w;
    e.version = workers_[static_cast<std::size_t>(w)].event_version;
    push(e);
  }

  while (!heap.empty()) {
    if (metrics_.aborted) return;
    AspEvent e = heap.top();
    heap.pop();

    switch (e.kind) {
      case AspEvent::Kind::CycleStart: {
        if (workers_[static_cast<std::size_t>(e.worker)].event_version != e.version) break;
        start_cycle(e.worker, e.at);
        break;
      }
      case AspEvent::Kind::ComputeDone: {
        auto& rt = workers_[static_cast<std::size_t>(e.worker)];
        if (rt.event_version != e.version || !rt.alive) break;
        // Push to every server; the slowest gates. Concurrent pushes at a
        // server inflate its service time by kappa each.
        double worst = 0;
        if (cfg_.architecture == Architecture::ParameterServer) {
          for (std::int32_t s = 0; s < cfg_.n_servers; ++s) {
            auto& srt = servers_[static_cast<std::size_t>(s)];
            auto& ends = srt.push_ends;
            ends.erase(std::remove_if(ends.begin(), ends.end(), [&](SimTime x) { return x <= e.at; }), ends.end());
            const double base = cfg_.cluster.server_update_cost +
                                oracle_.compute_delay(NodeId::server(s), e.at, srt.persistent_cleared);
            const double service =
                base * (1.0 + cfg_.cluster.server_contention_kappa * static_cast<double>(ends.size()));
            ends.push_back(e.at + SimTime::from_seconds(service));
            worst = std::max(worst, service);
            if ((rt.iteration + 1) % cfg_.detection.report_every == 0) {
              IterationRecord rec;
              rec.node = NodeId::server(s);
              rec.iteration = rt.iteration;
              rec.wall_time = e.at;
              rec.server_compute = service;
              monitor_.ingest(rec);
            }
          }
        }
        AspEvent done = e;
        done.kind = AspEvent::Kind::CycleEnd;
        done.t_s = worst;
        done.t_m = cfg_.cluster.comm_time * oracle_.comm_factor(NodeId::worker(e.worker), rt.persistent_cleared);
        done.at = e.at + SimTime::from_seconds(done.t_s + done.t_m);
        push(done);
        break;
      }
      case AspEvent::Kind::CycleEnd: {
        auto& rt = workers_[static_cast<std::size_t>(e.worker)];
        if (rt.event_version != e.version || !rt.alive) break;
        rt.consumed += e.draw;
        metrics_.processed_samples += e.draw;
        ++metrics_.iterations;
        ingest_worker_record(e.worker, e.at, e.t_w, e.t_s, e.t_m, e.draw);
        log(e.at, "cycle",
            json{{"node", NodeId::worker(e.worker).to_json()},
                 {"iter", rt.iteration},
                 {"dur_us", SimTime::from_seconds(e.t_w + e.t_s + e.t_m).us},
                 {"drawn", e.draw}});
        if (rt.lease && rt.consumed == rt.lease->length) {
          ledger_->report_done(rt.lease->id, NodeId::worker(e.worker), e.at);
          ++rt.done_shards;
          last_done_ = e.at;
          log(e.at, "shard_done",
              json{{"node", NodeId::worker(e.worker).to_json()},
                   {"shard", rt.lease->id},
                   {"epoch", epoch_},
                   {"start", rt.lease->start_offset},
                   {"len", rt.lease->length}});
          rt.lease.reset();
          rt.consumed = 0;
          if (ledger_->complete()) {
            log(e.at, "epoch_complete", json{{"epoch", epoch_}});
            ++metrics_.epochs_completed;
            ++epoch_;
            if (epoch_ < cfg_.epochs) {
              build_epoch_ledger(e.at);
              wake_idle(e.at);
            } else {
              return;
            }
          }
        }
        start_cycle(e.worker, e.at);
        break;
      }
      case AspEvent::Kind::Tick: {
        controller_.set_live_workers(agents_.live_workers());
        const Action a = controller_.tick(e.at, global_iter_);
        record_action(a, e.at);
        if (const auto* kr = std::get_if<Action::KillRestart>(&a.kind)) {
          if (kr->target.role == Role::Worker) {
            auto& rt = workers_[static_cast<std::size_t>(kr->target.index)];
            if (rt.alive) {
              terminate_worker(kr->target.index, e.at, "proactive_kill");
              AspEvent r;
              r.at = rt.relaunch_at;
              r.kind = AspEvent::Kind::Relaunch;
              r.worker = kr->target.index;
              push(r);
            }
          } else if (servers_[static_cast<std::size_t>(kr->target.index)].alive) {
            terminate_server(kr->target.index, e.at, "proactive_kill");
            AspEvent r;
            r.at = servers_[static_cast<std::size_t>(kr->target.index)].relaunch_at;
            r.kind = AspEvent::Kind::Relaunch;
            r.worker = -(kr->target.index + 1);
            push(r);
          }
        }
        AspEvent next;
        next.at = e.at + SimTime::from_seconds(act_every);
        next.kind = AspEvent::Kind::Tick;
        push(next);
        break;
      }
      case AspEvent::Kind::Relaunch: {
        if (e.worker >= 0) {
          relaunch_node(NodeId::worker(e.worker), e.at);
          workers_[static_cast<std::size_t>(e.worker)].batch = even_share(e.worker);
          idle[static_cast<std::size_t>(e.worker)] = false;
          start_cycle(e.worker, e.at);
        } else {
          relaunch_node(NodeId::server(-e.worker - 1), e.at);
        }
        break;
      }
      case AspEvent::Kind::Chaos: {
        const auto& f = chaos_[e.chaos_idx];
        if (f.error == "config_error" || f.error == "program_error") {
          log(e.at, "abort", json{{"node", f.node.to_json()}, {"cause", f.error}});
          metrics_.aborted = true;
          return;
        }
        if (f.node.role == Role::Worker) {
          auto& rt = workers_[static_cast<std::size_t>(f.node.index)];
          if (rt.alive) {
            terminate_worker(f.node.index, e.at, f.error.c_str());
            AspEvent r;
            r.at = rt.relaunch_at;
            r.kind = AspEvent::Kind::Relaunch;
            r.worker = f.node.index;
            push(r);
          }
        } else {
          auto& rt = servers_[static_cast<std::size_t>(f.node.index)];
          if (rt.alive) {
            terminate_server(f.node.index, e.at, f.error.c_str());
            AspEvent r;
            r.at = rt.relaunch_at;
            r.kind = AspEvent::Kind::Relaunch;
            r.worker = -(f.node.index + 1);
            push(r);
          }
        }
        break;
      }
    }
  }
  if (epoch_ < cfg_.epochs) throw ProtocolError("asp simulation wedged before final epoch");
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opt) {
  const auto violations = validate_config(cfg);
  if (!violations.empty()) throw ConfigError("invalid scenario: " + violations.front().str());
  Engine engine(cfg, opt);
  return engine.run();
}

}  // namespace antdt
