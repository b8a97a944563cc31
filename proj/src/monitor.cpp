#include "antdt/monitor.hpp"

#include "antdt/error.hpp"

namespace antdt {

void Monitor::ingest(const IterationRecord& rec) {
  auto& w = windows_[rec.node];
  if (w.has_last && rec.wall_time < w.last)
    throw OutOfOrder("record for " + rec.node.str() + " older than the latest ingested");
  w.records.push_back(rec);
  w.has_last = true;
  w.last = rec.wall_time;
  const SimTime cutoff = rec.wall_time - SimTime::from_seconds(opt_.evict_horizon);
  while (!w.records.empty() && w.records.front().wall_time < cutoff) w.records.pop_front();
}

Directive Monitor::on_node_event(const NodeEvent& ev) {
  switch (ev.kind) {
    case NodeEvent::Kind::Terminated:
      if (ev.error.kind == ErrorClass::Kind::Unretryable) return Directive::AbortJob;
      return ev.node.role == Role::Worker ? Directive::RequeueShards : Directive::None;
    case NodeEvent::Kind::Launched: {
      // A relaunched node starts with empty windows; stale pre-restart
      // records must not feed detection.
      auto it = windows_.find(ev.node);
      if (it != windows_.end()) windows_.erase(it);
      launch_[ev.node] = ev.at;
      return Directive::None;
    }
    case NodeEvent::Kind::CheckpointSaved:
      return Directive::None;
  }
  return Directive::None;
}

std::optional<double> Monitor::mean_bpt(NodeId node, double horizon, SimTime now) const {
  auto it = windows_.find(node);
  if (it == windows_.end()) return std::nullopt;
  const SimTime from = now - SimTime::from_seconds(horizon);
  double sum = 0;
  std::int64_t count = 0;
  for (auto r = it->second.records.rbegin(); r != it->second.records.rend(); ++r) {
    if (r->wall_time > now) continue;
    if (r->wall_time < from) break;
    sum += node.role == Role::Worker ? r->worker_compute : r->server_compute;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::optional<double> Monitor::fleet_mean_bpt(Role role, double horizon, SimTime now) const {
  double sum = 0;
  std::int64_t count = 0;
  // Deterministic accumulation order: iterate indexes, not hash order.
  std::int32_t max_index = -1;
  for (const auto& [node, _] : windows_)
    if (node.role == role) max_index = std::max(max_index, node.index);
  for (std::int32_t i = 0; i <= max_index; ++i) {
    if (auto m = mean_bpt(NodeId{role, i}, horizon, now)) {
      sum += *m;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::optional<double> Monitor::throughput(NodeId worker, double horizon, SimTime now) const {
  auto it = windows_.find(worker);
  if (it == windows_.end()) return std::nullopt;
  const SimTime from = now - SimTime::from_seconds(horizon);
  double sum = 0;
  std::int64_t count = 0;
  for (auto r = it->second.records.rbegin(); r != it->second.records.rend(); ++r) {
    if (r->wall_time > now) continue;
    if (r->wall_time < from) break;
    if (r->worker_compute <= 0) {
      ++anomalies_;
      continue;
    }
    sum += static_cast<double>(r->batch_size) / r->worker_compute;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

ClusterSignal Monitor::cluster_signal() const {
  return ClusterSignal{opt_.pending_time, opt_.pending_time > opt_.busy_threshold};
}

std::optional<SimTime> Monitor::launch_time(NodeId node) const {
  auto it = launch_.find(node);
  if (it == launch_.end()) return std::nullopt;
  return it->second;
}

}  // namespace antdt
