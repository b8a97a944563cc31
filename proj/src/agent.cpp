#include "antdt/agent.hpp"

#include "antdt/error.hpp"

namespace antdt {

namespace {
constexpr std::size_t kMaxBuffered = 1000;
}

json SyncEnvelope::to_json() const {
  return json{{"action", action.to_json()}, {"apply_at_iteration", apply_at_iteration}, {"broadcast_seq", broadcast_seq}};
}

SyncEnvelope SyncEnvelope::from_json(const json& j) {
  SyncEnvelope e;
  e.action = Action::from_json(j.at("action"));
  e.apply_at_iteration = j.at("apply_at_iteration").get<std::int64_t>();
  e.broadcast_seq = j.at("broadcast_seq").get<std::int64_t>();
  return e;
}

void Agent::report_tick(std::int64_t iteration, const IterationRecord& rec, Monitor* monitor, bool monitor_up) {
  buffer_.push_back(rec);
  while (buffer_.size() > kMaxBuffered) {
    buffer_.pop_front();
    ++dropped_;
  }
  if (iteration % report_every_ != 0) return;
  if (!monitor_up || monitor == nullptr) return;  // keep buffering, retry next flush
  while (!buffer_.empty()) {
    monitor->ingest(buffer_.front());
    buffer_.pop_front();
  }
}

std::optional<Agent::Applied> Agent::barrier_apply(std::int64_t iteration) {
  if (!pending_) return std::nullopt;
  if (iteration > pending_->apply_at_iteration) {
    ++late_;
    pending_.reset();
    return std::nullopt;
  }
  if (iteration < pending_->apply_at_iteration) return std::nullopt;

  Applied out;
  const Action& a = pending_->action;
  if (const auto* adj = std::get_if<Action::AdjustBs>(&a.kind)) {
    for (const auto& e : adj->alloc.per_worker) {
      if (e.worker == node_.index) {
        out.batch = e.batch;
        out.accum = e.accum;
      }
    }
  } else if (const auto* bw = std::get_if<Action::BackupWorkers>(&a.kind)) {
    out.backup_b = bw->b;
  } else if (const auto* kr = std::get_if<Action::KillRestart>(&a.kind)) {
    if (kr->target == node_) out.terminate = true;
  }
  pending_.reset();
  return out;
}

AgentGroup::AgentGroup(std::int32_t n_workers, std::int32_t report_every) {
  agents_.reserve(static_cast<std::size_t>(n_workers));
  for (std::int32_t i = 0; i < n_workers; ++i) agents_.emplace_back(NodeId::worker(i), report_every);
  alive_.assign(static_cast<std::size_t>(n_workers), true);
  unreachable_.assign(static_cast<std::size_t>(n_workers), false);
}

std::int32_t AgentGroup::primary() const {
  for (std::size_t i = 0; i < alive_.size(); ++i)
    if (alive_[i]) return static_cast<std::int32_t>(i);
  return -1;
}

void AgentGroup::set_alive(std::int32_t worker, bool alive) { alive_[static_cast<std::size_t>(worker)] = alive; }

std::vector<std::int32_t> AgentGroup::live_workers() const {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < alive_.size(); ++i)
    if (alive_[i]) out.push_back(static_cast<std::int32_t>(i));
  return out;
}

std::optional<SyncEnvelope> AgentGroup::broadcast(const Action& action, std::int64_t current_global_iteration) {
  if (action.is_none()) return std::nullopt;
  if (primary() < 0) return std::nullopt;
  for (std::size_t i = 0; i < alive_.size(); ++i) {
    if (alive_[i] && unreachable_[i]) {
      ++aborted_;
      return std::nullopt;
    }
  }
  SyncEnvelope env;
  env.action = action;
  env.apply_at_iteration = current_global_iteration + kSyncLead;
  env.broadcast_seq = ++seq_;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (alive_[i]) agents_[i].deliver(env);
  }
  return env;
}

}  // namespace antdt
