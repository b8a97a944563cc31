#include "antdt/dds.hpp"

#include <algorithm>
#include <cassert>

#include "antdt/error.hpp"
#include "antdt/rng.hpp"

namespace antdt {

ShardLedger ShardLedger::build(std::int64_t samples, std::int64_t global_batch, std::int64_t batches_per_shard,
                               std::int32_t epoch, std::uint64_t seed, std::int32_t partition_workers) {
  if (samples < 1 || global_batch < 1 || batches_per_shard < 1)
    throw ConfigError("build_shards requires N, B, M >= 1");
  if (global_batch > std::numeric_limits<std::int64_t>::max() / batches_per_shard)
    throw ConfigError("B*M overflows");
  const std::int64_t shard_len = global_batch * batches_per_shard;
  const std::int64_t k = (samples + shard_len - 1) / shard_len;

  ShardLedger l;
  l.epoch_ = epoch;
  l.shards_.reserve(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t start = i * shard_len;
    const std::int64_t len = std::min(shard_len, samples - start);
    l.shards_.push_back(Shard{i, start, len, epoch});
  }
  l.states_.assign(static_cast<std::size_t>(k), ShardState{});

  // Shard Shuffler: Fisher-Yates over shard order, keyed by seed and epoch.
  std::vector<std::int64_t> order(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  SeededRng rng(seed ^ static_cast<std::uint64_t>(epoch));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.bounded(i)]);
  }
  l.queue_.assign(order.begin(), order.end());

  if (partition_workers > 0) {
    l.owner_.assign(static_cast<std::size_t>(k), 0);
    std::int32_t w = 0;
    for (std::int64_t id : order) {
      l.owner_[static_cast<std::size_t>(id)] = w;
      w = (w + 1) % partition_workers;
    }
  }
  return l;
}

std::variant<Shard, ShardLedger::EpochExhausted> ShardLedger::fetch_shard(NodeId worker, SimTime now) {
  if (worker.role != Role::Worker) throw ProtocolError("fetch_shard: only workers fetch shards");
  auto it = queue_.begin();
  if (!owner_.empty()) {
    it = std::find_if(queue_.begin(), queue_.end(),
                      [&](std::int64_t id) { return owner_[static_cast<std::size_t>(id)] == worker.index; });
  }
  if (it == queue_.end()) return EpochExhausted{};
  const std::int64_t id = *it;
  queue_.erase(it);
  auto& st = states_[static_cast<std::size_t>(id)];
  st.phase = ShardState::Phase::Doing;
  st.holder = worker;
  st.stamp = now;
  ++doing_;
  check_conservation();
  return shards_[static_cast<std::size_t>(id)];
}

void ShardLedger::report_done(std::int64_t shard_id, NodeId worker, SimTime now) {
  if (shard_id < 0 || shard_id >= total_shards()) throw ProtocolError("report_done: unknown shard id");
  auto& st = states_[static_cast<std::size_t>(shard_id)];
  if (st.phase != ShardState::Phase::Doing)
    throw IllegalTransition("report_done on shard " + std::to_string(shard_id) + " not in DOING");
  if (st.holder != worker)
    throw IllegalTransition("report_done on shard " + std::to_string(shard_id) + " held by " + st.holder.str() +
                            ", reported by " + worker.str());
  st.phase = ShardState::Phase::Done;
  st.holder = worker;
  st.stamp = now;
  --doing_;
  ++done_;
  check_conservation();
}

std::int64_t ShardLedger::recover_node(NodeId node) {
  // Collect the node's leases in ascending lease order, then append to the
  // queue tail.
  std::vector<std::pair<SimTime, std::int64_t>> held;
  for (std::int64_t id = 0; id < total_shards(); ++id) {
    const auto& st = states_[static_cast<std::size_t>(id)];
    if (st.phase == ShardState::Phase::Doing && st.holder == node) held.emplace_back(st.stamp, id);
  }
  std::sort(held.begin(), held.end());
  for (const auto& [_, id] : held) {
    auto& st = states_[static_cast<std::size_t>(id)];
    st.phase = ShardState::Phase::Todo;
    st.holder = NodeId{};
    st.stamp = SimTime::zero();
    queue_.push_back(id);
    --doing_;
  }
  check_conservation();
  return static_cast<std::int64_t>(held.size());
}

EpochProgress ShardLedger::epoch_progress() const {
  return EpochProgress{total_shards() - doing_ - done_, doing_, done_};
}

std::vector<std::pair<std::int64_t, std::int64_t>> ShardLedger::done_ranges() const {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t id = 0; id < total_shards(); ++id) {
    if (states_[static_cast<std::size_t>(id)].phase == ShardState::Phase::Done) {
      const auto& s = shards_[static_cast<std::size_t>(id)];
      out.emplace_back(s.start_offset, s.start_offset + s.length);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ShardLedger::check_conservation() const {
  assert(static_cast<std::int64_t>(queue_.size()) + doing_ + done_ == total_shards());
}

}  // namespace antdt
