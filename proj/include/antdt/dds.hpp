#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "antdt/time.hpp"
#include "antdt/types.hpp"

namespace antdt {

// A half-open range [start_offset, start_offset + length) of sample indexes.
// Each shard carries just the two integers.
struct Shard {
  std::int64_t id = 0;
  std::int64_t start_offset = 0;
  std::int64_t length = 0;
  std::int32_t epoch = 0;
};

struct ShardState {
  enum class Phase { Todo, Doing, Done };
  Phase phase = Phase::Todo;
  NodeId holder;       // Doing: current holder; Done: finisher
  SimTime stamp;       // leased_at / done_at
};

struct EpochProgress {
  std::int64_t todo = 0;
  std::int64_t doing = 0;
  std::int64_t done = 0;
};

// The shard queue plus per-shard lifecycle states for one epoch. All
// mutations go through one owner; callers in other threads interact via
// request/response messages (see DdsService).
class ShardLedger {
 public:
  // Splits [0, N) into K = ceil(N / (B*M)) shards; the first K-1 have length
  // B*M and the last takes the remainder. Queue order is a seed-deterministic
  // shuffle. When partition_workers > 0 every shard is pre-assigned an owner
  // round-robin over the shuffled order (the even data partition strategy)
  // and fetches only pop shards owned by the caller.
  static ShardLedger build(std::int64_t samples, std::int64_t global_batch, std::int64_t batches_per_shard,
                           std::int32_t epoch, std::uint64_t seed, std::int32_t partition_workers = 0);

  struct EpochExhausted {};
  std::variant<Shard, EpochExhausted> fetch_shard(NodeId worker, SimTime now);
  void report_done(std::int64_t shard_id, NodeId worker, SimTime now);
  // Requeues every shard the node holds to the queue tail in lease order;
  // returns how many. Idempotent.
  std::int64_t recover_node(NodeId node);
  EpochProgress epoch_progress() const;

  const Shard& shard(std::int64_t id) const { return shards_.at(static_cast<std::size_t>(id)); }
  const ShardState& state(std::int64_t id) const { return states_.at(static_cast<std::size_t>(id)); }
  std::int64_t total_shards() const { return static_cast<std::int64_t>(shards_.size()); }
  std::int32_t epoch() const { return epoch_; }
  bool complete() const { return done_ == total_shards(); }

  // Sorted Done ranges; used by integrity audits.
  std::vector<std::pair<std::int64_t, std::int64_t>> done_ranges() const;

 private:
  std::int32_t epoch_ = 0;
  std::vector<Shard> shards_;       // by id
  std::vector<ShardState> states_;  // by id
  std::vector<std::int32_t> owner_;  // even-partition owner per shard, or empty
  std::deque<std::int64_t> queue_;  // Todo ids in fetch order
  std::int64_t done_ = 0;
  std::int64_t doing_ = 0;

  void check_conservation() const;
};

}  // namespace antdt
