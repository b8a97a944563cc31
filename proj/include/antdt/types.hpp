#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "antdt/time.hpp"

namespace antdt {

using json = nlohmann::json;

enum class Role { Worker, Server };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct NodeId {
  Role role = Role::Worker;
  std::int32_t index = 0;

  static NodeId worker(std::int32_t i) { return NodeId{Role::Worker, i}; }
  static NodeId server(std::int32_t i) { return NodeId{Role::Server, i}; }

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;

  json to_json() const;
  static NodeId from_json(const json& j);
  std::string str() const;  // "worker-3", "server-0"
};

struct NodeIdHash {
  std::size_t operator()(const NodeId& n) const {
    return std::hash<std::int64_t>()((static_cast<std::int64_t>(n.role) << 32) | static_cast<std::uint32_t>(n.index));
  }
};

// One iteration's timing decomposition for a node. Worker records carry the
// local batch size; server records carry the server's own aggregation time
// and batch_size 0.
struct IterationRecord {
  NodeId node;
  std::int64_t iteration = 0;
  SimTime wall_time;        // event-clock timestamp of iteration completion
  double worker_compute = 0.0;  // T^w, seconds
  double server_compute = 0.0;  // T^s, seconds
  double comm = 0.0;            // T^m, seconds
  std::int64_t batch_size = 0;

  json to_json() const;
  static IterationRecord from_json(const json& j);
};

// Per-worker batch sizes and gradient-accumulation counts. The entries sum
// (batch * accum over all listed workers) to the global batch exactly.
struct BatchAllocation {
  struct Entry {
    std::int32_t worker = 0;
    std::int64_t batch = 0;
    std::int32_t accum = 1;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> per_worker;

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& e : per_worker) t += e.batch * e.accum;
    return t;
  }
  friend bool operator==(const BatchAllocation&, const BatchAllocation&) = default;

  json to_json() const;
  static BatchAllocation from_json(const json& j);
};

// Mitigation command vocabulary. AdjustLr is carried for completeness of the
// action set but no policy emits it and the simulator treats it as a timing
// no-op.
struct Action {
  struct None {
    friend bool operator==(const None&, const None&) = default;
  };
  struct AdjustBs {
    BatchAllocation alloc;
    friend bool operator==(const AdjustBs&, const AdjustBs&) = default;
  };
  struct BackupWorkers {
    std::int32_t b = 0;
    friend bool operator==(const BackupWorkers&, const BackupWorkers&) = default;
  };
  struct KillRestart {
    NodeId target;
    friend bool operator==(const KillRestart&, const KillRestart&) = default;
  };
  struct AdjustLr {
    struct Scale {
      std::int32_t worker = 0;
      double scale = 1.0;
      friend bool operator==(const Scale&, const Scale&) = default;
    };
    std::vector<Scale> scales;
    friend bool operator==(const AdjustLr&, const AdjustLr&) = default;
  };

  std::variant<None, AdjustBs, BackupWorkers, KillRestart, AdjustLr> kind;
  std::int64_t issue_iteration = 0;

  bool is_none() const { return std::holds_alternative<None>(kind); }
  const char* kind_name() const;

  json to_json() const;
  static Action from_json(const json& j);
  friend bool operator==(const Action&, const Action&) = default;
};

}  // namespace antdt
