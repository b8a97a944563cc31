#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "antdt/types.hpp"

namespace antdt {

enum class Consistency { BSP, ASP };
enum class Architecture { ParameterServer, AllReduce };
enum class PolicyKind { NativeBSP, NativeASP, AspDds, BackupWorkers, LbBsp, AntDtNd, AntDtDd };
enum class RecomputeMode { DdsBased, CheckpointBased };

struct DetectionConfig {
  double lambda = 1.5;            // slowness ratio, > 1
  double window_transient = 300;  // L^trans, seconds
  double window_persistent = 600; // L^per, seconds
  std::int32_t report_every = 10; // agent flush cadence, iterations
  double act_every = 300;         // controller tick cadence, seconds
};

struct StragglerPattern {
  enum class Kind { Transient, Persistent, Deterministic };
  enum class Affects { Compute, Comm };

  Kind kind = Kind::Persistent;
  // Transient
  double sleep_duration = 0;  // seconds; delay per iteration = sleep_duration * intensity
  double intensity = 0;       // [0, 1]
  double on_period = 0;       // seconds disturbed at the start of each cycle
  double cycle = 0;           // seconds
  double probability = 0;     // per-node chance of being disturbed
  bool fixed_draw = false;    // draw once per run instead of once per cycle
  // Persistent
  double delay = 0;  // constant seconds per iteration
  Affects affects = Affects::Compute;
  // Deterministic
  double multiplier = 1.0;  // speed factor applied to v_i

  // Targets: all workers, all servers, or an explicit node list.
  enum class TargetSet { Workers, Servers, Nodes };
  TargetSet target_set = TargetSet::Workers;
  std::vector<NodeId> nodes;

  bool targets(NodeId n) const;
};

struct FailoverConfig {
  double pending_time_idle = 30;
  double pending_time_busy = 600;
  double node_init = 60;
  double restore = 30;
  double checkpoint_interval = 1800;
  double checkpoint_save = 0;  // stall per checkpoint save
  RecomputeMode recompute_mode = RecomputeMode::DdsBased;
};

// Simulator cluster model knobs. T^m and the ASP server contention factor
// are modeling assumptions; the paper gives the structure but not values.
struct ClusterModel {
  double worker_speed = 3000;       // base v_i, samples/second
  double server_update_cost = 0.05; // per-worker aggregation seconds per iteration
  double comm_time = 0.05;          // T^m seconds per iteration
  double server_contention_kappa = 0.1;  // ASP per-push inflation per concurrent push
  double pending_time = 0;          // scheduler pending time fed to ClusterSignal
  double busy_threshold = 120;      // busy iff pending_time > threshold
  double sync_latency = 0.001;      // agent envelope latency, seconds
};

struct DeviceClass {
  std::int32_t count = 0;
  double speed_multiplier = 1.0;
  std::int64_t b_min = 1;  // saturation point
  std::int64_t b_max = 1;  // memory-limited batch cap
};

struct AccumConfig {
  std::int32_t c_min = 1;
  std::int32_t c_max = 1;
};

struct ChaosConfig {
  struct ScheduledFailure {
    NodeId node;
    double at = 0;  // seconds
    std::string error = "eviction";  // eviction | network | config_error | program_error
  };
  std::vector<ScheduledFailure> scheduled;
  std::int32_t random_failures = 0;  // seeded uniform worker failures
  double failure_window_begin = 0;
  double failure_window_end = 0;
};

struct ScenarioConfig {
  std::int32_t n_workers = 1;
  std::int32_t n_servers = 0;
  std::int64_t global_batch = 1;     // B
  std::int64_t samples = 1;          // N
  std::int64_t batches_per_shard = 1;  // M
  std::int32_t epochs = 1;
  Consistency consistency = Consistency::BSP;
  Architecture architecture = Architecture::ParameterServer;
  PolicyKind policy = PolicyKind::NativeBSP;
  std::int32_t backup_b = 0;  // only for PolicyKind::BackupWorkers
  DetectionConfig detection;
  std::vector<StragglerPattern> patterns;
  FailoverConfig failover;
  std::uint64_t seed = 0;
  ClusterModel cluster;
  std::vector<DeviceClass> device_classes;
  AccumConfig accum;
  ChaosConfig chaos;

  json to_json() const;
  // Strict parse: any key not in the schema is a hard error.
  static ScenarioConfig from_json(const json& j);
  static ScenarioConfig from_file(const std::string& path);
};

struct Violation {
  std::string path;
  std::string message;
  std::string str() const { return path + ": " + message; }
};

// Returns every invariant violation; empty means the config is accepted by
// every downstream module.
std::vector<Violation> validate_config(const ScenarioConfig& cfg);

}  // namespace antdt
