#include "antdt/presets.hpp"

namespace antdt {

namespace {

StragglerPattern transient_workers(double intensity) {
  StragglerPattern p;
  p.kind = StragglerPattern::Kind::Transient;
  p.sleep_duration = 1.5;
  p.intensity = intensity;
  p.on_period = 900;
  p.cycle = 1800;
  p.probability = 0.3;
  p.target_set = StragglerPattern::TargetSet::Workers;
  return p;
}

StragglerPattern persistent_on(NodeId node, double delay) {
  StragglerPattern p;
  p.kind = StragglerPattern::Kind::Persistent;
  p.delay = delay;
  p.target_set = StragglerPattern::TargetSet::Nodes;
  p.nodes = {node};
  return p;
}

// Cluster-A shape: 20 workers, 8 servers, global batch 81920 (local 4096),
// Criteo-sized epoch, three epochs.
ScenarioConfig cluster_a_base() {
  ScenarioConfig c;
  c.n_workers = 20;
  c.n_servers = 8;
  c.global_batch = 81920;
  c.samples = 45'000'000;
  c.batches_per_shard = 5;  // 409,600-sample shards, K = 110 per epoch
  c.epochs = 3;
  c.consistency = Consistency::BSP;
  c.architecture = Architecture::ParameterServer;
  c.policy = PolicyKind::AntDtNd;
  c.detection = DetectionConfig{1.5, 300, 600, 10, 300};
  c.failover = FailoverConfig{30, 600, 60, 30, 1800, 0, RecomputeMode::DdsBased};
  c.cluster.worker_speed = 3000;
  c.cluster.server_update_cost = 0.06;
  c.cluster.comm_time = 0.05;
  c.seed = 42;
  return c;
}

// One transient-intensity point. The persistent co-straggler deepens with
// intensity and reaches the 4-second mark at intensity 0.8.
Preset nd_worker(double intensity, double persistent_delay, const char* name) {
  ScenarioConfig c = cluster_a_base();
  c.patterns = {transient_workers(intensity), persistent_on(NodeId::worker(3), persistent_delay)};
  return Preset{name,
                "Cluster-A shape, transient worker stragglers (SleepDuration 1.5 s, intensity " +
                    std::to_string(intensity).substr(0, 3) + ", p=0.3) plus a persistent straggler on worker 3",
                c};
}

std::vector<Preset> make_presets() {
  std::vector<Preset> out;

  out.push_back(nd_worker(0.1, 0.5, "nd-worker-si01"));
  out.push_back(nd_worker(0.3, 2.0, "nd-worker-si03"));
  out.push_back(nd_worker(0.5, 3.0, "nd-worker-si05"));
  out.push_back(nd_worker(0.8, 4.0, "nd-worker-si08"));

  {
    ScenarioConfig c = cluster_a_base();
    c.patterns = {persistent_on(NodeId::server(3), 4.0)};
    out.push_back(Preset{"nd-server-persistent",
                         "Cluster-A shape, constant 4 s aggregation delay on server 3 for the whole run", c});
  }

  {
    ScenarioConfig base = cluster_a_base();
    base.consistency = Consistency::ASP;
    base.patterns = {transient_workers(0.8), persistent_on(NodeId::worker(3), 6.0)};

    ScenarioConfig native = base;
    native.policy = PolicyKind::NativeASP;
    out.push_back(Preset{"asp-native", "ASP with even data partition; worker stragglers; JCT gated by the slowest",
                         native});

    ScenarioConfig dds = base;
    dds.policy = PolicyKind::AspDds;
    out.push_back(Preset{"asp-dds", "ASP pulling shards from the shared DDS queue; worker stragglers", dds});

    ScenarioConfig antdt = base;
    antdt.policy = PolicyKind::AntDtNd;
    out.push_back(Preset{"asp-antdt", "ASP with DDS plus KILL_RESTART of persistent stragglers", antdt});
  }

  {
    ScenarioConfig c;
    c.n_workers = 8;
    c.n_servers = 0;
    c.global_batch = 768;
    c.samples = 1'280'000;
    c.batches_per_shard = 50;  // 38,400-sample shards, K = 34
    c.epochs = 1;
    c.consistency = Consistency::BSP;
    c.architecture = Architecture::AllReduce;
    c.policy = PolicyKind::AntDtDd;
    c.detection = DetectionConfig{1.5, 300, 600, 10, 300};
    c.failover = FailoverConfig{30, 600, 60, 30, 1800, 0, RecomputeMode::DdsBased};
    c.cluster.worker_speed = 320;
    c.cluster.comm_time = 0.05;
    c.device_classes = {DeviceClass{4, 1.0, 64, 112}, DeviceClass{4, 0.32, 64, 112}};
    c.accum = AccumConfig{1, 5};
    c.seed = 42;
    out.push_back(Preset{"dd-hetero-gpu",
                         "AllReduce, 4 fast + 4 slow devices (speed ratio ~3:1) with batch bounds and gradient "
                         "accumulation",
                         c});
  }

  {
    ScenarioConfig c;
    c.n_workers = 8;
    c.n_servers = 4;
    c.global_batch = 8192;
    c.samples = 45'056'000;
    c.batches_per_shard = 25;  // 204,800-sample shards, K = 220
    c.epochs = 1;
    c.consistency = Consistency::BSP;
    c.architecture = Architecture::ParameterServer;
    c.policy = PolicyKind::NativeBSP;
    c.detection = DetectionConfig{1.5, 300, 600, 10, 300};
    c.failover = FailoverConfig{30, 600, 60, 30, 900, 100, RecomputeMode::DdsBased};
    c.cluster.worker_speed = 3000;
    c.cluster.server_update_cost = 0.06;
    c.cluster.comm_time = 0.05;
    c.chaos.scheduled = {ChaosConfig::ScheduledFailure{NodeId::worker(5), 1793.0, "eviction"}};
    c.seed = 42;
    out.push_back(Preset{"failover-compare",
                         "One worker eviction at t=1793 s; sweep failover.checkpoint_interval and recompute_mode to "
                         "compare DDS-based against checkpoint-based recovery delay",
                         c});
  }

  {
    ScenarioConfig c;
    c.n_workers = 10;
    c.n_servers = 2;
    c.global_batch = 10240;
    c.samples = 4'096'000;
    c.batches_per_shard = 2;  // 20,480-sample shards, K = 200
    c.epochs = 1;
    c.consistency = Consistency::ASP;
    c.architecture = Architecture::ParameterServer;
    c.policy = PolicyKind::AspDds;
    c.detection = DetectionConfig{1.5, 300, 600, 10, 300};
    c.failover = FailoverConfig{30, 600, 60, 30, 1800, 0, RecomputeMode::DdsBased};
    c.cluster.worker_speed = 2000;
    c.cluster.server_update_cost = 0.01;
    c.cluster.comm_time = 0.02;
    for (std::int32_t w = 0; w < 10; ++w) {
      StragglerPattern p;
      p.kind = StragglerPattern::Kind::Deterministic;
      p.multiplier = 0.4 + 0.1 * w;
      p.target_set = StragglerPattern::TargetSet::Nodes;
      p.nodes = {NodeId::worker(w)};
      c.patterns.push_back(p);
    }
    c.seed = 42;
    out.push_back(Preset{"dds-proportional",
                         "ASP-DDS over a ladder of deterministic worker speeds; shard counts track throughput", c});
  }

  return out;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = make_presets();
  return all;
}

std::optional<ScenarioConfig> preset_config(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p.cfg;
  }
  return std::nullopt;
}

}  // namespace antdt
