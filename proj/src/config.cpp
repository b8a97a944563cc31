#include "antdt/config.hpp"

#include <fstream>
#include <set>

#include "antdt/error.hpp"

namespace antdt {

namespace {

std::string consistency_str(Consistency c) { return c == Consistency::BSP ? "bsp" : "asp"; }
std::string architecture_str(Architecture a) {
  return a == Architecture::ParameterServer ? "parameter_server" : "all_reduce";
}
std::string recompute_str(RecomputeMode m) {
  return m == RecomputeMode::DdsBased ? "dds_based" : "checkpoint_based";
}

std::string policy_str(PolicyKind p) {
  switch (p) {
    case PolicyKind::NativeBSP: return "native_bsp";
    case PolicyKind::NativeASP: return "native_asp";
    case PolicyKind::AspDds: return "asp_dds";
    case PolicyKind::BackupWorkers: return "backup_workers";
    case PolicyKind::LbBsp: return "lb_bsp";
    case PolicyKind::AntDtNd: return "antdt_nd";
    case PolicyKind::AntDtDd: return "antdt_dd";
  }
  return "?";
}

PolicyKind policy_from_str(const std::string& s) {
  if (s == "native_bsp") return PolicyKind::NativeBSP;
  if (s == "native_asp") return PolicyKind::NativeASP;
  if (s == "asp_dds") return PolicyKind::AspDds;
  if (s == "backup_workers") return PolicyKind::BackupWorkers;
  if (s == "lb_bsp") return PolicyKind::LbBsp;
  if (s == "antdt_nd") return PolicyKind::AntDtNd;
  if (s == "antdt_dd") return PolicyKind::AntDtDd;
  throw ConfigError("unknown policy: " + s);
}

// Rejects keys outside the allowed set; the error names the offending key.
void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

json pattern_to_json(const StragglerPattern& p) {
  json j;
  switch (p.kind) {
    case StragglerPattern::Kind::Transient:
      j = json{{"kind", "transient"},       {"sleep_duration", p.sleep_duration},
               {"intensity", p.intensity},  {"on_period", p.on_period},
               {"cycle", p.cycle},          {"probability", p.probability},
               {"fixed_draw", p.fixed_draw}};
      break;
    case StragglerPattern::Kind::Persistent:
      j = json{{"kind", "persistent"},
               {"delay", p.delay},
               {"affects", p.affects == StragglerPattern::Affects::Comm ? "comm" : "compute"}};
      break;
    case StragglerPattern::Kind::Deterministic:
      j = json{{"kind", "deterministic"}, {"multiplier", p.multiplier}};
      break;
  }
  switch (p.target_set) {
    case StragglerPattern::TargetSet::Workers: j["targets"] = "workers"; break;
    case StragglerPattern::TargetSet::Servers: j["targets"] = "servers"; break;
    case StragglerPattern::TargetSet::Nodes: {
      json nodes = json::array();
      for (const auto& n : p.nodes) nodes.push_back(n.to_json());
      j["targets"] = json{{"nodes", nodes}};
      break;
    }
  }
  return j;
}

StragglerPattern pattern_from_json(const json& j, const std::string& where) {
  StragglerPattern p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "transient") {
    check_keys(j, where,
               {"kind", "sleep_duration", "intensity", "on_period", "cycle", "probability", "fixed_draw", "targets"});
    p.kind = StragglerPattern::Kind::Transient;
    p.sleep_duration = j.at("sleep_duration").get<double>();
    p.intensity = j.at("intensity").get<double>();
    p.on_period = j.at("on_period").get<double>();
    p.cycle = j.at("cycle").get<double>();
    p.probability = j.at("probability").get<double>();
    p.fixed_draw = get_or(j, "fixed_draw", false);
  } else if (kind == "persistent") {
    check_keys(j, where, {"kind", "delay", "affects", "targets"});
    p.kind = StragglerPattern::Kind::Persistent;
    p.delay = j.at("delay").get<double>();
    const std::string affects = get_or<std::string>(j, "affects", "compute");
    if (affects == "comm") {
      p.affects = StragglerPattern::Affects::Comm;
    } else if (affects == "compute") {
      p.affects = StragglerPattern::Affects::Compute;
    } else {
      throw ConfigError(where + ".affects: unknown value \"" + affects + "\"");
    }
  } else if (kind == "deterministic") {
    check_keys(j, where, {"kind", "multiplier", "targets"});
    p.kind = StragglerPattern::Kind::Deterministic;
    p.multiplier = j.at("multiplier").get<double>();
  } else {
    throw ConfigError(where + ".kind: unknown pattern kind \"" + kind + "\"");
  }

  const json& t = j.at("targets");
  if (t.is_string()) {
    const std::string s = t.get<std::string>();
    if (s == "workers") {
      p.target_set = StragglerPattern::TargetSet::Workers;
    } else if (s == "servers") {
      p.target_set = StragglerPattern::TargetSet::Servers;
    } else {
      throw ConfigError(where + ".targets: unknown value \"" + s + "\"");
    }
  } else {
    check_keys(t, where + ".targets", {"nodes"});
    p.target_set = StragglerPattern::TargetSet::Nodes;
    for (const auto& n : t.at("nodes")) p.nodes.push_back(NodeId::from_json(n));
  }
  return p;
}

}  // namespace

bool StragglerPattern::targets(NodeId n) const {
  switch (target_set) {
    case TargetSet::Workers: return n.role == Role::Worker;
    case TargetSet::Servers: return n.role == Role::Server;
    case TargetSet::Nodes:
      for (const auto& t : nodes)
        if (t == n) return true;
      return false;
  }
  return false;
}

json ScenarioConfig::to_json() const {
  json j;
  j["n_workers"] = n_workers;
  j["n_servers"] = n_servers;
  j["global_batch"] = global_batch;
  j["samples"] = samples;
  j["batches_per_shard"] = batches_per_shard;
  j["epochs"] = epochs;
  j["consistency"] = consistency_str(consistency);
  j["architecture"] = architecture_str(architecture);
  if (policy == PolicyKind::BackupWorkers) {
    j["policy"] = json{{"kind", "backup_workers"}, {"b", backup_b}};
  } else {
    j["policy"] = policy_str(policy);
  }
  j["detection"] = json{{"lambda", detection.lambda},
                        {"window_transient", detection.window_transient},
                        {"window_persistent", detection.window_persistent},
                        {"report_every", detection.report_every},
                        {"act_every", detection.act_every}};
  json pats = json::array();
  for (const auto& p : patterns) pats.push_back(pattern_to_json(p));
  j["patterns"] = pats;
  j["failover"] = json{{"pending_time_idle", failover.pending_time_idle},
                       {"pending_time_busy", failover.pending_time_busy},
                       {"node_init", failover.node_init},
                       {"restore", failover.restore},
                       {"checkpoint_interval", failover.checkpoint_interval},
                       {"checkpoint_save", failover.checkpoint_save},
                       {"recompute_mode", recompute_str(failover.recompute_mode)}};
  j["seed"] = seed;
  j["cluster"] = json{{"worker_speed", cluster.worker_speed},
                      {"server_update_cost", cluster.server_update_cost},
                      {"comm_time", cluster.comm_time},
                      {"server_contention_kappa", cluster.server_contention_kappa},
                      {"pending_time", cluster.pending_time},
                      {"busy_threshold", cluster.busy_threshold},
                      {"sync_latency", cluster.sync_latency}};
  json classes = json::array();
  for (const auto& d : device_classes) {
    classes.push_back(json{{"count", d.count},
                           {"speed_multiplier", d.speed_multiplier},
                           {"b_min", d.b_min},
                           {"b_max", d.b_max}});
  }
  j["device_classes"] = classes;
  j["accum"] = json{{"c_min", accum.c_min}, {"c_max", accum.c_max}};
  json sched = json::array();
  for (const auto& f : chaos.scheduled) {
    sched.push_back(json{{"node", f.node.to_json()}, {"at", f.at}, {"error", f.error}});
  }
  j["chaos"] = json{{"scheduled", sched},
                    {"random_failures", chaos.random_failures},
                    {"failure_window", json::array({chaos.failure_window_begin, chaos.failure_window_end})}};
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  check_keys(j, "config",
             {"n_workers", "n_servers", "global_batch", "samples", "batches_per_shard", "epochs", "consistency",
              "architecture", "policy", "detection", "patterns", "failover", "seed", "cluster", "device_classes",
              "accum", "chaos"});
  ScenarioConfig c;
  c.n_workers = j.at("n_workers").get<std::int32_t>();
  c.n_servers = j.at("n_servers").get<std::int32_t>();
  c.global_batch = j.at("global_batch").get<std::int64_t>();
  c.samples = j.at("samples").get<std::int64_t>();
  c.batches_per_shard = j.at("batches_per_shard").get<std::int64_t>();
  c.epochs = j.at("epochs").get<std::int32_t>();

  const std::string cons = j.at("consistency").get<std::string>();
  if (cons == "bsp") c.consistency = Consistency::BSP;
  else if (cons == "asp") c.consistency = Consistency::ASP;
  else throw ConfigError("consistency: unknown value \"" + cons + "\"");

  const std::string arch = j.at("architecture").get<std::string>();
  if (arch == "parameter_server") c.architecture = Architecture::ParameterServer;
  else if (arch == "all_reduce") c.architecture = Architecture::AllReduce;
  else throw ConfigError("architecture: unknown value \"" + arch + "\"");

  const json& pol = j.at("policy");
  if (pol.is_string()) {
    c.policy = policy_from_str(pol.get<std::string>());
    if (c.policy == PolicyKind::BackupWorkers) throw ConfigError("policy backup_workers requires {\"kind\",\"b\"}");
  } else {
    check_keys(pol, "policy", {"kind", "b"});
    c.policy = policy_from_str(pol.at("kind").get<std::string>());
    c.backup_b = pol.at("b").get<std::int32_t>();
  }

  const json& det = j.at("detection");
  check_keys(det, "detection", {"lambda", "window_transient", "window_persistent", "report_every", "act_every"});
  c.detection.lambda = det.at("lambda").get<double>();
  c.detection.window_transient = det.at("window_transient").get<double>();
  c.detection.window_persistent = det.at("window_persistent").get<double>();
  c.detection.report_every = det.at("report_every").get<std::int32_t>();
  c.detection.act_every = det.at("act_every").get<double>();

  if (j.contains("patterns")) {
    int i = 0;
    for (const auto& p : j.at("patterns")) {
      c.patterns.push_back(pattern_from_json(p, "patterns." + std::to_string(i)));
      ++i;
    }
  }

  if (j.contains("failover")) {
    const json& f = j.at("failover");
    check_keys(f, "failover",
               {"pending_time_idle", "pending_time_busy", "node_init", "restore", "checkpoint_interval",
                "checkpoint_save", "recompute_mode"});
    c.failover.pending_time_idle = get_or(f, "pending_time_idle", c.failover.pending_time_idle);
    c.failover.pending_time_busy = get_or(f, "pending_time_busy", c.failover.pending_time_busy);
    c.failover.node_init = get_or(f, "node_init", c.failover.node_init);
    c.failover.restore = get_or(f, "restore", c.failover.restore);
    c.failover.checkpoint_interval = get_or(f, "checkpoint_interval", c.failover.checkpoint_interval);
    c.failover.checkpoint_save = get_or(f, "checkpoint_save", c.failover.checkpoint_save);
    const std::string mode = get_or<std::string>(f, "recompute_mode", "dds_based");
    if (mode == "dds_based") c.failover.recompute_mode = RecomputeMode::DdsBased;
    else if (mode == "checkpoint_based") c.failover.recompute_mode = RecomputeMode::CheckpointBased;
    else throw ConfigError("failover.recompute_mode: unknown value \"" + mode + "\"");
  }

  c.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("cluster")) {
    const json& cl = j.at("cluster");
    check_keys(cl, "cluster",
               {"worker_speed", "server_update_cost", "comm_time", "server_contention_kappa", "pending_time",
                "busy_threshold", "sync_latency"});
    c.cluster.worker_speed = get_or(cl, "worker_speed", c.cluster.worker_speed);
    c.cluster.server_update_cost = get_or(cl, "server_update_cost", c.cluster.server_update_cost);
    c.cluster.comm_time = get_or(cl, "comm_time", c.cluster.comm_time);
    c.cluster.server_contention_kappa = get_or(cl, "server_contention_kappa", c.cluster.server_contention_kappa);
    c.cluster.pending_time = get_or(cl, "pending_time", c.cluster.pending_time);
    c.cluster.busy_threshold = get_or(cl, "busy_threshold", c.cluster.busy_threshold);
    c.cluster.sync_latency = get_or(cl, "sync_latency", c.cluster.sync_latency);
  }

  if (j.contains("device_classes")) {
    for (const auto& d : j.at("device_classes")) {
      check_keys(d, "device_classes[]", {"count", "speed_multiplier", "b_min", "b_max"});
      c.device_classes.push_back(DeviceClass{d.at("count").get<std::int32_t>(),
                                             d.at("speed_multiplier").get<double>(),
                                             d.at("b_min").get<std::int64_t>(), d.at("b_max").get<std::int64_t>()});
    }
  }
  if (j.contains("accum")) {
    const json& a = j.at("accum");
    check_keys(a, "accum", {"c_min", "c_max"});
    c.accum.c_min = a.at("c_min").get<std::int32_t>();
    c.accum.c_max = a.at("c_max").get<std::int32_t>();
  }
  if (j.contains("chaos")) {
    const json& ch = j.at("chaos");
    check_keys(ch, "chaos", {"scheduled", "random_failures", "failure_window"});
    if (ch.contains("scheduled")) {
      for (const auto& f : ch.at("scheduled")) {
        check_keys(f, "chaos.scheduled[]", {"node", "at", "error"});
        c.chaos.scheduled.push_back(ChaosConfig::ScheduledFailure{
            NodeId::from_json(f.at("node")), f.at("at").get<double>(), get_or<std::string>(f, "error", "eviction")});
      }
    }
    c.chaos.random_failures = get_or(ch, "random_failures", 0);
    if (ch.contains("failure_window")) {
      const json& w = ch.at("failure_window");
      if (!w.is_array() || w.size() != 2) throw ConfigError("chaos.failure_window: expected [begin, end]");
      c.chaos.failure_window_begin = w[0].get<double>();
      c.chaos.failure_window_end = w[1].get<double>();
    }
  }
  return c;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

std::vector<Violation> validate_config(const ScenarioConfig& cfg) {
  std::vector<Violation> v;
  auto bad = [&](std::string path, std::string msg) { v.push_back(Violation{std::move(path), std::move(msg)}); };

  if (cfg.n_workers < 1) bad("n_workers", "at least one worker required");
  if (cfg.n_servers < 0) bad("n_servers", "must be non-negative");
  if (cfg.architecture == Architecture::ParameterServer && cfg.n_servers < 1)
    bad("n_servers", "parameter_server architecture requires at least one server");
  if (cfg.architecture == Architecture::AllReduce && cfg.n_servers != 0)
    bad("n_servers", "all_reduce architecture has no servers");
  if (cfg.global_batch < 1) bad("global_batch", "B must be positive");
  if (cfg.samples < 1) bad("samples", "N must be positive");
  if (cfg.samples < cfg.global_batch) bad("samples", "N >= B required");
  if (cfg.global_batch < cfg.n_workers) bad("global_batch", "B >= n_workers required so every worker receives >= 1");
  if (cfg.batches_per_shard < 1) bad("batches_per_shard", "M >= 1 required");
  if (cfg.epochs < 1) bad("epochs", "at least one epoch");
  if (cfg.batches_per_shard > 0 && cfg.global_batch > 0 &&
      cfg.global_batch > std::numeric_limits<std::int64_t>::max() / cfg.batches_per_shard)
    bad("batches_per_shard", "B*M overflows");

  if (!(cfg.detection.lambda > 1.0)) bad("detection.lambda", "lambda must exceed 1");
  if (!(cfg.detection.window_transient > 0)) bad("detection.window_transient", "must be positive");
  if (!(cfg.detection.window_persistent > 0)) bad("detection.window_persistent", "must be positive");
  if (cfg.detection.window_transient > cfg.detection.window_persistent)
    bad("detection.window_transient", "must not exceed window_persistent");
  if (cfg.detection.report_every < 1) bad("detection.report_every", "must be >= 1");
  if (!(cfg.detection.act_every > 0)) bad("detection.act_every", "must be positive");

  if (cfg.policy == PolicyKind::BackupWorkers) {
    if (cfg.backup_b < 1 || cfg.backup_b >= cfg.n_workers) bad("policy.b", "require 1 <= b < n_workers");
  }
  if (cfg.policy == PolicyKind::AntDtDd && cfg.device_classes.empty())
    bad("policy", "antdt_dd requires device_classes with batch bounds");

  auto check_targets = [&](const StragglerPattern& p, const std::string& path) {
    for (const auto& n : p.nodes) {
      const std::int32_t limit = n.role == Role::Worker ? cfg.n_workers : cfg.n_servers;
      if (n.index >= limit) bad(path, "target " + n.str() + " out of range");
    }
  };
  for (std::size_t i = 0; i < cfg.patterns.size(); ++i) {
    const auto& p = cfg.patterns[i];
    const std::string path = "patterns." + std::to_string(i);
    if (p.kind == StragglerPattern::Kind::Transient) {
      if (p.intensity < 0 || p.intensity > 1) bad(path + ".intensity", "must lie in [0, 1]");
      if (p.probability < 0 || p.probability > 1) bad(path + ".probability", "must lie in [0, 1]");
      if (p.sleep_duration < 0) bad(path + ".sleep_duration", "must be non-negative");
      if (!(p.cycle > 0)) bad(path + ".cycle", "must be positive");
      if (p.on_period < 0 || p.on_period > p.cycle) bad(path + ".on_period", "must lie in [0, cycle]");
    } else if (p.kind == StragglerPattern::Kind::Persistent) {
      if (p.delay < 0) bad(path + ".delay", "must be non-negative");
    } else {
      if (!(p.multiplier > 0)) bad(path + ".multiplier", "must be positive");
    }
    check_targets(p, path);
  }

  const auto& f = cfg.failover;
  if (f.pending_time_idle < 0) bad("failover.pending_time_idle", "must be non-negative");
  if (f.pending_time_busy < 0) bad("failover.pending_time_busy", "must be non-negative");
  if (f.node_init < 0) bad("failover.node_init", "must be non-negative");
  if (f.restore < 0) bad("failover.restore", "must be non-negative");
  if (f.checkpoint_save < 0) bad("failover.checkpoint_save", "must be non-negative");
  if (f.recompute_mode == RecomputeMode::CheckpointBased && !(f.checkpoint_interval > 0))
    bad("failover.checkpoint_interval", "must be positive in checkpoint_based mode");

  if (!(cfg.cluster.worker_speed > 0)) bad("cluster.worker_speed", "must be positive");
  if (cfg.cluster.server_update_cost < 0) bad("cluster.server_update_cost", "must be non-negative");
  if (cfg.cluster.comm_time < 0) bad("cluster.comm_time", "must be non-negative");
  if (cfg.cluster.server_contention_kappa < 0) bad("cluster.server_contention_kappa", "must be non-negative");
  if (cfg.cluster.sync_latency < 0) bad("cluster.sync_latency", "must be non-negative");

  if (!cfg.device_classes.empty()) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < cfg.device_classes.size(); ++i) {
      const auto& d = cfg.device_classes[i];
      const std::string path = "device_classes." + std::to_string(i);
      if (d.count < 1) bad(path + ".count", "must be positive");
      if (!(d.speed_multiplier > 0)) bad(path + ".speed_multiplier", "must be positive");
      if (d.b_min < 1 || d.b_min > d.b_max) bad(path, "require 1 <= b_min <= b_max");
      total += d.count;
    }
    if (total != cfg.n_workers) bad("device_classes", "class counts must sum to n_workers");
  }
  if (cfg.accum.c_min < 1 || cfg.accum.c_min > cfg.accum.c_max) bad("accum", "require 1 <= c_min <= c_max");

  for (std::size_t i = 0; i < cfg.chaos.scheduled.size(); ++i) {
    const auto& s = cfg.chaos.scheduled[i];
    const std::string path = "chaos.scheduled." + std::to_string(i);
    const std::int32_t limit = s.node.role == Role::Worker ? cfg.n_workers : cfg.n_servers;
    if (s.node.index >= limit) bad(path + ".node", "out of range");
    if (s.at < 0) bad(path + ".at", "must be non-negative");
    if (s.error != "eviction" && s.error != "network" && s.error != "config_error" && s.error != "program_error")
      bad(path + ".error", "unknown error class \"" + s.error + "\"");
  }
  if (cfg.chaos.random_failures < 0) bad("chaos.random_failures", "must be non-negative");
  if (cfg.chaos.random_failures > 0 && !(cfg.chaos.failure_window_end > cfg.chaos.failure_window_begin))
    bad("chaos.failure_window", "end must exceed begin when random_failures > 0");

  return v;
}

}  // namespace antdt
