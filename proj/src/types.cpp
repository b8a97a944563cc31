#include "antdt/types.hpp"

#include "antdt/error.hpp"

namespace antdt {

std::string to_string(Role r) { return r == Role::Worker ? "worker" : "server"; }

Role role_from_string(const std::string& s) {
  if (s == "worker") return Role::Worker;
  if (s == "server") return Role::Server;
  throw ConfigError("unknown role: " + s);
}

json NodeId::to_json() const { return json::array({to_string(role), index}); }

NodeId NodeId::from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("node id must be [role, index]");
  NodeId n;
  n.role = role_from_string(j[0].get<std::string>());
  n.index = j[1].get<std::int32_t>();
  if (n.index < 0) throw ConfigError("node index must be non-negative");
  return n;
}

std::string NodeId::str() const { return to_string(role) + "-" + std::to_string(index); }

json IterationRecord::to_json() const {
  return json{{"node", node.to_json()},
              {"iteration", iteration},
              {"wall_time", wall_time.seconds()},
              {"worker_compute", worker_compute},
              {"server_compute", server_compute},
              {"comm", comm},
              {"batch_size", batch_size}};
}

IterationRecord IterationRecord::from_json(const json& j) {
  IterationRecord r;
  r.node = NodeId::from_json(j.at("node"));
  r.iteration = j.at("iteration").get<std::int64_t>();
  r.wall_time = SimTime::from_seconds(j.at("wall_time").get<double>());
  r.worker_compute = j.at("worker_compute").get<double>();
  r.server_compute = j.at("server_compute").get<double>();
  r.comm = j.at("comm").get<double>();
  r.batch_size = j.at("batch_size").get<std::int64_t>();
  return r;
}

json BatchAllocation::to_json() const {
  json arr = json::array();
  for (const auto& e : per_worker) {
    arr.push_back(json{{"worker", e.worker}, {"batch", e.batch}, {"accum", e.accum}});
  }
  return arr;
}

BatchAllocation BatchAllocation::from_json(const json& j) {
  BatchAllocation a;
  for (const auto& e : j) {
    a.per_worker.push_back(Entry{e.at("worker").get<std::int32_t>(), e.at("batch").get<std::int64_t>(),
                                 e.at("accum").get<std::int32_t>()});
  }
  return a;
}

const char* Action::kind_name() const {
  switch (kind.index()) {
    case 0: return "none";
    case 1: return "adjust_bs";
    case 2: return "backup_workers";
    case 3: return "kill_restart";
    case 4: return "adjust_lr";
  }
  return "?";
}

json Action::to_json() const {
  json j{{"kind", kind_name()}, {"issue_iteration", issue_iteration}};
  if (const auto* a = std::get_if<AdjustBs>(&kind)) {
    j["alloc"] = a->alloc.to_json();
  } else if (const auto* b = std::get_if<BackupWorkers>(&kind)) {
    j["b"] = b->b;
  } else if (const auto* k = std::get_if<KillRestart>(&kind)) {
    j["target"] = k->target.to_json();
  } else if (const auto* l = std::get_if<AdjustLr>(&kind)) {
    json arr = json::array();
    for (const auto& s : l->scales) arr.push_back(json{{"worker", s.worker}, {"scale", s.scale}});
    j["scales"] = arr;
  }
  return j;
}

Action Action::from_json(const json& j) {
  Action a;
  a.issue_iteration = j.at("issue_iteration").get<std::int64_t>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") {
    a.kind = None{};
  } else if (kind == "adjust_bs") {
    a.kind = AdjustBs{BatchAllocation::from_json(j.at("alloc"))};
  } else if (kind == "backup_workers") {
    a.kind = BackupWorkers{j.at("b").get<std::int32_t>()};
  } else if (kind == "kill_restart") {
    a.kind = KillRestart{NodeId::from_json(j.at("target"))};
  } else if (kind == "adjust_lr") {
    AdjustLr l;
    for (const auto& s : j.at("scales")) {
      l.scales.push_back(AdjustLr::Scale{s.at("worker").get<std::int32_t>(), s.at("scale").get<double>()});
    }
    a.kind = std::move(l);
  } else {
    throw ConfigError("unknown action kind: " + kind);
  }
  return a;
}

}  // namespace antdt
