#include "antdt/services.hpp"

#include "antdt/error.hpp"

namespace antdt {

json DdsService::handle(const json& request) {
  const std::string op = request.at("op").get<std::string>();
  if (op == "fetch") {
    const auto worker = NodeId::worker(request.at("worker").get<std::int32_t>());
    auto r = ledger_.fetch_shard(worker, clock_());
    if (std::holds_alternative<ShardLedger::EpochExhausted>(r)) return json{{"epoch_end", true}};
    const Shard& s = std::get<Shard>(r);
    return json{{"shard", json{{"id", s.id}, {"start", s.start_offset}, {"len", s.length}}}};
  }
  if (op == "done") {
    const auto worker = NodeId::worker(request.at("worker").get<std::int32_t>());
    ledger_.report_done(request.at("shard").get<std::int64_t>(), worker, clock_());
    return json{{"ok", true}};
  }
  if (op == "recover") {
    const auto node = NodeId::from_json(request.at("node"));
    return json{{"requeued", ledger_.recover_node(node)}};
  }
  if (op == "progress") {
    const auto p = ledger_.epoch_progress();
    return json{{"todo", p.todo}, {"doing", p.doing}, {"done", p.done}};
  }
  throw ProtocolError("unknown dds op: " + op);
}

json MonitorService::handle(const json& request) {
  const std::string op = request.at("op").get<std::string>();
  if (op == "ingest") {
    json rec = request;
    rec.erase("op");
    monitor_.ingest(IterationRecord::from_json(rec));
    return json{{"ok", true}};
  }
  if (op == "event") {
    NodeEvent ev;
    ev.node = NodeId::from_json(request.at("node"));
    ev.at = SimTime::from_seconds(request.at("at").get<double>());
    const std::string kind = request.at("kind").get<std::string>();
    if (kind == "terminated") {
      ev.kind = NodeEvent::Kind::Terminated;
      const json& err = request.at("error");
      const std::string cls = err.at("class").get<std::string>();
      const std::string cause = err.at("cause").get<std::string>();
      ErrorClass::Cause c;
      if (cause == "proactive_kill") c = ErrorClass::Cause::ProactiveKill;
      else if (cause == "network") c = ErrorClass::Cause::NetworkError;
      else if (cause == "eviction") c = ErrorClass::Cause::Eviction;
      else if (cause == "config_error") c = ErrorClass::Cause::ConfigError;
      else if (cause == "program_error") c = ErrorClass::Cause::ProgramError;
      else throw ProtocolError("unknown error cause: " + cause);
      ev.error = cls == "retryable" ? ErrorClass::retryable(c) : ErrorClass::unretryable(c);
    } else if (kind == "launched") {
      ev.kind = NodeEvent::Kind::Launched;
    } else if (kind == "checkpoint_saved") {
      ev.kind = NodeEvent::Kind::CheckpointSaved;
    } else {
      throw ProtocolError("unknown event kind: " + kind);
    }
    const Directive d = monitor_.on_node_event(ev);
    const char* name = d == Directive::RequeueShards ? "requeue_shards" : d == Directive::AbortJob ? "abort_job" : "none";
    return json{{"directive", name}};
  }
  if (op == "query") {
    const std::string kind = request.at("kind").get<std::string>();
    const double horizon = request.at("horizon").get<double>();
    const SimTime now = SimTime::from_seconds(request.at("now").get<double>());
    std::optional<double> value;
    if (kind == "mean_bpt") {
      value = monitor_.mean_bpt(NodeId::from_json(request.at("node")), horizon, now);
    } else if (kind == "throughput") {
      value = monitor_.throughput(NodeId::from_json(request.at("node")), horizon, now);
    } else if (kind == "fleet") {
      value = monitor_.fleet_mean_bpt(role_from_string(request.at("role").get<std::string>()), horizon, now);
    } else {
      throw ProtocolError("unknown query kind: " + kind);
    }
    if (!value) return json{{"no_data", true}};
    return json{{"value", *value}};
  }
  throw ProtocolError("unknown monitor op: " + op);
}

}  // namespace antdt
