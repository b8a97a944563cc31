#pragma once

#include "antdt/dds.hpp"
#include "antdt/framing.hpp"
#include "antdt/monitor.hpp"

namespace antdt {

// Wire handler for the DDS protocol:
//   {"op":"fetch","worker":i}            -> {"shard":{"id":..,"start":..,"len":..}} | {"epoch_end":true}
//   {"op":"done","worker":i,"shard":id}  -> {"ok":true}
//   {"op":"recover","node":[role,index]} -> {"requeued":n}
//   {"op":"progress"}                    -> {"todo":..,"doing":..,"done":..}
// Timestamps come from a caller-supplied clock so the service stays
// deterministic under test.
class DdsService {
 public:
  DdsService(ShardLedger ledger, std::function<SimTime()> clock)
      : ledger_(std::move(ledger)), clock_(std::move(clock)) {}

  json handle(const json& request);
  ShardLedger& ledger() { return ledger_; }

 private:
  ShardLedger ledger_;
  std::function<SimTime()> clock_;
};

// Wire handler for the Monitor:
//   {"op":"ingest", ...record}                               -> {"ok":true}
//   {"op":"event","node":..,"at":..,"kind":..,"error":{..}}  -> {"directive":".."}
//   {"op":"query","kind":"mean_bpt"|"throughput","node":..,"horizon":..,"now":..}
//   {"op":"query","kind":"fleet","role":"worker"|"server","horizon":..,"now":..}
class MonitorService {
 public:
  explicit MonitorService(Monitor::Options opt = {}) : monitor_(opt) {}

  json handle(const json& request);
  Monitor& monitor() { return monitor_; }

 private:
  Monitor monitor_;
};

}  // namespace antdt
