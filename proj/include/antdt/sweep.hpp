#pragma once

#include <string>
#include <vector>

#include "antdt/config.hpp"
#include "antdt/sim.hpp"

namespace antdt {

// Sets cfg_json at a dotted path ("detection.lambda", "patterns.0.intensity").
// The path must already exist in the document; the value string is parsed as
// JSON first and falls back to a plain string.
void apply_override(json& cfg_json, const std::string& path, const std::string& value);

struct SweepAxis {
  std::string path;
  std::vector<std::string> values;  // zipped across axes; all must be equal length
};

struct SweepSpec {
  ScenarioConfig base;
  std::vector<SweepAxis> axes;           // empty = single point
  std::vector<PolicyKind> policies;      // empty = keep the preset's policy
  std::vector<std::int32_t> backup_bs;   // parallel to policies for BackupWorkers
  std::int32_t repeat = 3;
  std::int32_t jobs = 0;  // 0 = hardware concurrency
};

struct SweepRow {
  std::string axis_value;  // first axis's value, or "-" for a single point
  std::string policy;
  double jct_mean = 0;
  double jct_std = 0;
  std::int32_t runs = 0;
};

std::vector<SweepRow> run_sweep(const SweepSpec& spec);

// RFC-4180 CSV with a header row; numbers printed with fixed precision so
// repeated sweeps are byte-identical.
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::string policy_name(PolicyKind p);

}  // namespace antdt
