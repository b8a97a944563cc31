#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "antdt/error.hpp"
#include "antdt/presets.hpp"
#include "antdt/services.hpp"
#include "antdt/sim.hpp"
#include "antdt/solver.hpp"
#include "antdt/sweep.hpp"

namespace {

using namespace antdt;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  json j;
  in >> j;
  return j;
}

// Builds the scenario from --preset/--config plus --set overrides and the
// ANTDT_SEED environment variable.
ScenarioConfig resolve_config(const std::string& preset, const std::string& config_path,
                              const std::vector<std::string>& sets) {
  json doc;
  if (!preset.empty()) {
    auto cfg = preset_config(preset);
    if (!cfg) throw ConfigError("unknown preset \"" + preset + "\"");
    doc = cfg->to_json();
  } else if (!config_path.empty()) {
    doc = load_json_file(config_path);
  } else {
    throw ConfigError("one of --preset or --config is required");
  }
  for (const auto& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + s);
    apply_override(doc, s.substr(0, eq), s.substr(eq + 1));
  }
  ScenarioConfig cfg = ScenarioConfig::from_json(doc);
  if (const char* env_seed = std::getenv("ANTDT_SEED")) {
    cfg.seed = std::strtoull(env_seed, nullptr, 10);
  }
  return cfg;
}

int check_valid(const ScenarioConfig& cfg) {
  const auto violations = validate_config(cfg);
  if (violations.empty()) return kExitOk;
  for (const auto& v : violations) std::cerr << "invalid: " << v.str() << "\n";
  return kExitConfig;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "t_seconds,node,bpt_seconds,batch_size\r\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%s,%.6f,%lld\r\n", r.t.seconds(), r.node.str().c_str(), r.bpt,
                  static_cast<long long>(r.batch));
    out += buf;
  }
  return out;
}

int cmd_run(const std::string& preset, const std::string& config_path, const std::vector<std::string>& sets,
            const std::string& out_dir, bool emit_trace) {
  ScenarioConfig cfg = resolve_config(preset, config_path, sets);
  if (int rc = check_valid(cfg); rc != kExitOk) return rc;

  RunOptions opt;
  opt.collect_trace = emit_trace;
  const RunResult result = run_scenario(cfg, opt);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_file(dir / "summary.json", result.metrics.to_json().dump(2) + "\n");
    write_file(dir / "events.jsonl", result.event_log);
    write_file(dir / "config.json", cfg.to_json().dump(2) + "\n");
    if (emit_trace) write_file(dir / "trace.csv", trace_csv(result.trace));
  }
  std::cout << result.metrics.to_json().dump(2) << "\n";
  return result.metrics.aborted ? kExitAborted : kExitOk;
}

int cmd_sweep(const std::string& preset, const std::string& config_path, const std::vector<std::string>& sets,
              const std::vector<std::string>& axis_args, const std::string& policies_arg, std::int32_t repeat,
              std::int32_t jobs, std::int32_t backup_b, const std::string& out_dir) {
  SweepSpec spec;
  spec.base = resolve_config(preset, config_path, sets);
  if (int rc = check_valid(spec.base); rc != kExitOk) return rc;
  spec.repeat = repeat;
  spec.jobs = jobs;

  for (const auto& a : axis_args) {
    const std::size_t eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("axis must be path=v1,v2,...: " + a);
    SweepAxis ax;
    ax.path = a.substr(0, eq);
    std::string rest = a.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const std::size_t comma = rest.find(',', pos);
      ax.values.push_back(rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    spec.axes.push_back(std::move(ax));
  }

  if (!policies_arg.empty()) {
    std::size_t pos = 0;
    while (pos <= policies_arg.size()) {
      const std::size_t comma = policies_arg.find(',', pos);
      const std::string name = policies_arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      PolicyKind p;
      if (name == "native_bsp") p = PolicyKind::NativeBSP;
      else if (name == "native_asp") p = PolicyKind::NativeASP;
      else if (name == "asp_dds") p = PolicyKind::AspDds;
      else if (name == "backup_workers") p = PolicyKind::BackupWorkers;
      else if (name == "lb_bsp") p = PolicyKind::LbBsp;
      else if (name == "antdt_nd") p = PolicyKind::AntDtNd;
      else if (name == "antdt_dd") p = PolicyKind::AntDtDd;
      else throw ConfigError("unknown policy \"" + name + "\"");
      spec.policies.push_back(p);
      spec.backup_bs.push_back(backup_b);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  const auto rows = run_sweep(spec);
  const std::string csv = sweep_csv(rows);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(std::filesystem::path(out_dir) / "sweep.csv", csv);
  }
  std::cout << csv;
  return kExitOk;
}

int cmd_presets() {
  for (const auto& p : presets()) {
    std::printf("%-22s %s\n", p.name.c_str(), p.description.c_str());
  }
  return kExitOk;
}

int cmd_solve(const std::string& problem_path) {
  const json j = load_json_file(problem_path);
  SolveResult r;
  if (j.contains("classes")) {
    GradAccumProblem p;
    p.global_batch = j.at("global_batch").get<std::int64_t>();
    p.c_min = j.at("c_min").get<std::int32_t>();
    p.c_max = j.at("c_max").get<std::int32_t>();
    for (const auto& c : j.at("classes")) {
      p.classes.push_back({c.at("count").get<std::int32_t>(), c.at("speed").get<double>(),
                           c.at("b_min").get<std::int64_t>(), c.at("b_max").get<std::int64_t>()});
    }
    r = solve_grad_accum(p);
  } else {
    BatchProblem p;
    p.global_batch = j.at("global_batch").get<std::int64_t>();
    p.speeds = j.at("speeds").get<std::vector<double>>();
    r = solve_batch(p);
  }
  if (!is_feasible(r)) {
    const auto& inf = std::get<Infeasible>(r);
    std::cout << json{{"infeasible", inf.reason},
                      {"nearest_below", inf.nearest_below},
                      {"nearest_above", inf.nearest_above}}
                     .dump(2)
              << "\n";
    return kExitConfig;
  }
  const auto& s = solution(r);
  std::cout << json{{"objective_z", s.objective_z}, {"allocation", s.allocation.to_json()}}.dump(2) << "\n";
  return kExitOk;
}

int cmd_dds_serve(const std::string& config_path, const std::string& host, std::uint16_t port) {
  const ScenarioConfig cfg = ScenarioConfig::from_file(config_path);
  if (int rc = check_valid(cfg); rc != kExitOk) return rc;
  auto ledger = ShardLedger::build(cfg.samples, cfg.global_batch, cfg.batches_per_shard, 0, cfg.seed);
  // A service clock: wall time since start, microsecond granularity.
  const auto start = std::chrono::steady_clock::now();
  auto clock = [start] {
    const auto d = std::chrono::steady_clock::now() - start;
    return SimTime{std::chrono::duration_cast<std::chrono::microseconds>(d).count()};
  };
  DdsService service(std::move(ledger), clock);
  FramedServer server(host, port, [&service](const json& req) { return service.handle(req); });
  std::printf("dds-serve listening on %s:%u (K=%lld shards)\n", host.c_str(), server.port(),
              static_cast<long long>(service.ledger().total_shards()));
  std::fflush(stdout);
  // Serve until killed.
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AntDT straggler-mitigation control plane and cluster simulator"};
  app.require_subcommand(1);

  std::string preset, config_path, out_dir, policies_arg, problem_path, host = "127.0.0.1";
  std::vector<std::string> sets, axis_args;
  bool emit_trace = false;
  std::int32_t repeat = 3, jobs = 0, backup_b = 2;
  std::uint16_t port = 0;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--preset", preset, "Preset name (see `presets`)");
  run->add_option("--config", config_path, "Scenario JSON file");
  run->add_option("--set", sets, "Override config values, dotted path (detection.lambda=1.5)");
  run->add_option("--out", out_dir, "Output directory (summary.json, events.jsonl, config.json)");
  run->add_flag("--emit-trace", emit_trace, "Also write per-iteration BPT/batch trace.csv");

  auto* sweep = app.add_subcommand("sweep", "Run a scenario grid and emit a comparison CSV");
  sweep->add_option("--preset", preset, "Preset name");
  sweep->add_option("--config", config_path, "Scenario JSON file");
  sweep->add_option("--set", sets, "Base overrides");
  sweep->add_option("--axis", axis_args, "path=v1,v2,... (repeatable; axes zip)");
  sweep->add_option("--policies", policies_arg, "Comma-separated policy list");
  sweep->add_option("--repeat", repeat, "Seeds per cell (default 3)");
  sweep->add_option("--jobs", jobs, "Parallel runs (default: cores)");
  sweep->add_option("--backup-b", backup_b, "b for backup_workers policy cells");
  sweep->add_option("--out", out_dir, "Output directory (sweep.csv)");

  app.add_subcommand("presets", "List shipped presets");

  auto* solve = app.add_subcommand("solve", "Solve an ad-hoc allocation problem from JSON");
  solve->add_option("problem", problem_path, "Problem JSON file")->required();

  auto* serve = app.add_subcommand("dds-serve", "Serve the shard queue over the framed JSON protocol");
  serve->add_option("--config", config_path, "Scenario JSON file")->required();
  serve->add_option("--host", host, "Bind host (default 127.0.0.1)");
  serve->add_option("--port", port, "Port (0 = ephemeral)");

  auto* validate = app.add_subcommand("validate", "Validate a scenario file");
  validate->add_option("--config", config_path, "Scenario JSON file");
  validate->add_option("--preset", preset, "Preset name");
  validate->add_option("--set", sets, "Overrides");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(preset, config_path, sets, out_dir, emit_trace);
    if (app.got_subcommand("sweep"))
      return cmd_sweep(preset, config_path, sets, axis_args, policies_arg, repeat, jobs, backup_b, out_dir);
    if (app.got_subcommand("presets")) return cmd_presets();
    if (app.got_subcommand("solve")) return cmd_solve(problem_path);
    if (app.got_subcommand("dds-serve")) return cmd_dds_serve(config_path, host, port);
    if (app.got_subcommand("validate")) {
      const ScenarioConfig cfg = resolve_config(preset, config_path, sets);
      const int rc = check_valid(cfg);
      if (rc == kExitOk) std::cout << "ok\n";
      return rc;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
