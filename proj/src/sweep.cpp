#include "antdt/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <future>
#include <thread>

#include "antdt/error.hpp"

namespace antdt {

void apply_override(json& cfg_json, const std::string& path, const std::string& value) {
  json* node = &cfg_json;
  std::size_t pos = 0;
  std::string token;
  std::vector<std::string> tokens;
  while (pos <= path.size()) {
    const std::size_t dot = path.find('.', pos);
    tokens.push_back(path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tk = tokens[i];
    const bool last = i + 1 == tokens.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = static_cast<std::size_t>(std::stoul(tk));
      } catch (...) {
        throw ConfigError("override path \"" + path + "\": \"" + tk + "\" is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override path \"" + path + "\": index out of range");
      if (last) throw ConfigError("override path \"" + path + "\": cannot replace a whole array element");
      node = &(*node)[idx];
    } else if (node->is_object()) {
      if (!node->contains(tk)) throw ConfigError("unknown override key \"" + path + "\"");
      if (last) {
        json parsed;
        try {
          parsed = json::parse(value);
        } catch (...) {
          parsed = value;  // plain string
        }
        (*node)[tk] = parsed;
        return;
      }
      node = &(*node)[tk];
    } else {
      throw ConfigError("override path \"" + path + "\" descends into a scalar");
    }
  }
}

std::string policy_name(PolicyKind p) {
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

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::size_t points = 1;
  for (const auto& ax : spec.axes) {
    if (points == 1 || ax.values.size() == points) {
      points = ax.values.size();
    } else {
      throw ConfigError("sweep axes must have equal lengths (zipped)");
    }
  }
  std::vector<PolicyKind> policies = spec.policies;
  std::vector<std::int32_t> bs = spec.backup_bs;
  if (policies.empty()) {
    policies = {spec.base.policy};
    bs = {spec.base.backup_b};
  }
  if (bs.size() != policies.size()) bs.assign(policies.size(), 2);

  struct Cell {
    std::size_t point, policy;
    std::string axis_value;
    ScenarioConfig cfg;
  };
  std::vector<Cell> cells;
  for (std::size_t pt = 0; pt < points; ++pt) {
    json base_json = spec.base.to_json();
    std::string axis_value = "-";
    for (const auto& ax : spec.axes) {
      apply_override(base_json, ax.path, ax.values[pt]);
      if (&ax == &spec.axes.front()) axis_value = ax.values[pt];
    }
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      Cell c;
      c.point = pt;
      c.policy = pi;
      c.axis_value = axis_value;
      c.cfg = ScenarioConfig::from_json(base_json);
      c.cfg.policy = policies[pi];
      c.cfg.backup_b = policies[pi] == PolicyKind::BackupWorkers ? bs[pi] : 0;
      cells.push_back(std::move(c));
    }
  }

  // Fan runs out over a small pool; results keep deterministic order.
  struct Task {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::int32_t r = 0; r < spec.repeat; ++r) {
      tasks.push_back(Task{c, cells[c].cfg.seed + static_cast<std::uint64_t>(r)});
    }
  }
  std::vector<double> jct(tasks.size(), 0);
  const std::size_t jobs = spec.jobs > 0 ? static_cast<std::size_t>(spec.jobs)
                                         : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      ScenarioConfig cfg = cells[tasks[i].cell].cfg;
      cfg.seed = tasks[i].seed;
      jct[i] = run_scenario(cfg).metrics.jct.seconds();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < std::min(jobs, tasks.size()); ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::vector<SweepRow> rows;
  std::size_t ti = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    double mean = 0;
    for (std::int32_t r = 0; r < spec.repeat; ++r) mean += jct[ti + static_cast<std::size_t>(r)];
    mean /= spec.repeat;
    double var = 0;
    for (std::int32_t r = 0; r < spec.repeat; ++r) {
      const double d = jct[ti + static_cast<std::size_t>(r)] - mean;
      var += d * d;
    }
    var = spec.repeat > 1 ? var / (spec.repeat - 1) : 0;
    SweepRow row;
    row.axis_value = cells[c].axis_value;
    row.policy = policy_name(policies[cells[c].policy]);
    row.jct_mean = mean;
    row.jct_std = std::sqrt(var);
    row.runs = spec.repeat;
    rows.push_back(row);
    ti += static_cast<std::size_t>(spec.repeat);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "axis,policy,jct_mean_s,jct_std_s,runs\r\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%d\r\n", r.axis_value.c_str(), r.policy.c_str(), r.jct_mean,
                  r.jct_std, r.runs);
    out += buf;
  }
  return out;
}

}  // namespace antdt
