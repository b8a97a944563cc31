#include "antdt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace antdt {

namespace {

constexpr double kSpeedFloor = 1e-9;  // stalled workers must not absorb the optimization
constexpr double kZTol = 1e-9;        // absolute tolerance on objective comparisons

double clamped(double v) { return std::max(v, kSpeedFloor); }

}  // namespace

std::vector<double> continuous_relaxation(const BatchProblem& p) {
  double total = 0;
  for (double v : p.speeds) total += clamped(v);
  std::vector<double> out;
  out.reserve(p.speeds.size());
  for (double v : p.speeds) out.push_back(static_cast<double>(p.global_batch) * clamped(v) / total);
  return out;
}

SolveResult solve_batch(const BatchProblem& p) {
  const std::size_t n = p.speeds.size();
  if (n == 0) return Infeasible{"no workers", 0, 0};
  if (p.global_batch < static_cast<std::int64_t>(n))
    return Infeasible{"global batch smaller than worker count", 0, static_cast<std::int64_t>(n)};

  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = clamped(p.speeds[i]);

  // Warm start at the floored continuous split. Clamping zero floors up to 1
  // can overshoot B when B is close to n; restart from all-ones then, which
  // is always dominated by an optimal allocation.
  const std::vector<double> cont = continuous_relaxation(p);
  std::vector<std::int64_t> alloc(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    alloc[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(cont[i])));
    assigned += alloc[i];
  }
  if (assigned > p.global_batch) {
    std::fill(alloc.begin(), alloc.end(), 1);
    assigned = static_cast<std::int64_t>(n);
  }

  // Greedy remainder: each unit goes to the worker whose resulting finish
  // time is smallest, ties to the lower index.
  using Slot = std::pair<double, std::size_t>;  // (finish time after one more unit, index)
  std::priority_queue<Slot, std::vector<Slot>, std::greater<>> heap;
  for (std::size_t i = 0; i < n; ++i) heap.push({static_cast<double>(alloc[i] + 1) / v[i], i});
  for (std::int64_t r = assigned; r < p.global_batch; ++r) {
    auto [_, i] = heap.top();
    heap.pop();
    ++alloc[i];
    heap.push({static_cast<double>(alloc[i] + 1) / v[i], i});
  }

  AllocationSolution s;
  s.objective_z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s.allocation.per_worker.push_back({static_cast<std::int32_t>(i), alloc[i], 1});
    s.objective_z = std::max(s.objective_z, static_cast<double>(alloc[i]) / v[i]);
  }
  return s;
}

namespace {

// Is there an integer point in the boxes [lo_i, hi_i] with
// sum step_i * B_i == target? Depth-first with interval and divisibility
// pruning; reconstructs the point into `out` when found.
bool box_sum_reach(const std::vector<std::int64_t>& lo, const std::vector<std::int64_t>& hi,
                   const std::vector<std::int64_t>& step, std::size_t at, std::int64_t target,
                   const std::vector<std::int64_t>& min_suffix, const std::vector<std::int64_t>& max_suffix,
                   const std::vector<std::int64_t>& gcd_suffix, std::vector<std::int64_t>& out) {
  const std::size_t k = lo.size();
  if (at == k) return target == 0;
  if (target < min_suffix[at] || target > max_suffix[at]) return false;
  if (gcd_suffix[at] > 0 && target % gcd_suffix[at] != 0) return false;
  if (at == k - 1) {
    if (target % step[at] != 0) return false;
    const std::int64_t b = target / step[at];
    if (b < lo[at] || b > hi[at]) return false;
    out[at] = b;
    return true;
  }
  // Tight bounds on B_at from the remaining classes' capacity.
  const std::int64_t rem_lo = min_suffix[at + 1];
  const std::int64_t rem_hi = max_suffix[at + 1];
  std::int64_t b_hi = std::min(hi[at], (target - rem_lo) / step[at]);
  std::int64_t b_lo = std::max(lo[at], (target - rem_hi + step[at] - 1) / step[at]);
  for (std::int64_t b = b_hi; b >= b_lo; --b) {
    out[at] = b;
    if (box_sum_reach(lo, hi, step, at + 1, target - step[at] * b, min_suffix, max_suffix, gcd_suffix, out))
      return true;
  }
  return false;
}

struct FixedAccum {
  // For one C vector: per-class steps n_i*C_i and finish-time coefficients.
  std::vector<std::int64_t> step;
  std::vector<std::int64_t> lo, hi_cap;  // b_min, b_max
  std::vector<double> time_per_unit;     // C_i / v_i
};

bool reach_at_z(const FixedAccum& fa, double z, std::int64_t target, std::vector<std::int64_t>& out) {
  const std::size_t k = fa.step.size();
  std::vector<std::int64_t> hi(k);
  for (std::size_t i = 0; i < k; ++i) {
    // Largest B_i whose finish time stays within z (plus tolerance).
    const double cap = (z + kZTol) / fa.time_per_unit[i];
    const std::int64_t by_time = cap >= static_cast<double>(fa.hi_cap[i])
                                     ? fa.hi_cap[i]
                                     : static_cast<std::int64_t>(std::floor(cap));
    hi[i] = std::min(fa.hi_cap[i], by_time);
    if (hi[i] < fa.lo[i]) return false;
  }
  std::vector<std::int64_t> min_suffix(k + 1, 0), max_suffix(k + 1, 0), gcd_suffix(k + 1, 0);
  for (std::size_t i = k; i-- > 0;) {
    min_suffix[i] = min_suffix[i + 1] + fa.step[i] * fa.lo[i];
    max_suffix[i] = max_suffix[i + 1] + fa.step[i] * hi[i];
    gcd_suffix[i] = std::gcd(gcd_suffix[i + 1], fa.step[i]);
  }
  out.assign(k, 0);
  return box_sum_reach(fa.lo, hi, fa.step, 0, target, min_suffix, max_suffix, gcd_suffix, out);
}

}  // namespace

SolveResult solve_grad_accum(const GradAccumProblem& p) {
  const std::size_t k = p.classes.size();
  if (k == 0) return Infeasible{"no device classes", 0, 0};

  std::int64_t env_lo = 0, env_hi = 0;
  for (const auto& c : p.classes) {
    env_lo += static_cast<std::int64_t>(c.count) * p.c_min * c.b_min;
    env_hi += static_cast<std::int64_t>(c.count) * p.c_max * c.b_max;
  }
  if (p.global_batch < env_lo)
    return Infeasible{"global batch below minimum achievable total", 0, env_lo};
  if (p.global_batch > env_hi)
    return Infeasible{"global batch above maximum achievable total", env_hi, 0};

  double best_z = std::numeric_limits<double>::infinity();
  std::vector<std::int32_t> best_c;
  std::vector<std::int64_t> best_b;
  std::int64_t nearest_below = 0, nearest_above = 0;  // across all C, for diagnostics

  std::vector<std::int32_t> cvec(k, p.c_min);
  for (;;) {
    FixedAccum fa;
    fa.step.resize(k);
    fa.lo.resize(k);
    fa.hi_cap.resize(k);
    fa.time_per_unit.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      fa.step[i] = static_cast<std::int64_t>(p.classes[i].count) * cvec[i];
      fa.lo[i] = p.classes[i].b_min;
      fa.hi_cap[i] = p.classes[i].b_max;
      fa.time_per_unit[i] = static_cast<double>(cvec[i]) / clamped(p.classes[i].speed);
    }

    // Candidate objective values: every class's finish time over its range.
    std::vector<double> cand;
    for (std::size_t i = 0; i < k; ++i)
      for (std::int64_t b = fa.lo[i]; b <= fa.hi_cap[i]; ++b)
        cand.push_back(fa.time_per_unit[i] * static_cast<double>(b));
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    std::vector<std::int64_t> probe;
    if (reach_at_z(fa, cand.back(), p.global_batch, probe)) {
      // Feasibility is monotone in z: binary search the minimal candidate.
      std::size_t lo = 0, hi = cand.size() - 1;
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (reach_at_z(fa, cand[mid], p.global_batch, probe))
          hi = mid;
        else
          lo = mid + 1;
      }
      std::vector<std::int64_t> bvec;
      reach_at_z(fa, cand[lo], p.global_batch, bvec);
      double z = 0;
      for (std::size_t i = 0; i < k; ++i) z = std::max(z, fa.time_per_unit[i] * static_cast<double>(bvec[i]));
      if (z < best_z - kZTol) {
        best_z = z;
        best_c = cvec;
        best_b = bvec;
      }
    } else {
      // Track nearest achievable totals under this C for diagnostics.
      std::int64_t c_lo = 0, c_hi = 0, g = 0;
      for (std::size_t i = 0; i < k; ++i) {
        c_lo += fa.step[i] * fa.lo[i];
        c_hi += fa.step[i] * fa.hi_cap[i];
        g = std::gcd(g, fa.step[i]);
      }
      if (p.global_batch > c_hi) {
        nearest_below = std::max(nearest_below, c_hi);
      } else if (p.global_batch < c_lo) {
        nearest_above = nearest_above == 0 ? c_lo : std::min(nearest_above, c_lo);
      } else if (g > 0) {
        const std::int64_t r = p.global_batch % g;
        nearest_below = std::max(nearest_below, p.global_batch - r);
        const std::int64_t up = p.global_batch + (g - r);
        if (up <= c_hi) nearest_above = nearest_above == 0 ? up : std::min(nearest_above, up);
      }
    }

    // Next C vector (odometer).
    std::size_t d = 0;
    while (d < k && cvec[d] == p.c_max) cvec[d++] = p.c_min;
    if (d == k) break;
    ++cvec[d];
  }

  if (!std::isfinite(best_z))
    return Infeasible{"no (C, B) combination reaches the global batch exactly", nearest_below, nearest_above};

  AllocationSolution s;
  s.objective_z = best_z;
  std::int32_t worker = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::int32_t r = 0; r < p.classes[i].count; ++r) {
      s.allocation.per_worker.push_back({worker++, best_b[i], best_c[i]});
    }
  }
  return s;
}

}  // namespace antdt
