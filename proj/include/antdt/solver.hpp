#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "antdt/types.hpp"

namespace antdt {

// Batch split across n workers: min max_i B_i / v_i subject to sum B_i = B,
// B_i >= 1 integer.
struct BatchProblem {
  std::int64_t global_batch = 0;  // B
  std::vector<double> speeds;     // v_i, samples/second
};

// Batch plus accumulation across k device classes:
// min max_i C_i * B_i / v_i subject to sum n_i * C_i * B_i = B,
// b_min_i <= B_i <= b_max_i, c_min <= C_i <= c_max, all integer.
struct GradAccumProblem {
  struct Class {
    std::int32_t count = 0;  // n_i
    double speed = 1.0;      // v_i
    std::int64_t b_min = 1;
    std::int64_t b_max = 1;
  };
  std::int64_t global_batch = 0;
  std::vector<Class> classes;
  std::int32_t c_min = 1;
  std::int32_t c_max = 1;
};

struct AllocationSolution {
  BatchAllocation allocation;  // worker-indexed entries (classes unrolled)
  double objective_z = 0.0;    // max over workers of C_i * B_i / v_i
};

struct Infeasible {
  std::string reason;
  // For grad-accum: the achievable totals closest to B from below/above
  // (0 when no bound exists on that side).
  std::int64_t nearest_below = 0;
  std::int64_t nearest_above = 0;
};

using SolveResult = std::variant<AllocationSolution, Infeasible>;

// Exact proportional split B * v_i / sum(v); the continuous relaxation of
// the batch problem.
std::vector<double> continuous_relaxation(const BatchProblem& p);

SolveResult solve_batch(const BatchProblem& p);
SolveResult solve_grad_accum(const GradAccumProblem& p);

inline bool is_feasible(const SolveResult& r) { return std::holds_alternative<AllocationSolution>(r); }
inline const AllocationSolution& solution(const SolveResult& r) { return std::get<AllocationSolution>(r); }

}  // namespace antdt
