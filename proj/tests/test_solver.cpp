#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "antdt/rng.hpp"
#include "antdt/solver.hpp"

using namespace antdt;

namespace {

// Exhaustive oracle: enumerate every composition of B into n parts >= 1 and
// take the min-max finish time. Independent of the production solver.
double brute_force_batch_z(std::int64_t B, const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::int64_t> alloc(n, 0);
  double best = std::numeric_limits<double>::infinity();
  auto rec = [&](auto&& self, std::size_t i, std::int64_t left, double worst) -> void {
    if (worst >= best) return;
    if (i + 1 == n) {
      if (left < 1) return;
      best = std::min(best, std::max(worst, static_cast<double>(left) / v[i]));
      return;
    }
    const std::int64_t reserve = static_cast<std::int64_t>(n - i - 1);
    for (std::int64_t b = 1; b <= left - reserve; ++b) {
      self(self, i + 1, left - b, std::max(worst, static_cast<double>(b) / v[i]));
    }
  };
  rec(rec, 0, B, 0.0);
  return best;
}

}  // namespace

TEST_CASE("continuous relaxation is the exact proportional split") {
  BatchProblem p{8, {1, 3}};
  const auto r = continuous_relaxation(p);
  CHECK(r[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(6.0).epsilon(1e-12));

  BatchProblem eq{12, {5, 5, 5}};
  for (double x : continuous_relaxation(eq)) CHECK(x == doctest::Approx(4.0).epsilon(1e-12));

  BatchProblem single{17, {2.5}};
  CHECK(continuous_relaxation(single)[0] == doctest::Approx(17.0).epsilon(1e-12));

  // Sums to B for arbitrary speeds.
  BatchProblem odd{1000, {0.37, 2.2, 11.03, 0.0001}};
  double sum = 0;
  for (double x : continuous_relaxation(odd)) sum += x;
  CHECK(sum == doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("solve_batch on symmetric and hand-enumerated instances") {
  {
    const auto r = solve_batch(BatchProblem{8, {1, 1, 1, 1}});
    REQUIRE(is_feasible(r));
    for (const auto& e : solution(r).allocation.per_worker) CHECK(e.batch == 2);
    CHECK(solution(r).objective_z == doctest::Approx(2.0));
  }
  {
    // Oracle over all 7 splits of 8 into two positive parts: (2, 6) wins.
    const auto r = solve_batch(BatchProblem{8, {1, 3}});
    REQUIRE(is_feasible(r));
    CHECK(solution(r).allocation.per_worker[0].batch == 2);
    CHECK(solution(r).allocation.per_worker[1].batch == 6);
    CHECK(solution(r).objective_z == doctest::Approx(brute_force_batch_z(8, {1, 3})));
  }
  {
    // (3, 7) gives z = 3.5; the alternative rounding (4, 6) gives 4.
    const auto r = solve_batch(BatchProblem{10, {1, 2}});
    REQUIRE(is_feasible(r));
    CHECK(solution(r).allocation.per_worker[0].batch == 3);
    CHECK(solution(r).allocation.per_worker[1].batch == 7);
    CHECK(solution(r).objective_z == doctest::Approx(3.5));
  }
}

TEST_CASE("solve_batch is infeasible when B < n") {
  CHECK_FALSE(is_feasible(solve_batch(BatchProblem{3, {1, 1, 1, 1}})));
}

TEST_CASE("solve_batch allocations sum to B exactly") {
  SeededRng rng(11);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng.bounded(8);
    BatchProblem p;
    p.global_batch = static_cast<std::int64_t>(n) + static_cast<std::int64_t>(rng.bounded(100000));
    for (std::size_t k = 0; k < n; ++k) p.speeds.push_back(0.05 + 10 * rng.next_double());
    const auto r = solve_batch(p);
    REQUIRE(is_feasible(r));
    CHECK(solution(r).allocation.total() == p.global_batch);
    for (const auto& e : solution(r).allocation.per_worker) CHECK(e.batch >= 1);
  }
}

TEST_CASE("solve_batch matches the exhaustive oracle on small instances") {
  SeededRng rng(13);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng.bounded(5);
    BatchProblem p;
    p.global_batch = static_cast<std::int64_t>(n + rng.bounded(40 - n + 1));
    for (std::size_t k = 0; k < n; ++k) p.speeds.push_back(0.1 + 8 * rng.next_double());
    const auto r = solve_batch(p);
    REQUIRE(is_feasible(r));
    CHECK(solution(r).objective_z == doctest::Approx(brute_force_batch_z(p.global_batch, p.speeds)).epsilon(1e-9));
  }
}

TEST_CASE("solve_batch scale invariance: scaling speeds rescales z, not the split") {
  SeededRng rng(17);
  for (int i = 0; i < 50; ++i) {
    BatchProblem p;
    const std::size_t n = 2 + rng.bounded(4);
    p.global_batch = static_cast<std::int64_t>(n) + static_cast<std::int64_t>(rng.bounded(500));
    for (std::size_t k = 0; k < n; ++k) p.speeds.push_back(0.2 + 5 * rng.next_double());
    BatchProblem scaled = p;
    const double c = 4.0;
    for (double& s : scaled.speeds) s *= c;
    const auto a = solve_batch(p);
    const auto b = solve_batch(scaled);
    REQUIRE(is_feasible(a));
    REQUIRE(is_feasible(b));
    CHECK(solution(a).allocation == solution(b).allocation);
    CHECK(solution(b).objective_z == doctest::Approx(solution(a).objective_z / c).epsilon(1e-9));
  }
}

TEST_CASE("solve_batch monotonicity: a faster worker never hurts") {
  SeededRng rng(19);
  for (int i = 0; i < 100; ++i) {
    BatchProblem p;
    const std::size_t n = 2 + rng.bounded(4);
    p.global_batch = static_cast<std::int64_t>(n) + static_cast<std::int64_t>(rng.bounded(60));
    for (std::size_t k = 0; k < n; ++k) p.speeds.push_back(0.2 + 5 * rng.next_double());
    const double before = solution(solve_batch(p)).objective_z;
    BatchProblem faster = p;
    faster.speeds[rng.bounded(n)] *= 1.5;
    const double after = solution(solve_batch(faster)).objective_z;
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("solve_grad_accum single-class instance") {
  GradAccumProblem p;
  p.global_batch = 16;
  p.classes = {{4, 1.0, 1, 10}};
  p.c_min = 1;
  p.c_max = 5;
  const auto r = solve_grad_accum(p);
  REQUIRE(is_feasible(r));
  CHECK(solution(r).objective_z == doctest::Approx(4.0));
  for (const auto& e : solution(r).allocation.per_worker) {
    CHECK(e.batch * e.accum == 4);  // any (C, B) with C*B = 4 is optimal
  }
  CHECK(solution(r).allocation.total() == 16);
}

TEST_CASE("solve_grad_accum favors larger work products on the fast class") {
  GradAccumProblem p;
  p.global_batch = 128;
  p.classes = {{4, 3.0, 8, 32}, {4, 1.0, 8, 32}};
  p.c_min = 1;
  p.c_max = 5;
  const auto r = solve_grad_accum(p);
  REQUIRE(is_feasible(r));
  const auto& alloc = solution(r).allocation.per_worker;
  const std::int64_t fast_work = alloc[0].batch * alloc[0].accum;
  const std::int64_t slow_work = alloc[4].batch * alloc[4].accum;
  CHECK(fast_work > slow_work);
  CHECK(solution(r).allocation.total() == 128);
}

TEST_CASE("solve_grad_accum reports the feasibility envelope") {
  GradAccumProblem p;
  p.global_batch = 10;  // below 4 * 1 * 8 = 32
  p.classes = {{4, 1.0, 8, 32}};
  p.c_min = 1;
  p.c_max = 5;
  const auto r = solve_grad_accum(p);
  REQUIRE_FALSE(is_feasible(r));
  CHECK(std::get<Infeasible>(r).nearest_above == 32);
}

TEST_CASE("solve_grad_accum handles achievable-total gaps exactly") {
  // Every increment moves the total by n*C = 4, so odd-residue batches are
  // unreachable inside the envelope.
  GradAccumProblem p;
  p.classes = {{2, 1.0, 1, 10}};
  p.c_min = 2;
  p.c_max = 2;

  p.global_batch = 26;
  {
    const auto r = solve_grad_accum(p);
    REQUIRE_FALSE(is_feasible(r));
    CHECK(std::get<Infeasible>(r).nearest_below == 24);
    CHECK(std::get<Infeasible>(r).nearest_above == 28);
  }
  p.global_batch = 28;
  {
    const auto r = solve_grad_accum(p);
    REQUIRE(is_feasible(r));
    CHECK(solution(r).allocation.total() == 28);
  }
}
