#pragma once

#include <cstdint>
#include <random>

namespace antdt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sequential stream. mt19937_64 is fully specified by the standard, so the
// stream is identical across platforms for a given seed.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, n). Modulo bias is irrelevant at the n we use.
  std::uint64_t bounded(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  double next_double() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 eng_;
};

// Counter-based draw in [0, 1) keyed by (seed, a, b). Used for per-node
// per-cycle disturbance draws: adding nodes or reordering events never
// perturbs another node's draws.
inline double hash_draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace antdt
