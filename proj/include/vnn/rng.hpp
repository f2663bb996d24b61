#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace vnn {

// Seeded generator with distributions defined here rather than by the
// standard library, so generated data and initial weights are identical
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal (Box-Muller, cached second variate).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  void fill_uniform(std::span<double> out, double lo, double hi) {
    for (auto& v : out) v = uniform(lo, hi);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes a base seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace vnn
