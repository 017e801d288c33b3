#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lirr {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Combines a root seed with a sequence of labels into a child seed.
/// Children are independent of one another, so adding a label somewhere
/// never perturbs the streams derived from other labels.
class SeedSequence {
 public:
  explicit SeedSequence(std::uint64_t root) : state_(mix64(root)) {}

  SeedSequence& add(std::uint64_t v);
  SeedSequence& add(std::string_view s);
  std::uint64_t value() const { return mix64(state_); }

 private:
  std::uint64_t state_;
};

/// Seeded generator with distribution mappings fixed in this library, so that
/// draws do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lirr
