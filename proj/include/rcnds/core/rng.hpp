#pragma once

#include <cstdint>

#include "rcnds/core/tensor.hpp"

namespace rcnds {

/// Counter-based generator (SplitMix64 over seed + counter). The value
/// sequence depends only on the seed and the number of draws, so it is
/// identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound), bound >= 1 (Lemire rejection).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via the Marsaglia polar method.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent generator for a named sub-purpose (init, shuffle, ...).
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. N(mean, std^2) samples in the given shape.
template <typename T>
Tensor<T> gaussian_init(const Shape& shape, double mean, double std, Rng& rng) {
  if (std < 0) throw ConfigError("gaussian_init: negative standard deviation");
  Tensor<T> t(shape);
  for (auto& v : t.vec()) v = static_cast<T>(mean + std * rng.normal());
  return t;
}

}  // namespace rcnds
