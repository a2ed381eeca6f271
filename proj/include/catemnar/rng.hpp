#pragma once

#include <cstdint>
#include <random>

namespace catemnar {

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t z);

/// Seed for stream `index` under master `seed`: splitmix64(seed ^ splitmix64(index + c)).
/// Streams for distinct indices are independent of how many other streams exist.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal(double mean = 0.0, double sd = 1.0);
  /// 1 with probability p.
  int bernoulli(double p) { return uniform() < p ? 1 : 0; }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace catemnar
