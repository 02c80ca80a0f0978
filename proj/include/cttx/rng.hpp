#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace cttx {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream `index` of an ensemble rooted at `master`. Paths simulated
/// from distinct streams are independent of execution order.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Exponential with the given rate (> 0).
  double exponential(double rate);
  /// Index drawn proportionally to `weights`; `total` is their sum.
  std::size_t choose(std::span<const double> weights, double total);

 private:
  std::mt19937_64 engine_;
};

}  // namespace cttx
