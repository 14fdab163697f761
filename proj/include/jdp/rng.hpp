#pragma once

// Seeded random streams. Every consumer owns its own engine; seeds for
// independent streams are derived from a base seed and a label so that adding
// a stream never shifts the draws of another.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace jdp {

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic child seed: mixes base, a label hash and an index.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

std::uint64_t fnv1a64(std::string_view bytes);

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform on {0, ..., count - 1}.
  std::size_t uniform_index(std::size_t count);
  double uniform01();
  double normal();
  void fill_normal(std::span<double> out, double stddev);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uint64_t seed_;
};

}  // namespace jdp
