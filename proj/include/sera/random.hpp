#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace sera {

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a base seed, a stable label and a
// list of integer coordinates. Streams with different labels never collide by
// construction order, so adding a new consumer leaves existing streams intact.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::initializer_list<std::uint64_t> coords = {});

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sera
