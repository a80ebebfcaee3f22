#include "sera/random.hpp"

namespace sera {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::initializer_list<std::uint64_t> coords) {
  // FNV-1a over the label
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = splitmix64(base ^ splitmix64(h));
  for (std::uint64_t c : coords) s = splitmix64(s ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return s;
}

std::size_t Rng::below(std::size_t n) {
  // Lemire-free simple rejection keeps the stream portable across stdlibs.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

}  // namespace sera
