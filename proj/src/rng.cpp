#include "tutor/rng.hpp"

#include <cmath>
#include <numbers>

namespace tutor {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], keeping the log argument positive.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

// splitmix64 finalizer; good avalanche, stable across platforms.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = mix(base);
  for (unsigned char c : stream) h = mix(h ^ c);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return h;
}

}  // namespace tutor
