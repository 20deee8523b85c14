#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tutor {

/// Deterministic random stream. Wraps std::mt19937_64 (whose output sequence
/// is pinned by the standard) and implements the distribution transforms by
/// hand, since the std distributions are implementation-defined and would
/// break byte-reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal via Box-Muller. Consumes two uniforms per call.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

/// Derives an independent substream seed from a base seed, a stream name and
/// up to two indices. All randomness in the project flows from one master
/// seed through these named substreams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace tutor
