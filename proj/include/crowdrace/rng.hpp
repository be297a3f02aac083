#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace crowdrace {

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent sub-stream seed from a master seed, a purpose tag and
// an index. Adding streams with new indices never changes existing ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index = 0);

// A seeded random stream. The engine (mt19937_64) has a standardised output
// sequence; every variate below is computed here rather than through
// <random> distributions, whose algorithms are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform01();

  // Uniform integer on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double standard_normal();
  double standard_exponential();

  // Gamma with shape alpha and rate beta (mean alpha / beta).
  double gamma(double shape, double rate);

  // |N(0, sigma^2)|.
  double half_normal(double sigma);

  std::int64_t poisson(double mean);

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crowdrace
