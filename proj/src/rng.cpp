#include "crowdrace/rng.hpp"

#include <cmath>
#include <limits>

#include "crowdrace/error.hpp"

namespace crowdrace {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index) {
  std::uint64_t h = splitmix64(master ^ fnv1a64(tag));
  return splitmix64(h + splitmix64(index));
}

double RandomStream::uniform01() {
  // 53 random bits, centred in their bucket so 0 and 1 are unreachable.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw DomainError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double RandomStream::standard_normal() {
  // Marsaglia polar method; the second variate is discarded so that the
  // stream carries no hidden state beyond the engine.
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

double RandomStream::standard_exponential() { return -std::log(uniform01()); }

double RandomStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw DomainError("gamma: shape and rate must be positive");
  }
  // Marsaglia & Tsang (2000). For shape < 1 draw at shape + 1 and scale by
  // U^(1/shape), which is exact.
  double boost = 1.0;
  double a = shape;
  if (a < 1.0) {
    boost = std::pow(uniform01(), 1.0 / shape);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 ||
        std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return boost * d * v / rate;
    }
  }
}

double RandomStream::half_normal(double sigma) {
  if (sigma < 0.0) throw DomainError("half_normal: sigma must be >= 0");
  return std::abs(standard_normal()) * sigma;
}

std::int64_t RandomStream::poisson(double mean) {
  if (!(mean >= 0.0)) throw DomainError("poisson: mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean > 500.0) throw DomainError("poisson: mean too large for inversion");
  // Sequential inversion.
  const double u = uniform01();
  double p = std::exp(-mean);
  double cdf = p;
  std::int64_t k = 0;
  while (u > cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (p == 0.0 && cdf < u) break;  // rounding tail
  }
  return k;
}

}  // namespace crowdrace
