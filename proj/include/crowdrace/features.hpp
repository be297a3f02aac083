#pragma once

#include <array>
#include <cstdint>

#include "crowdrace/core.hpp"

namespace crowdrace {

// Bump when the design-row layout below changes.
inline constexpr int kFeatureVersion = 1;
// intercept, rank / n_workers, elapsed / duration, remaining / n_posts, eligible
inline constexpr std::size_t kFeatureCount = 5;

using DesignRow = std::array<double, kFeatureCount>;

// State of a worker at the start of a holding interval.
struct FeatureVector {
  std::int32_t rank = 1;
  Millis elapsed_time_ms = 0;
  std::int64_t annotations_remaining = 0;
  bool eligible = false;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureScale {
  double n_workers = 1;
  double duration_ms = 1;
  double n_posts = 1;
};

inline DesignRow design_row(const FeatureVector& f, const FeatureScale& s) {
  return {1.0, static_cast<double>(f.rank) / s.n_workers,
          static_cast<double>(f.elapsed_time_ms) / s.duration_ms,
          static_cast<double>(f.annotations_remaining) / s.n_posts,
          f.eligible ? 1.0 : 0.0};
}

}  // namespace crowdrace
