#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "jamlab/errors.hpp"
#include "jamlab/rng.hpp"
#include "jamlab/vec.hpp"

namespace jamlab {

/// A point of R^d x R_+ : location, time mark, and ordinal in (time, lex) order.
struct SpaceTimePoint {
  Vec position;
  double time = 0.0;
  std::uint64_t index = 0;
};

/// Arrival order: by time, ties broken lexicographically on position.
inline bool arrives_before(const SpaceTimePoint& a, const SpaceTimePoint& b) {
  if (a.time != b.time) return a.time < b.time;
  return lex_less(a.position, b.position);
}

inline void sort_and_index(std::vector<SpaceTimePoint>& pts) {
  std::sort(pts.begin(), pts.end(), arrives_before);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i].index = i;
}

inline Vec uniform_in(const Box& region, Rng& rng) {
  Vec p(region.dim());
  for (int k = 0; k < region.dim(); ++k) p[k] = rng.uniform(region.lo[k], region.hi[k]);
  return p;
}

/// Homogeneous Poisson process on region x [0, horizon] with the given intensity.
inline std::vector<SpaceTimePoint> poisson_spacetime(const Box& region, double horizon, double intensity, Rng& rng) {
  if (!(horizon > 0.0)) throw ContractViolation("poisson_spacetime: time horizon must be positive");
  if (!(intensity > 0.0)) throw ContractViolation("poisson_spacetime: intensity must be positive");
  if (region.empty() || !std::isfinite(region.volume())) throw ContractViolation("poisson_spacetime: region must be a nondegenerate bounded box");
  const std::uint64_t n = rng.poisson(intensity * region.volume() * horizon);
  std::vector<SpaceTimePoint> pts(n);
  for (auto& p : pts) {
    p.position = uniform_in(region, rng);
    p.time = rng.uniform(0.0, horizon);
  }
  sort_and_index(pts);
  return pts;
}

}  // namespace jamlab
