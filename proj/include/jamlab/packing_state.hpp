#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "jamlab/errors.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/spacetime.hpp"

namespace jamlab {

/// Dense uniform grid over a box, cell side >= d_S so that any two adjacent
/// centers fall in the same or neighbouring cells (D lies in the ball of
/// radius d_S). Points beyond the covered box are kept in a side list.
class CenterGrid {
 public:
  CenterGrid() = default;
  CenterGrid(const Box& domain, double min_side) : domain_(domain), origin_(domain.lo), dim_(domain.dim()) {
    if (!(min_side > 0.0)) throw ContractViolation("grid cell side must be positive");
    side_ = min_side * (1.0 + 1e-9);
    std::size_t total = 1;
    for (int k = 0; k < dim_; ++k) {
      const double cells = std::floor(domain.side(k) / side_) + 1.0;
      if (!std::isfinite(cells) || cells > 1e8) throw UnsupportedConfiguration("region too large for the neighbour grid");
      n_[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(cells));
      stride_[k] = static_cast<std::int64_t>(total);
      total *= static_cast<std::size_t>(n_[k]);
      if (total > (std::size_t{1} << 27)) throw UnsupportedConfiguration("region too large for the neighbour grid (over 2^27 cells)");
    }
    head_.assign(total, -1);
  }

  double side() const { return side_; }

  void insert(std::int32_t id, const Vec& p) {
    if (static_cast<std::size_t>(id) >= next_.size()) next_.resize(id + 1, -1);
    std::int64_t cell = 0;
    for (int k = 0; k < dim_; ++k) {
      const std::int64_t c = coord(p[k], k);
      if (c < 0 || c >= n_[k]) {
        outside_.push_back(id);
        return;
      }
      cell += c * stride_[k];
    }
    next_[id] = head_[cell];
    head_[cell] = id;
  }

  /// Calls f(id) for every stored point whose cell meets `query` (plus the side list).
  template <class F>
  void visit(const Box& query, F&& f) const {
    visit_until(query, [&](std::int32_t id) {
      f(id);
      return false;
    });
  }

  /// As visit, stopping early once f returns true; returns whether it did.
  template <class F>
  bool visit_until(const Box& query, F&& f) const {
    std::int64_t lo[kMaxDim], hi[kMaxDim];
    bool any = true;
    for (int k = 0; k < dim_; ++k) {
      lo[k] = std::max<std::int64_t>(0, coord(query.lo[k], k));
      hi[k] = std::min<std::int64_t>(n_[k] - 1, coord(query.hi[k], k));
      if (lo[k] > hi[k]) any = false;
    }
    if (any) {
      std::int64_t c[kMaxDim];
      for (int k = 0; k < dim_; ++k) c[k] = lo[k];
      for (;;) {
        std::int64_t cell = 0;
        for (int k = 0; k < dim_; ++k) cell += c[k] * stride_[k];
        for (std::int32_t id = head_[cell]; id >= 0; id = next_[id])
          if (f(id)) return true;
        int k = 0;
        while (k < dim_ && ++c[k] > hi[k]) {
          c[k] = lo[k];
          ++k;
        }
        if (k == dim_) break;
      }
    }
    if (!outside_.empty() && !domain_.contains(query))
      for (std::int32_t id : outside_)
        if (f(id)) return true;
    return false;
  }

  bool in_cell_of(std::int32_t id, const Vec& p) const {
    std::int64_t cell = 0;
    for (int k = 0; k < dim_; ++k) {
      const std::int64_t c = coord(p[k], k);
      if (c < 0 || c >= n_[k]) return std::find(outside_.begin(), outside_.end(), id) != outside_.end();
      cell += c * stride_[k];
    }
    for (std::int32_t j = head_[cell]; j >= 0; j = next_[j])
      if (j == id) return true;
    return false;
  }

 private:
  std::int64_t coord(double x, int k) const {
    const double c = std::floor((x - origin_[k]) / side_);
    if (c < -1.0) return -1;
    if (c > static_cast<double>(n_[k])) return n_[k];
    return static_cast<std::int64_t>(c);
  }

  Box domain_;
  Vec origin_;
  int dim_ = 0;
  double side_ = 1.0;
  std::int64_t n_[kMaxDim] = {1, 1, 1, 1};
  std::int64_t stride_[kMaxDim] = {0, 0, 0, 0};
  std::vector<std::int32_t> head_;
  std::vector<std::int32_t> next_;
  std::vector<std::int32_t> outside_;
};

/// Accepted centers (with their space-time marks) and frozen obstacles η that
/// block arrivals but are not counted.
class PackingState {
 public:
  PackingState(ConvexSolid solid, Box region, std::vector<Vec> frozen = {})
      : solid_(std::move(solid)), region_(std::move(region)) {
    if (region_.dim() != solid_.dim()) throw ContractViolation("region and solid dimensions differ");
    if (region_.empty()) throw ContractViolation("packing region is empty");
    const double r = solid_.diameter();
    grid_ = CenterGrid(region_.dilate(r), r);
    for (std::size_t j = 0; j < frozen.size(); ++j) {
      if (frozen[j].dim() != solid_.dim()) throw ValidationError("frozen point " + std::to_string(j) + " has the wrong dimension");
      const Box near{frozen[j] - Vec(solid_.dim(), r), frozen[j] + Vec(solid_.dim(), r)};
      grid_.visit(near, [&](std::int32_t id) {
        if (overlaps(frozen[j], centers_[id], solid_))
          throw ValidationError("pre-packed configuration is not admissible: points " + std::to_string(frozen_index(id)) +
                                " and " + std::to_string(j) + " overlap (gauge distance " +
                                std::to_string(gauge_norm(frozen[j] - centers_[id], solid_)) + " <= 1)");
      });
      store(frozen[j]);
      frozen_.push_back(frozen[j]);
    }
  }

  const ConvexSolid& solid() const { return solid_; }
  const Box& region() const { return region_; }
  int dim() const { return solid_.dim(); }
  const std::vector<SpaceTimePoint>& accepted() const { return accepted_; }
  const std::vector<Vec>& frozen() const { return frozen_; }
  std::size_t count() const { return accepted_.size(); }
  /// Accepted and frozen centers in insertion order (frozen first).
  const std::vector<Vec>& centers() const { return centers_; }

  /// p is adjacent to some accepted or frozen center.
  bool is_blocked(const Vec& p) const {
    if (p.dim() != dim()) throw ContractViolation("dimension mismatch in is_blocked");
    const double r = solid_.diameter();
    const ConvexBody& d = solid_.difference();
    return grid_.visit_until(Box{p - Vec(dim(), r), p + Vec(dim(), r)},
                             [&](std::int32_t id) { return d.gauge(p - centers_[id]) <= 1.0; });
  }

  /// The usual rule: accept iff p lies in the region and is adjacent to nothing packed.
  bool try_accept(const SpaceTimePoint& p) {
    if (!region_.contains_half_open(p.position) || is_blocked(p.position)) return false;
    store(p.position);
    accepted_.push_back(p);
    return true;
  }

  /// Calls f(center) for every stored center within sup-distance d_S of `box`.
  template <class F>
  void visit_near(const Box& box, F&& f) const {
    grid_.visit(box.dilate(solid_.diameter()), [&](std::int32_t id) { f(centers_[id]); });
  }

  /// Throws ContractViolation describing the first broken invariant.
  void check_invariants() const {
    for (std::size_t i = 0; i < accepted_.size(); ++i)
      if (!region_.contains_half_open(accepted_[i].position))
        throw ContractViolation("accepted center " + std::to_string(i) + " lies outside the region");
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      if (!grid_.in_cell_of(static_cast<std::int32_t>(i), centers_[i]))
        throw ContractViolation("grid inconsistent for center " + std::to_string(i));
      const Vec& p = centers_[i];
      const double r = solid_.diameter();
      grid_.visit(Box{p - Vec(dim(), r), p + Vec(dim(), r)}, [&](std::int32_t id) {
        if (static_cast<std::size_t>(id) != i && gauge_norm(p - centers_[id], solid_) <= 1.0)
          throw ContractViolation("hard-core violated between centers " + std::to_string(i) + " and " + std::to_string(id));
      });
    }
  }

 private:
  std::size_t frozen_index(std::int32_t id) const { return static_cast<std::size_t>(id); }

  void store(const Vec& p) {
    grid_.insert(static_cast<std::int32_t>(centers_.size()), p);
    centers_.push_back(p);
  }

  ConvexSolid solid_;
  Box region_;
  CenterGrid grid_;
  std::vector<Vec> centers_;
  std::vector<Vec> frozen_;
  std::vector<SpaceTimePoint> accepted_;
};

/// Upper bound on the number of pairwise non-adjacent centers in `region`:
/// half-gauge balls around them are disjoint and lie in region + D/2.
inline double packing_count_bound(const ConvexSolid& solid, const Box& region) {
  const Box half = solid.difference().bounds();
  double v = 1.0;
  for (int k = 0; k < region.dim(); ++k) v *= region.side(k) + 0.5 * (half.hi[k] - half.lo[k]);
  return v / solid.half_gauge_ball_volume();
}

}  // namespace jamlab
