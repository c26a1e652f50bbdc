#pragma once

// Rescaled packing measures on [0,1)^d: the point measure puts a unit atom at
// every accepted center divided by lambda^(1/d); the volume measure spreads
// the same unit mass uniformly over each rescaled solid.

#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "jamlab/errors.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/packing_state.hpp"

namespace jamlab {

struct PackingPointMeasure {
  double lambda = 1.0;
  std::vector<Vec> atoms;

  double total_mass() const { return static_cast<double>(atoms.size()); }
};

/// Stored in packing coordinates; nu'(A) = (1/|S|) sum_i |(lambda^(1/d) A) ∩ (x_i + S)|.
struct PackingVolumeMeasure {
  double lambda = 1.0;
  ConvexSolid solid;
  std::vector<Vec> centers;

  double scale() const { return std::pow(lambda, 1.0 / solid.dim()); }
};

inline PackingPointMeasure point_measure(const PackingState& state, double lambda) {
  if (!(lambda > 0.0)) throw ContractViolation("lambda must be positive");
  const double s = std::pow(lambda, 1.0 / state.dim());
  PackingPointMeasure m{lambda, {}};
  m.atoms.reserve(state.count());
  for (const auto& p : state.accepted()) {
    Vec a = p.position;
    for (int k = 0; k < a.dim(); ++k) a[k] = p.position[k] / s;
    m.atoms.push_back(a);
  }
  return m;
}

inline PackingVolumeMeasure volume_measure(const PackingState& state, double lambda) {
  if (!(lambda > 0.0)) throw ContractViolation("lambda must be positive");
  PackingVolumeMeasure m{lambda, state.solid(), {}};
  m.centers.reserve(state.count());
  for (const auto& p : state.accepted()) m.centers.push_back(p.position);
  return m;
}

/// Indicator of the half-open box [lo, hi), scaled by `value`.
struct BoxIndicator {
  Box box;
  double value = 1.0;
};

/// Sum of box indicators with weights (boxes may be unbounded, e.g. for constants).
struct PiecewiseConstant {
  std::vector<BoxIndicator> pieces;
};

/// Arbitrary bounded, a.e. continuous function with a declared sup-norm bound.
struct Callback {
  std::function<double(const Vec&)> f;
  double bound = 0.0;
};

using TestFunction = std::variant<BoxIndicator, PiecewiseConstant, Callback>;

inline TestFunction constant_function(int dim, double c = 1.0) { return BoxIndicator{Box::everything(dim), c}; }

inline TestFunction box_indicator(const Box& b, double value = 1.0) { return BoxIndicator{b, value}; }

namespace detail {

inline double eval_pieces(const std::vector<BoxIndicator>& pieces, const Vec& x) {
  double s = 0.0;
  for (const auto& p : pieces)
    if (p.box.contains_half_open(x)) s += p.value;
  return s;
}

inline double eval_callback(const Callback& c, const Vec& x) {
  const double v = c.f(x);
  if (!(std::abs(v) <= c.bound))
    throw ContractViolation("test function exceeded its declared bound " + std::to_string(c.bound) + " (value " +
                            std::to_string(v) + ")");
  return v;
}

inline const std::vector<BoxIndicator>* as_pieces(const TestFunction& f, std::vector<BoxIndicator>& tmp) {
  if (const auto* b = std::get_if<BoxIndicator>(&f)) {
    tmp.assign(1, *b);
    return &tmp;
  }
  if (const auto* p = std::get_if<PiecewiseConstant>(&f)) return &p->pieces;
  return nullptr;
}

}  // namespace detail

inline double evaluate(const TestFunction& f, const Vec& x) {
  std::vector<BoxIndicator> tmp;
  if (const auto* pieces = detail::as_pieces(f, tmp)) return detail::eval_pieces(*pieces, x);
  return detail::eval_callback(std::get<Callback>(f), x);
}

/// <f, nu> = sum of f over the atoms.
inline double integrate_point(const TestFunction& f, const PackingPointMeasure& m) {
  double s = 0.0;
  for (const Vec& a : m.atoms) s += evaluate(f, a);
  return s;
}

/// <f, nu'>: each solid contributes the average of f over its rescaled copy.
/// Box pieces use clipped_volume (closed form except balls in d >= 3); callbacks
/// use a dyadic midpoint rule over the solid with the same cell floor.
inline double integrate_volume(const TestFunction& f, const PackingVolumeMeasure& m, double tol) {
  if (!(tol > 0.0)) throw ContractViolation("integrate_volume: tol must be positive");
  const double s = m.scale();
  const double vs = m.solid.volume();
  std::vector<BoxIndicator> tmp;
  if (const auto* pieces = detail::as_pieces(f, tmp)) {
    std::vector<Box> scaled;
    for (const auto& p : *pieces) {
      Box b = p.box;
      for (int k = 0; k < b.dim(); ++k) {
        b.lo[k] *= s;
        b.hi[k] *= s;
      }
      scaled.push_back(b);
    }
    double total = 0.0;
    for (const Vec& c : m.centers)
      for (std::size_t j = 0; j < scaled.size(); ++j) {
        const double v = clipped_volume(m.solid, c, scaled[j], tol);
        if (v > 0.0) total += (*pieces)[j].value * (v / vs);
      }
    return total;
  }
  const Callback& cb = std::get<Callback>(f);
  const ConvexBody& body = m.solid.body();
  double total = 0.0;
  for (const Vec& c : m.centers) {
    Box bb = body.bounds();
    bb.lo += c;
    bb.hi += c;
    double longest = 0.0;
    for (int k = 0; k < bb.dim(); ++k) longest = std::max(longest, bb.side(k));
    const double h = std::max(tol * vs / detail::box_surface(bb), longest / 64.0);
    double acc = 0.0;
    // midpoint rule on a dyadic mesh of side <= h; boundary cells count half
    auto rec = [&](auto&& self, const Box& cell, bool covered) -> void {
      if (!covered) {
        if (!body.intersects_box(c, cell)) return;
        covered = body.covers_box(c, cell);
      }
      double side = 0.0;
      for (int k = 0; k < cell.dim(); ++k) side = std::max(side, cell.side(k));
      if (side <= h) {
        Vec mid = cell.center();
        for (int k = 0; k < mid.dim(); ++k) mid[k] /= s;
        acc += detail::eval_callback(cb, mid) * cell.volume() * (covered ? 1.0 : 0.5);
        return;
      }
      const Vec mid = cell.center();
      for (unsigned q = 0; q < cell.corner_count(); ++q) {
        Box child = cell;
        for (int k = 0; k < cell.dim(); ++k) {
          if (q & (1u << k))
            child.lo[k] = mid[k];
          else
            child.hi[k] = mid[k];
        }
        self(self, child, covered);
      }
    };
    rec(rec, bb, false);
    total += acc / vs;
  }
  return total;
}

}  // namespace jamlab
