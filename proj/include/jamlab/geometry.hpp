#pragma once

// Convex solids, difference bodies and the gauge norm.
//
// Two translates x + S and y + S intersect iff x - y lies in the difference
// body D = S + (-S). The gauge (Minkowski functional) of D is the norm used
// throughout: overlap <=> gauge(x - y) <= 1. All sets are closed.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jamlab/errors.hpp"
#include "jamlab/vec.hpp"

namespace jamlab {

enum class ShapeKind { ball, box, polygon };

/// A convex body containing the origin in its interior: a ball, an
/// axis-aligned box, or (d = 2) a convex polygon.
class ConvexBody {
 public:
  static ConvexBody ball(int dim, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("ball radius must be positive and finite");
    ConvexBody b;
    b.kind_ = ShapeKind::ball;
    b.dim_ = Vec(dim).dim();
    b.radius_ = radius;
    return b;
  }

  static ConvexBody box(const Vec& half_extents) {
    for (int k = 0; k < half_extents.dim(); ++k)
      if (!(half_extents[k] > 0.0) || !std::isfinite(half_extents[k]))
        throw ValidationError("box half-extents must be positive and finite");
    ConvexBody b;
    b.kind_ = ShapeKind::box;
    b.dim_ = half_extents.dim();
    b.half_ = half_extents;
    return b;
  }

  /// Vertices in counter-clockwise order around the origin, strictly convex.
  static ConvexBody polygon(std::vector<Vec> ccw) {
    const std::size_t n = ccw.size();
    if (n < 3) throw ValidationError("polygon needs at least 3 vertices");
    ConvexBody b;
    b.kind_ = ShapeKind::polygon;
    b.dim_ = 2;
    b.verts_ = std::move(ccw);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec& p = b.verts_[i];
      const Vec& q = b.verts_[(i + 1) % n];
      Vec nrm{q[1] - p[1], -(q[0] - p[0])};
      const double len = nrm.norm();
      if (!(len > 0.0)) throw ValidationError("polygon has repeated vertices");
      nrm *= 1.0 / len;
      const double off = dot(nrm, p);
      if (!(off > 0.0)) throw ValidationError("polygon does not contain its centroid in the interior");
      b.normals_.push_back(nrm);
      b.offsets_.push_back(off);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (dot(b.normals_[i], b.verts_[j]) > b.offsets_[i] * (1.0 + 1e-12))
          throw ValidationError("polygon is not convex");
    return b;
  }

  ShapeKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const { return radius_; }
  const Vec& half_extents() const { return half_; }
  const std::vector<Vec>& vertices() const { return verts_; }

  /// Minkowski functional: inf{a >= 0 : v in a * body}.
  double gauge(const Vec& v) const {
    if (v.dim() != dim_) throw ContractViolation("dimension mismatch in gauge");
    switch (kind_) {
      case ShapeKind::ball:
        return v.norm() / radius_;
      case ShapeKind::box: {
        double g = 0.0;
        for (int k = 0; k < dim_; ++k) g = std::max(g, std::abs(v[k]) / half_[k]);
        return g;
      }
      case ShapeKind::polygon: {
        double g = 0.0;
        for (std::size_t e = 0; e < normals_.size(); ++e) g = std::max(g, dot(normals_[e], v) / offsets_[e]);
        return g;
      }
    }
    return 0.0;
  }

  bool contains(const Vec& v) const { return gauge(v) <= 1.0; }

  /// center + body contains the whole cell (corner test; exact by convexity).
  bool covers_box(const Vec& center, const Box& cell) const {
    if (kind_ != ShapeKind::polygon) {
      // balls and boxes are maximised at the corner farthest from the center on every axis
      Vec far(dim_);
      for (int k = 0; k < dim_; ++k) far[k] = std::max(std::abs(cell.lo[k] - center[k]), std::abs(cell.hi[k] - center[k]));
      return contains(far);
    }
    for (unsigned m = 0; m < cell.corner_count(); ++m)
      if (!contains(cell.corner(m) - center)) return false;
    return true;
  }

  /// (center + body) and the closed cell share a point.
  bool intersects_box(const Vec& center, const Box& cell) const {
    switch (kind_) {
      case ShapeKind::ball: {
        double d2 = 0.0;
        for (int k = 0; k < dim_; ++k) {
          const double c = std::clamp(center[k], cell.lo[k], cell.hi[k]) - center[k];
          d2 += c * c;
        }
        return d2 <= radius_ * radius_;
      }
      case ShapeKind::box:
        for (int k = 0; k < dim_; ++k)
          if (cell.hi[k] < center[k] - half_[k] || cell.lo[k] > center[k] + half_[k]) return false;
        return true;
      case ShapeKind::polygon: {
        const Box bb = bounds();
        for (int k = 0; k < 2; ++k)
          if (cell.hi[k] < center[k] + bb.lo[k] || cell.lo[k] > center[k] + bb.hi[k]) return false;
        for (std::size_t e = 0; e < normals_.size(); ++e) {
          // separating axis along the edge normal
          double lo = std::numeric_limits<double>::infinity();
          for (unsigned m = 0; m < 4; ++m) lo = std::min(lo, dot(normals_[e], cell.corner(m) - center));
          if (lo > offsets_[e]) return false;
        }
        return true;
      }
    }
    return false;
  }

  /// Tight axis-aligned bounding box of the body (relative to its origin).
  Box bounds() const {
    switch (kind_) {
      case ShapeKind::ball:
        return Box::cube(dim_, -radius_, radius_);
      case ShapeKind::box:
        return {-half_, half_};
      case ShapeKind::polygon: {
        Box b = Box::cube(2, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity());
        for (const Vec& v : verts_)
          for (int k = 0; k < 2; ++k) {
            b.lo[k] = std::min(b.lo[k], v[k]);
            b.hi[k] = std::max(b.hi[k], v[k]);
          }
        return b;
      }
    }
    return {};
  }

  double volume() const {
    switch (kind_) {
      case ShapeKind::ball:
        return std::pow(std::numbers::pi, dim_ / 2.0) / std::tgamma(dim_ / 2.0 + 1.0) * std::pow(radius_, dim_);
      case ShapeKind::box: {
        double v = 1.0;
        for (int k = 0; k < dim_; ++k) v *= 2.0 * half_[k];
        return v;
      }
      case ShapeKind::polygon: {
        double a = 0.0;
        for (std::size_t i = 0; i < verts_.size(); ++i) {
          const Vec& p = verts_[i];
          const Vec& q = verts_[(i + 1) % verts_.size()];
          a += p[0] * q[1] - q[0] * p[1];
        }
        return 0.5 * a;
      }
    }
    return 0.0;
  }

  /// Largest Euclidean norm of a point of the body.
  double circumradius() const {
    switch (kind_) {
      case ShapeKind::ball:
        return radius_;
      case ShapeKind::box:
        return half_.norm();
      case ShapeKind::polygon: {
        double r = 0.0;
        for (const Vec& v : verts_) r = std::max(r, v.norm());
        return r;
      }
    }
    return 0.0;
  }

  /// Radius of the largest origin-centred ball inside the body.
  double inradius() const {
    switch (kind_) {
      case ShapeKind::ball:
        return radius_;
      case ShapeKind::box: {
        double r = half_[0];
        for (int k = 1; k < dim_; ++k) r = std::min(r, half_[k]);
        return r;
      }
      case ShapeKind::polygon:
        return *std::min_element(offsets_.begin(), offsets_.end());
    }
    return 0.0;
  }

  ConvexBody scaled(double s) const {
    switch (kind_) {
      case ShapeKind::ball:
        return ball(dim_, radius_ * s);
      case ShapeKind::box:
        return box(half_ * s);
      case ShapeKind::polygon: {
        std::vector<Vec> v = verts_;
        for (Vec& p : v) p *= s;
        return polygon(std::move(v));
      }
    }
    return *this;
  }

  /// body + (-body).
  ConvexBody difference_body() const {
    switch (kind_) {
      case ShapeKind::ball:
        return ball(dim_, 2.0 * radius_);
      case ShapeKind::box:
        return box(half_ * 2.0);
      case ShapeKind::polygon: {
        std::vector<Vec> pts;
        for (const Vec& a : verts_)
          for (const Vec& b : verts_) pts.push_back(a - b);
        return polygon(convex_hull_ccw(std::move(pts)));
      }
    }
    return *this;
  }

  /// Andrew's monotone chain; drops collinear points.
  static std::vector<Vec> convex_hull_ccw(std::vector<Vec> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) { return lex_less(a, b); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
      return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Vec> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
      h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
      while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
      h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
  }

 private:
  ShapeKind kind_ = ShapeKind::ball;
  int dim_ = 1;
  double radius_ = 0.0;
  Vec half_;
  std::vector<Vec> verts_;
  std::vector<Vec> normals_;
  std::vector<double> offsets_;
};

/// The packed solid S (centroid at the origin) together with its difference body.
class ConvexSolid {
 public:
  static ConvexSolid ball(int dim, double radius) { return ConvexSolid(ConvexBody::ball(dim, radius)); }
  static ConvexSolid box(const Vec& half_extents) { return ConvexSolid(ConvexBody::box(half_extents)); }

  /// Any convex polygon; vertex order is normalised and the area centroid moved to the origin.
  static ConvexSolid polygon(std::vector<Vec> vertices) {
    for (const Vec& v : vertices)
      if (v.dim() != 2) throw ValidationError("polygon vertices must be 2-dimensional");
    std::vector<Vec> hull = ConvexBody::convex_hull_ccw(vertices);
    if (hull.size() != vertices.size()) throw ValidationError("polygon vertices are not in convex position");
    double a = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vec& p = hull[i];
      const Vec& q = hull[(i + 1) % hull.size()];
      const double w = p[0] * q[1] - q[0] * p[1];
      a += w;
      cx += (p[0] + q[0]) * w;
      cy += (p[1] + q[1]) * w;
    }
    if (!(a > 0.0)) throw ValidationError("polygon has zero area");
    const Vec centroid{cx / (3.0 * a), cy / (3.0 * a)};
    double scale = 0.0;
    for (const Vec& v : hull) scale = std::max(scale, v.max_abs());
    // an already centred polygon is kept bit-for-bit so format and parse round trips are stable
    if (centroid.max_abs() > 1e-12 * scale)
      for (Vec& v : hull) v -= centroid;
    return ConvexSolid(ConvexBody::polygon(std::move(hull)));
  }

  explicit ConvexSolid(ConvexBody body)
      : body_(std::move(body)), diff_(body_.difference_body()), diameter_(diff_.circumradius()) {
    if (body_.kind() == ShapeKind::ball) diameter_ = 2.0 * body_.radius();
    if (body_.kind() == ShapeKind::box) diameter_ = 2.0 * body_.half_extents().norm();
  }

  int dim() const { return body_.dim(); }
  ShapeKind kind() const { return body_.kind(); }
  const ConvexBody& body() const { return body_; }
  const ConvexBody& difference() const { return diff_; }
  /// d_S; also the circumradius of the difference body.
  double diameter() const { return diameter_; }
  double volume() const { return body_.volume(); }
  /// Volume of the gauge ball of radius 1/2, i.e. |D| / 2^d.
  double half_gauge_ball_volume() const { return diff_.volume() / std::pow(2.0, dim()); }

 private:
  ConvexBody body_;
  ConvexBody diff_;
  double diameter_;
};

/// Gauge of D: sup{a >= 0 : (x + aS) and aS are disjoint}.
inline double gauge_norm(const Vec& x, const ConvexSolid& solid) {
  if (x.dim() != solid.dim()) throw ContractViolation("dimension mismatch in gauge_norm");
  return solid.difference().gauge(x);
}

/// Closed-set adjacency: (x + S) and (y + S) intersect.
inline bool overlaps(const Vec& x, const Vec& y, const ConvexSolid& solid) {
  if (x.dim() != solid.dim() || y.dim() != solid.dim()) throw ContractViolation("dimension mismatch in overlaps");
  return solid.difference().gauge(x - y) <= 1.0;
}

/// {y : gauge(y - center) <= radius}.
struct GaugeBall {
  Vec center;
  double radius = 0.0;
  const ConvexSolid* solid = nullptr;

  bool contains(const Vec& y) const { return gauge_norm(y - center, *solid) <= radius; }
  double volume() const { return std::pow(radius, solid->dim()) * solid->difference().volume(); }
};

namespace detail {

inline double box_surface(const Box& b) {
  const int d = b.dim();
  if (d == 1) return 2.0;
  double s = 0.0;
  for (int k = 0; k < d; ++k) {
    double f = 1.0;
    for (int j = 0; j < d; ++j)
      if (j != k) f *= b.side(j);
    s += 2.0 * f;
  }
  return s;
}

inline double unit_ball_volume(int d) { return std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1.0); }

// Area of the origin-centred disk of radius r inside {x <= X, y <= Y}.
inline double disk_quadrant_area(double r, double X, double Y) {
  if (X <= -r || Y <= -r) return 0.0;
  const double a = std::min(X, r);
  auto H = [r](double x) {  // antiderivative of sqrt(r^2 - x^2)
    x = std::clamp(x, -r, r);
    return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(x / r));
  };
  // integral over [u, v] ∩ [-r, a] of 2h or of Y + h
  auto two_h = [&](double u, double v) {
    v = std::min(v, a);
    return v > u ? 2.0 * (H(v) - H(u)) : 0.0;
  };
  auto y_plus_h = [&](double u, double v) {
    v = std::min(v, a);
    return v > u ? Y * (v - u) + H(v) - H(u) : 0.0;
  };
  if (Y >= r) return two_h(-r, r);
  const double sy = std::sqrt(std::max(0.0, r * r - Y * Y));
  if (Y >= 0.0) return two_h(-r, -sy) + y_plus_h(-sy, sy) + two_h(sy, r);
  return y_plus_h(-sy, sy);
}

// |disk(c, r) ∩ box| by inclusion-exclusion over quadrants.
inline double disk_box_area(double r, double cx, double cy, const Box& b) {
  auto clampr = [r](double v) { return std::clamp(v, -2.0 * r, 2.0 * r); };
  const double x0 = clampr(b.lo[0] - cx), x1 = clampr(b.hi[0] - cx);
  const double y0 = clampr(b.lo[1] - cy), y1 = clampr(b.hi[1] - cy);
  const double a = disk_quadrant_area(r, x1, y1) - disk_quadrant_area(r, x0, y1) - disk_quadrant_area(r, x1, y0) +
                   disk_quadrant_area(r, x0, y0);
  return std::clamp(a, 0.0, M_PI * r * r);
}

// |ball(c, r) ∩ box| in dimension d >= 2. d = 2 is closed form; higher d
// integrates (d-1)-dimensional slices over z = c + r sin(theta), which keeps the
// integrand smooth at the poles.
inline double ball_box_volume(int d, double r, const Vec& c, const Box& b, double rel_tol) {
  if (r <= 0.0) return 0.0;
  bool inside = true;
  for (int k = 0; k < d; ++k) {
    if (b.hi[k] <= c[k] - r || b.lo[k] >= c[k] + r) return 0.0;
    inside = inside && b.lo[k] <= c[k] - r && b.hi[k] >= c[k] + r;
  }
  if (inside) return unit_ball_volume(d) * std::pow(r, d);
  if (d == 2) return disk_box_area(r, c[0], c[1], b);
  const int last = d - 1;
  Vec cs(last);
  Box bs{Vec(last), Vec(last)};
  for (int k = 0; k < last; ++k) {
    cs[k] = c[k];
    bs.lo[k] = b.lo[k];
    bs.hi[k] = b.hi[k];
  }
  const double t0 = std::asin(std::clamp((b.lo[last] - c[last]) / r, -1.0, 1.0));
  const double t1 = std::asin(std::clamp((b.hi[last] - c[last]) / r, -1.0, 1.0));
  auto slice = [&](double t) {
    const double rho = r * std::cos(t);
    return ball_box_volume(last, rho, cs, bs, rel_tol * 0.1) * rho;
  };
  return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(slice, t0, t1, 20, rel_tol);
}

// Convex polygon ∩ box by Sutherland-Hodgman clipping, then the shoelace formula.
inline double polygon_box_area(const std::vector<Vec>& verts, const Vec& c, const Box& b) {
  std::vector<std::array<double, 2>> poly;
  for (const Vec& v : verts) poly.push_back({v[0] + c[0], v[1] + c[1]});
  for (int k = 0; k < 2 && !poly.empty(); ++k)
    for (int side = 0; side < 2 && !poly.empty(); ++side) {
      const double bound = side == 0 ? b.lo[k] : b.hi[k];
      auto in = [&](const std::array<double, 2>& p) { return side == 0 ? p[k] >= bound : p[k] <= bound; };
      std::vector<std::array<double, 2>> out;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        if (in(p)) out.push_back(p);
        if (in(p) != in(q)) {
          const double t = (bound - p[k]) / (q[k] - p[k]);
          std::array<double, 2> x{p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
          x[k] = bound;
          out.push_back(x);
        }
      }
      poly = std::move(out);
    }
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return std::max(0.0, 0.5 * a);
}

}  // namespace detail

/// |(center + S) ∩ box|. Exact for d = 1, boxes, polygons and disks; balls in
/// d >= 3 integrate slices adaptively to relative error tol.
inline double clipped_volume(const ConvexSolid& solid, const Vec& center, const Box& box, double tol) {
  if (!(tol > 0.0)) throw ContractViolation("clipped_volume: tol must be positive");
  if (center.dim() != solid.dim() || box.dim() != solid.dim()) throw ContractViolation("dimension mismatch in clipped_volume");
  const ConvexBody& s = solid.body();
  Box sb = s.bounds();
  sb.lo += center;
  sb.hi += center;
  const Box k = sb.intersect(box);
  if (k.empty()) return 0.0;
  if (box.contains(sb)) return solid.volume();
  if (s.kind() == ShapeKind::box || solid.dim() == 1) return k.volume();
  if (s.kind() == ShapeKind::polygon) return detail::polygon_box_area(s.vertices(), center, box);
  return detail::ball_box_volume(solid.dim(), s.radius(), center, box, tol);
}

// ---------------------------------------------------------------------------
// Solid string grammar:
//   ball d=<int> r=<float>
//   box d=<int> h=<float,...>      (one value is broadcast to every axis)
//   poly2 v=<x1,y1;x2,y2;...>

namespace detail {

inline std::vector<double> parse_doubles(const std::string& s, char sep, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("solid spec: cannot parse number '" + item + "' in " + what);
    }
  }
  return out;
}

}  // namespace detail

inline ConvexSolid parse_solid(const std::string& spec) {
  std::stringstream ss(spec);
  std::string kind;
  ss >> kind;
  std::string tok;
  int d = 0;
  std::string r, h, v;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ValidationError("solid spec: expected key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "d") {
      try {
        d = std::stoi(val);
      } catch (const std::exception&) {
        throw ValidationError("solid spec: d must be an integer");
      }
    } else if (key == "r")
      r = val;
    else if (key == "h")
      h = val;
    else if (key == "v")
      v = val;
    else
      throw ValidationError("solid spec: unknown key '" + key + "' (accepted: d, r, h, v)");
  }
  if (kind == "ball") {
    if (d < 1 || d > kMaxDim) throw ValidationError("solid spec: ball needs d in [1," + std::to_string(kMaxDim) + "]");
    const auto rs = detail::parse_doubles(r, ',', "r");
    if (rs.size() != 1) throw ValidationError("solid spec: ball needs exactly one r");
    return ConvexSolid::ball(d, rs[0]);
  }
  if (kind == "box") {
    if (d < 1 || d > kMaxDim) throw ValidationError("solid spec: box needs d in [1," + std::to_string(kMaxDim) + "]");
    auto hs = detail::parse_doubles(h, ',', "h");
    if (hs.size() == 1) hs.assign(d, hs[0]);
    if (static_cast<int>(hs.size()) != d) throw ValidationError("solid spec: box needs 1 or d half-extents");
    Vec half(d);
    for (int k = 0; k < d; ++k) half[k] = hs[k];
    return ConvexSolid::box(half);
  }
  if (kind == "poly2") {
    std::vector<Vec> verts;
    std::stringstream vs(v);
    std::string pair;
    while (std::getline(vs, pair, ';')) {
      const auto xy = detail::parse_doubles(pair, ',', "v");
      if (xy.size() != 2) throw ValidationError("solid spec: poly2 vertices are x,y pairs");
      verts.push_back(Vec{xy[0], xy[1]});
    }
    return ConvexSolid::polygon(std::move(verts));
  }
  throw ValidationError("solid spec: unknown shape '" + kind + "' (accepted: ball, box, poly2)");
}

inline std::string format_solid(const ConvexSolid& s) {
  std::ostringstream os;
  os.precision(17);
  const ConvexBody& b = s.body();
  switch (b.kind()) {
    case ShapeKind::ball:
      os << "ball d=" << b.dim() << " r=" << b.radius();
      break;
    case ShapeKind::box:
      os << "box d=" << b.dim() << " h=";
      for (int k = 0; k < b.dim(); ++k) os << (k ? "," : "") << b.half_extents()[k];
      break;
    case ShapeKind::polygon:
      os << "poly2 v=";
      for (std::size_t i = 0; i < b.vertices().size(); ++i)
        os << (i ? ";" : "") << b.vertices()[i][0] << "," << b.vertices()[i][1];
      break;
  }
  return os.str();
}

}  // namespace jamlab
