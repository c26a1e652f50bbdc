#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <string>

#include "jamlab/errors.hpp"

namespace jamlab {

inline constexpr int kMaxDim = 4;

/// Small fixed-capacity vector in R^d, 1 <= d <= kMaxDim.
class Vec {
 public:
  Vec() = default;
  explicit Vec(int dim, double fill = 0.0) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) throw ContractViolation("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    c_.fill(0.0);
    for (int k = 0; k < dim; ++k) c_[k] = fill;
  }
  Vec(std::initializer_list<double> xs) : Vec(static_cast<int>(xs.size())) {
    int k = 0;
    for (double x : xs) c_[k++] = x;
  }

  int dim() const { return dim_; }
  double& operator[](int k) { return c_[k]; }
  double operator[](int k) const { return c_[k]; }

  Vec& operator+=(const Vec& o) {
    check_same(o);
    for (int k = 0; k < dim_; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    check_same(o);
    for (int k = 0; k < dim_; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int k = 0; k < dim_; ++k) c_[k] *= s;
    return *this;
  }

  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator-(Vec a) { return a *= -1.0; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator*(double s, Vec a) { return a *= s; }

  friend bool operator==(const Vec& a, const Vec& b) {
    if (a.dim_ != b.dim_) return false;
    for (int k = 0; k < a.dim_; ++k)
      if (a.c_[k] != b.c_[k]) return false;
    return true;
  }

  /// Lexicographic order on coordinates (the tie-breaker for equal time marks).
  friend bool lex_less(const Vec& a, const Vec& b) {
    for (int k = 0; k < a.dim_; ++k) {
      if (a.c_[k] < b.c_[k]) return true;
      if (a.c_[k] > b.c_[k]) return false;
    }
    return false;
  }

  double norm2() const {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s += c_[k] * c_[k];
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }
  double max_abs() const {
    double m = 0.0;
    for (int k = 0; k < dim_; ++k) m = std::max(m, std::abs(c_[k]));
    return m;
  }

  void check_same(const Vec& o) const {
    if (o.dim_ != dim_) throw ContractViolation("dimension mismatch: " + std::to_string(dim_) + " vs " + std::to_string(o.dim_));
  }

 private:
  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

inline double dot(const Vec& a, const Vec& b) {
  a.check_same(b);
  double s = 0.0;
  for (int k = 0; k < a.dim(); ++k) s += a[k] * b[k];
  return s;
}

inline double distance(const Vec& a, const Vec& b) { return (a - b).norm(); }

/// Axis-aligned box [lo, hi]. Containment is closed unless stated otherwise.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec l, Vec h) : lo(l), hi(h) { lo.check_same(hi); }

  static Box cube(int dim, double a, double b) { return {Vec(dim, a), Vec(dim, b)}; }
  static Box everything(int dim) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Vec(dim, -inf), Vec(dim, inf)};
  }

  int dim() const { return lo.dim(); }
  double side(int k) const { return hi[k] - lo[k]; }
  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= std::max(0.0, side(k));
    return v;
  }
  bool empty() const {
    for (int k = 0; k < dim(); ++k)
      if (!(hi[k] > lo[k])) return true;
    return false;
  }
  bool contains(const Vec& p) const {
    lo.check_same(p);
    for (int k = 0; k < dim(); ++k)
      if (p[k] < lo[k] || p[k] > hi[k]) return false;
    return true;
  }
  /// [lo, hi) membership, used by indicator test functions so adjacent boxes partition space.
  bool contains_half_open(const Vec& p) const {
    lo.check_same(p);
    for (int k = 0; k < dim(); ++k)
      if (p[k] < lo[k] || !(p[k] < hi[k])) return false;
    return true;
  }
  bool contains(const Box& b) const {
    for (int k = 0; k < dim(); ++k)
      if (b.lo[k] < lo[k] || b.hi[k] > hi[k]) return false;
    return true;
  }
  bool intersects(const Box& b) const {
    for (int k = 0; k < dim(); ++k)
      if (b.hi[k] < lo[k] || b.lo[k] > hi[k]) return false;
    return true;
  }
  Box intersect(const Box& b) const {
    Box r = *this;
    for (int k = 0; k < dim(); ++k) {
      r.lo[k] = std::max(lo[k], b.lo[k]);
      r.hi[k] = std::min(hi[k], b.hi[k]);
    }
    return r;
  }
  Box dilate(double r) const {
    Box b = *this;
    for (int k = 0; k < dim(); ++k) {
      b.lo[k] -= r;
      b.hi[k] += r;
    }
    return b;
  }
  Vec center() const { return (lo + hi) * 0.5; }
  Vec corner(unsigned mask) const {
    Vec c = lo;
    for (int k = 0; k < dim(); ++k)
      if (mask & (1u << k)) c[k] = hi[k];
    return c;
  }
  unsigned corner_count() const { return 1u << dim(); }
};

}  // namespace jamlab
