#pragma once

// Empirical stabilization radii. Two estimators:
//  * perturbation: keep the arrivals inside B_L(i), resample everything
//    outside, and check whether the packing seen from the window i + [0,1]^d
//    changes;
//  * causal diameter: diameter of the cube cluster reachable backwards in
//    time through causally relevant arrivals.
// Plus local strong saturation times of unit cubes and a log-linear tail fit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "jamlab/engine.hpp"
#include "jamlab/errors.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/packing_state.hpp"
#include "jamlab/rng.hpp"
#include "jamlab/spacetime.hpp"
#include "jamlab/stats.hpp"
#include "jamlab/vacancy.hpp"

namespace jamlab {

inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- unit cubes

/// Integer index j of the unit cube C_j = j + [0,1)^d.
struct CubeIndex {
  std::array<std::int64_t, kMaxDim> c{};
  int dim = 0;

  CubeIndex() = default;
  explicit CubeIndex(const std::vector<std::int64_t>& v) : dim(static_cast<int>(v.size())) {
    if (dim < 1 || dim > kMaxDim) throw ContractViolation("cube index dimension out of range");
    for (int k = 0; k < dim; ++k) c[k] = v[k];
  }

  friend bool operator<(const CubeIndex& a, const CubeIndex& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    for (int k = 0; k < a.dim; ++k)
      if (a.c[k] != b.c[k]) return a.c[k] < b.c[k];
    return false;
  }
  friend bool operator==(const CubeIndex& a, const CubeIndex& b) { return !(a < b) && !(b < a); }

  Vec corner() const {
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = static_cast<double>(c[k]);
    return v;
  }
  Box box() const {
    Box b{corner(), corner()};
    for (int k = 0; k < dim; ++k) b.hi[k] += 1.0;
    return b;
  }
  /// C_j^+ : the 3^d cubes at sup-distance <= 1 from j.
  Box plus_box() const { return box().dilate(1.0); }
  std::vector<CubeIndex> neighbours() const {
    std::vector<CubeIndex> out;
    std::int64_t off[kMaxDim];
    for (int k = 0; k < dim; ++k) off[k] = -1;
    for (;;) {
      CubeIndex n = *this;
      for (int k = 0; k < dim; ++k) n.c[k] += off[k];
      out.push_back(n);
      int k = 0;
      while (k < dim && ++off[k] > 1) {
        off[k] = -1;
        ++k;
      }
      if (k == dim) break;
    }
    return out;
  }
  std::string str() const {
    std::string s = "(";
    for (int k = 0; k < dim; ++k) s += (k ? "," : "") + std::to_string(c[k]);
    return s + ")";
  }
};

inline CubeIndex cube_of(const Vec& x) {
  CubeIndex j;
  j.dim = x.dim();
  for (int k = 0; k < x.dim(); ++k) j.c[k] = static_cast<std::int64_t>(std::floor(x[k]));
  return j;
}

/// Cubes of Q = [0, side)^d.
inline std::vector<CubeIndex> cubes_of_region(const Box& q) {
  std::vector<CubeIndex> out;
  const int d = q.dim();
  std::int64_t lo[kMaxDim], hi[kMaxDim];
  for (int k = 0; k < d; ++k) {
    lo[k] = static_cast<std::int64_t>(std::floor(q.lo[k]));
    hi[k] = static_cast<std::int64_t>(std::ceil(q.hi[k])) - 1;
  }
  CubeIndex j;
  j.dim = d;
  for (int k = 0; k < d; ++k) j.c[k] = lo[k];
  for (;;) {
    out.push_back(j);
    int k = 0;
    while (k < d && ++j.c[k] > hi[k]) {
      j.c[k] = lo[k];
      ++k;
    }
    if (k == d) break;
  }
  return out;
}

// ---------------------------------------------------------------- coverage

/// A point of `box` adjacent to none of `centers`, or nothing if the box is
/// fully packed. Exact in d = 1; in d >= 2 "fully packed" means the vacancy
/// tree bound fell below eps * |box| without finding a vacant point.
inline std::optional<Vec> vacant_point(const ConvexSolid& solid, const std::vector<Vec>& centers, const Box& box,
                                       double eps = 1e-9, std::uint64_t seed = 1) {
  const Box near = box.dilate(solid.diameter());
  std::vector<Vec> rel;
  for (const Vec& c : centers)
    if (near.contains(c)) rel.push_back(c);
  PackingState frozen(solid, box, rel);
  Rng rng(seed);
  auto vac = make_vacancy(frozen, eps);
  VacancyDraw d = vac->sample(rng, eps, 10'000'000);
  return d.point;
}

// ---------------------------------------------------------------- local strong saturation

struct LocalSaturation {
  double time = kInfiniteRadius;  // T_i, infinite if never reached within the input
  bool exact = true;              // every subset of moat points was examined
  std::size_t moat_points = 0;    // moat points with mark <= time (or all, if never)
  std::uint64_t packings = 0;     // subset packings evaluated
};

namespace detail {

inline bool packs_cube(const ConvexSolid& solid, const Box& region, const Box& cube, const std::vector<SpaceTimePoint>& seq,
                       double eps) {
  PackingState st(solid, region);
  for (const auto& p : seq) st.try_accept(p);
  std::vector<Vec> acc;
  for (const auto& p : st.accepted()) acc.push_back(p.position);
  return !vacant_point(solid, acc, cube, eps).has_value();
}

}  // namespace detail

/// Smallest arrival time t such that, for every subset eta of the moat points
/// (C_i^+ minus C_i) with mark <= t, packing the points of C_i with mark <= t
/// together with eta covers C_i. Beyond `subset_budget` moat points only the
/// empty and the full subset are tried and the result is a lower bound.
inline LocalSaturation local_saturation_time(const CubeIndex& i, const std::vector<SpaceTimePoint>& input,
                                             const ConvexSolid& solid, std::size_t subset_budget = 10,
                                             double eps = 1e-9) {
  if (i.dim != solid.dim()) throw ContractViolation("cube and solid dimensions differ");
  if (subset_budget > 24) throw ContractViolation("subset budget above 24 is not supported");
  const Box cube = i.box();
  const Box plus = i.plus_box();
  std::vector<SpaceTimePoint> inside, moat, all;
  for (const auto& p : input) {
    if (!plus.contains_half_open(p.position)) continue;
    all.push_back(p);
    (cube.contains_half_open(p.position) ? inside : moat).push_back(p);
  }
  auto by_time = [](const SpaceTimePoint& a, const SpaceTimePoint& b) { return arrives_before(a, b); };
  std::sort(inside.begin(), inside.end(), by_time);
  std::sort(moat.begin(), moat.end(), by_time);
  std::sort(all.begin(), all.end(), by_time);

  LocalSaturation out;
  std::size_t ni = 0, nm = 0;
  std::vector<SpaceTimePoint> seq;
  for (const auto& cand : all) {
    const double t = cand.time;
    while (ni < inside.size() && inside[ni].time <= t) ++ni;
    while (nm < moat.size() && moat[nm].time <= t) ++nm;
    const bool exhaustive = nm <= subset_budget;
    std::vector<std::uint64_t> masks;
    if (exhaustive) {
      for (std::uint64_t m = 0; m < (std::uint64_t{1} << nm); ++m) masks.push_back(m);
    } else {
      masks = {0, ~std::uint64_t{0}};
    }
    bool ok = true;
    for (std::uint64_t m : masks) {
      seq.assign(inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(ni));
      for (std::size_t k = 0; k < nm; ++k)
        if (m == ~std::uint64_t{0} || (m >> k) & 1u) seq.push_back(moat[k]);
      std::sort(seq.begin(), seq.end(), by_time);
      ++out.packings;
      if (!detail::packs_cube(solid, plus, cube, seq, eps)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.time = t;
      out.exact = exhaustive;
      out.moat_points = nm;
      return out;
    }
  }
  out.moat_points = moat.size();
  out.exact = moat.size() <= subset_budget;
  return out;
}

// ---------------------------------------------------------------- causal clusters

/// Arrivals with causal-relevance flags. An arrival in cube j is relevant
/// unless cube j reached local strong saturation by T_star and the arrival
/// came later. Edges (y,s) -> (x,t) join relevant arrivals with
/// |y - x| <= 2 d_S and s < t; they are generated on demand.
class CausalGraph {
 public:
  CausalGraph(std::vector<SpaceTimePoint> input, const ConvexSolid& solid, double t_star,
              const std::map<CubeIndex, bool>& cube_saturated)
      : points_(std::move(input)), reach_(2.0 * solid.diameter()), t_star_(t_star) {
    for (std::size_t k = 1; k < points_.size(); ++k)
      if (arrives_before(points_[k], points_[k - 1]))
        throw ContractViolation("causal graph input must be sorted by arrival");
    relevant_.resize(points_.size());
    for (std::size_t k = 0; k < points_.size(); ++k) {
      auto it = cube_saturated.find(cube_of(points_[k].position));
      const bool sat = it != cube_saturated.end() && it->second;
      relevant_[k] = !sat || points_[k].time <= t_star_;
      cells_[key(points_[k].position)].push_back(k);
    }
  }

  const std::vector<SpaceTimePoint>& points() const { return points_; }
  bool relevant(std::size_t k) const { return relevant_[k]; }
  double t_star() const { return t_star_; }

  /// Relevant arrivals with an edge into point k.
  template <class F>
  void predecessors(std::size_t k, F&& f) const {
    const Vec& x = points_[k].position;
    const int d = x.dim();
    std::array<std::int64_t, kMaxDim> base{}, off{};
    const auto kx = key(x);
    for (int a = 0; a < d; ++a) {
      base[a] = kx[a];
      off[a] = -1;
    }
    for (;;) {
      std::array<std::int64_t, kMaxDim> c{};
      for (int a = 0; a < d; ++a) c[a] = base[a] + off[a];
      auto it = cells_.find(c);
      if (it != cells_.end())
        for (std::size_t j : it->second)
          if (relevant_[j] && points_[j].time < points_[k].time && distance(points_[j].position, x) <= reach_) f(j);
      int a = 0;
      while (a < d && ++off[a] > 1) {
        off[a] = -1;
        ++a;
      }
      if (a == d) break;
    }
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, kMaxDim>& a) const {
      std::uint64_t h = 0;
      for (auto v : a) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
      return static_cast<std::size_t>(h);
    }
  };
  std::array<std::int64_t, kMaxDim> key(const Vec& x) const {
    std::array<std::int64_t, kMaxDim> k{};
    for (int a = 0; a < x.dim(); ++a) k[a] = static_cast<std::int64_t>(std::floor(x[a] / reach_));
    return k;
  }

  std::vector<SpaceTimePoint> points_;
  double reach_;
  double t_star_;
  std::vector<bool> relevant_;
  std::unordered_map<std::array<std::int64_t, kMaxDim>, std::vector<std::size_t>, KeyHash> cells_;
};

struct CausalCluster {
  std::vector<std::size_t> members;  // indices into the graph's points, ascending
  std::set<CubeIndex> cubes;         // union of C_j^+ over cubes j met by the members
};

/// Reverse breadth-first search from point `target` over relevant arrivals.
/// The target itself always belongs to its cluster.
inline CausalCluster causal_cluster(const CausalGraph& g, std::size_t target) {
  if (target >= g.points().size()) throw ContractViolation("causal_cluster: target index out of range");
  std::vector<bool> seen(g.points().size(), false);
  std::vector<std::size_t> stack{target};
  seen[target] = true;
  CausalCluster out;
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    out.members.push_back(k);
    g.predecessors(k, [&](std::size_t j) {
      if (!seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    });
  }
  std::sort(out.members.begin(), out.members.end());
  for (std::size_t k : out.members)
    for (const CubeIndex& n : cube_of(g.points()[k].position).neighbours()) out.cubes.insert(n);
  return out;
}

/// Largest Euclidean distance between points of the union of the unit cubes,
/// each clipped to `domain`.
inline double cube_union_diameter(const std::set<CubeIndex>& cubes, const Box& domain) {
  std::vector<Box> boxes;
  for (const CubeIndex& c : cubes) {
    Box b = c.box().intersect(domain);
    if (!b.empty()) boxes.push_back(b);
  }
  double best = 0.0;
  for (std::size_t a = 0; a < boxes.size(); ++a)
    for (std::size_t b = a; b < boxes.size(); ++b) {
      double s = 0.0;
      for (int k = 0; k < domain.dim(); ++k) {
        const double e = std::max(boxes[a].hi[k] - boxes[b].lo[k], boxes[b].hi[k] - boxes[a].lo[k]);
        s += e * e;
      }
      best = std::max(best, std::sqrt(s));
    }
  return best;
}

// ---------------------------------------------------------------- samples

enum class RadiusMethod { perturbation, causal_diameter };

inline const char* to_string(RadiusMethod m) {
  return m == RadiusMethod::perturbation ? "perturbation" : "causal_diameter";
}

struct StabilizationSample {
  CubeIndex center;
  double lambda = 0.0;
  double radius = kInfiniteRadius;  // R-hat; infinite when no grid radius passed
  RadiusMethod method = RadiusMethod::perturbation;
  std::size_t resamples = 0;
  double horizon = 0.0;
  double baseline_saturation_time = 0.0;
  std::uint64_t packings = 0;
  double t_star = 0.0;  // causal method only
};

// ---------------------------------------------------------------- perturbation estimator

namespace detail {

// A Poisson arrival stream of unit space-time intensity on one cell, drawn
// lazily in time order from its own counter-based generator, so the same
// seed gives the same arrivals however far the stream is read.
struct ArrivalStream {
  std::uint32_t cell = 0;
  std::uint8_t filter = 0;  // 0: keep all, 1: keep inside the ball, 2: keep outside
  std::uint64_t state = 0;
  double time = 0.0;
  Vec pos;

  double next_uniform() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  void advance(const Box& cell_box, double rate) {
    time += -std::log1p(-next_uniform()) / rate;
    pos = cell_box.lo;
    for (int k = 0; k < pos.dim(); ++k) pos[k] = cell_box.lo[k] + cell_box.side(k) * next_uniform();
  }
};

struct LazyRun {
  std::vector<Vec> window;       // accepted centers in the comparison window, sorted
  double saturation_time = 0.0;  // time of the last acceptance
  bool saturated = false;
};

struct LazyField {
  ConvexSolid solid;
  Box region;
  std::vector<Box> cells;
  std::vector<double> rates;

  LazyField(const ConvexSolid& s, const Box& q) : solid(s), region(q) {
    const int d = q.dim();
    const double w = s.diameter() / 4.0;
    std::int64_t n[kMaxDim];
    std::size_t total = 1;
    for (int k = 0; k < d; ++k) {
      n[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(q.side(k) / w)));
      total *= static_cast<std::size_t>(n[k]);
      if (total > 50'000'000) throw UnsupportedConfiguration("region too large for the perturbation estimator");
    }
    std::int64_t c[kMaxDim] = {0, 0, 0, 0};
    for (;;) {
      Box b = q;
      for (int k = 0; k < d; ++k) {
        b.lo[k] = q.lo[k] + static_cast<double>(c[k]) * w;
        b.hi[k] = std::min(q.hi[k], b.lo[k] + w);
      }
      cells.push_back(b);
      rates.push_back(b.volume());
      int k = 0;
      while (k < d && ++c[k] >= n[k]) {
        c[k] = 0;
        ++k;
      }
      if (k == d) break;
    }
  }

  // Every point of `b` lies in some closed translate near it. Checked by
  // splitting b into 2^d halves down to `depth` levels; a false answer only
  // means no certificate was found at that resolution.
  bool union_covers(const PackingState& st, const Box& b, int depth) const {
    bool single = false;
    st.visit_near(b, [&](const Vec& c) { single = single || solid.difference().covers_box(c, b); });
    if (single) return true;
    if (depth == 0) return false;
    bool any = false;
    st.visit_near(b, [&](const Vec& c) { any = any || solid.difference().intersects_box(c, b); });
    if (!any) return false;
    const int d = b.dim();
    for (int m = 0; m < (1 << d); ++m) {
      Box h = b;
      for (int k = 0; k < d; ++k) {
        const double mid = 0.5 * (b.lo[k] + b.hi[k]);
        if ((m >> k) & 1) h.lo[k] = mid;
        else h.hi[k] = mid;
      }
      if (!union_covers(st, h, depth - 1)) return false;
    }
    return true;
  }

  /// Packs the arrivals of `streams` in time order up to `horizon` (unbounded
  /// if infinite) and returns the accepted centers inside `window`. In d >= 2
  /// the run also ends at the first time 2^k at which the region has no
  /// vacancy left at tolerance eps, the same saturation rule the engine uses.
  LazyRun run(std::vector<ArrivalStream> streams, const Vec& ball_center, double radius, const Box& window,
              double horizon, double eps) const {
    PackingState st(solid, region);
    const int d = region.dim();
    std::optional<IntervalVacancy> vac;
    if (d == 1) vac.emplace(st);
    const int depth = std::max(1, 9 / d);
    std::vector<std::uint64_t> checked_at(cells.size(), ~std::uint64_t{0});
    std::vector<char> dead(cells.size(), 0);
    double next_check = 1.0;
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::uint32_t s = 0; s < streams.size(); ++s) {
      streams[s].advance(cells[streams[s].cell], rates[streams[s].cell]);
      heap.emplace(streams[s].time, s);
    }
    LazyRun out;
    std::uint64_t index = 0;
    bool stopped = false;
    while (!heap.empty()) {
      auto [t, s] = heap.top();
      if (t > horizon) break;
      if (d > 1 && t > next_check) {
        while (next_check < t) next_check *= 2.0;
        std::vector<Vec> acc;
        for (const auto& p : st.accepted()) acc.push_back(p.position);
        if (!vacant_point(solid, acc, region, eps).has_value()) {
          stopped = true;
          break;
        }
      }
      heap.pop();
      ArrivalStream& a = streams[s];
      const Box& cb = cells[a.cell];
      if (d == 1) {
        if (!vac->meets(cb.lo[0], cb.hi[0])) continue;
      } else if (!dead[a.cell] && checked_at[a.cell] != index) {
        checked_at[a.cell] = index;
        dead[a.cell] = union_covers(st, cb, depth) ? 1 : 0;
      }
      if (dead[a.cell]) continue;
      const bool in_ball = distance(a.pos, ball_center) <= radius;
      const bool keep = a.filter == 0 || (a.filter == 1) == in_ball;
      if (keep && st.try_accept({a.pos, t, index})) {
        ++index;
        out.saturation_time = t;
        if (vac) vac->on_accept(a.pos);
      }
      a.advance(cb, rates[a.cell]);
      heap.emplace(a.time, s);
    }
    if (d == 1) {
      out.saturated = vac->exhausted(0.0);
    } else if (stopped || heap.empty()) {
      out.saturated = true;
    } else {
      std::vector<Vec> acc;
      for (const auto& p : st.accepted()) acc.push_back(p.position);
      out.saturated = !vacant_point(solid, acc, region, eps).has_value();
    }
    for (const auto& p : st.accepted())
      if (window.contains(p.position)) out.window.push_back(p.position);
    std::sort(out.window.begin(), out.window.end(), [](const Vec& x, const Vec& y) { return lex_less(x, y); });
    return out;
  }
};

inline double farthest_distance(const Box& b, const Vec& p) {
  double s = 0.0;
  for (int k = 0; k < p.dim(); ++k) {
    const double e = std::max(std::abs(b.lo[k] - p[k]), std::abs(b.hi[k] - p[k]));
    s += e * e;
  }
  return std::sqrt(s);
}

inline double nearest_distance(const Box& b, const Vec& p) {
  double s = 0.0;
  for (int k = 0; k < p.dim(); ++k) {
    const double e = std::max({b.lo[k] - p[k], 0.0, p[k] - b.hi[k]});
    s += e * e;
  }
  return std::sqrt(s);
}

}  // namespace detail

struct PerturbationOptions {
  std::vector<double> radii;  // ascending L grid
  std::size_t resamples = 20;
  double horizon = 1e9;
  double epsilon = 1e-6;  // saturation tolerance for d >= 2
};

/// Perturbation estimate of the stabilization radius at cube i for one
/// realization (fixed by `seed`). The arrivals inside B_L(i) are kept; those
/// outside are redrawn `resamples` times per radius. R-hat is the smallest
/// grid radius for which the accepted centers in i + [0,1]^d, widened by d_S,
/// never changed. Random resampling only explores typical outside
/// configurations, so R-hat is a lower bound for the worst-case radius.
inline StabilizationSample estimate_radius_perturbation(double lambda, const ConvexSolid& solid, const CubeIndex& i,
                                                        const PerturbationOptions& opt, std::uint64_t seed) {
  if (i.dim != solid.dim()) throw ContractViolation("cube and solid dimensions differ");
  if (opt.radii.empty()) throw ContractViolation("perturbation estimator needs a radius grid");
  for (std::size_t k = 1; k < opt.radii.size(); ++k)
    if (!(opt.radii[k] > opt.radii[k - 1])) throw ContractViolation("radius grid must be strictly ascending");
  if (opt.radii.front() < 0.0) throw ContractViolation("radii must be nonnegative");
  if (opt.resamples < 1) throw ContractViolation("at least one resample is needed");
  if (!(opt.horizon > 0.0)) throw ValidationError("horizon must be positive");

  const Box q = q_lambda(lambda, solid.dim());
  detail::LazyField field(solid, q);
  const Vec centre = i.corner();
  const Box window = i.box().dilate(solid.diameter());
  const std::size_t nc = field.cells.size();

  StabilizationSample out;
  out.center = i;
  out.lambda = lambda;
  out.method = RadiusMethod::perturbation;
  out.resamples = opt.resamples;
  out.horizon = opt.horizon;

  auto inside_seed = [&](std::size_t c) { return derive_seed(seed, "inside", c); };
  std::vector<detail::ArrivalStream> base(nc);
  for (std::size_t c = 0; c < nc; ++c) base[c] = {static_cast<std::uint32_t>(c), 0, inside_seed(c), 0.0, Vec(solid.dim())};

  // the baseline runs without truncation so the error can report its saturation time
  const double unbounded = solid.dim() == 1 ? kInfiniteRadius : opt.horizon;
  const detail::LazyRun baseline = field.run(base, centre, kInfiniteRadius, window, unbounded, opt.epsilon);
  ++out.packings;
  out.baseline_saturation_time = baseline.saturation_time;
  if (!baseline.saturated || baseline.saturation_time > opt.horizon)
    throw RunFailure(baseline.saturated
                         ? "horizon too small: baseline saturated at t = " + std::to_string(baseline.saturation_time) +
                               " > T_max = " + std::to_string(opt.horizon)
                         : "horizon too small: baseline not saturated by T_max = " + std::to_string(opt.horizon) +
                               " (last acceptance at t = " + std::to_string(baseline.saturation_time) + ")");

  for (std::size_t li = 0; li < opt.radii.size(); ++li) {
    const double L = opt.radii[li];
    std::vector<std::size_t> straddle, outside;
    for (std::size_t c = 0; c < nc; ++c) {
      if (detail::farthest_distance(field.cells[c], centre) <= L) continue;
      (detail::nearest_distance(field.cells[c], centre) > L ? outside : straddle).push_back(c);
    }
    if (straddle.empty() && outside.empty()) {
      out.radius = L;  // nothing outside the ball to resample
      return out;
    }
    bool stable = true;
    for (std::size_t k = 0; k < opt.resamples && stable; ++k) {
      const std::uint64_t rs = derive_seed(seed, "outside", li * 1'000'003ULL + k);
      std::vector<detail::ArrivalStream> streams;
      streams.reserve(nc + straddle.size());
      std::vector<std::uint8_t> kind(nc, 0);  // 0 inside, 1 straddle, 2 outside
      for (std::size_t c : straddle) kind[c] = 1;
      for (std::size_t c : outside) kind[c] = 2;
      for (std::size_t c = 0; c < nc; ++c) {
        const auto cell = static_cast<std::uint32_t>(c);
        const std::uint64_t fresh = derive_seed(rs, "cell", c);
        if (kind[c] == 0) {
          streams.push_back({cell, 0, inside_seed(c), 0.0, Vec(solid.dim())});
        } else if (kind[c] == 2) {
          streams.push_back({cell, 0, fresh, 0.0, Vec(solid.dim())});
        } else {
          streams.push_back({cell, 1, inside_seed(c), 0.0, Vec(solid.dim())});
          streams.push_back({cell, 2, fresh, 0.0, Vec(solid.dim())});
        }
      }
      const detail::LazyRun r = field.run(std::move(streams), centre, L, window, opt.horizon, opt.epsilon);
      ++out.packings;
      if (r.window != baseline.window) stable = false;
    }
    if (stable) {
      out.radius = L;
      return out;
    }
  }
  return out;
}

/// Fraction of samples with R-hat > L, for each L.
inline std::vector<double> tail_fractions(const std::vector<StabilizationSample>& samples, const std::vector<double>& radii) {
  if (samples.empty()) throw ContractViolation("tail_fractions needs samples");
  std::vector<double> tau;
  for (double L : radii) {
    std::size_t above = 0;
    for (const auto& s : samples)
      if (s.radius > L) ++above;
    tau.push_back(static_cast<double>(above) / static_cast<double>(samples.size()));
  }
  return tau;
}

// ---------------------------------------------------------------- causal estimator

struct CausalOptions {
  double horizon = 50.0;
  std::optional<double> t_star;  // default: 90th percentile of the cube saturation times
  std::size_t subset_budget = 8;
};

/// Causal-diameter estimate at cube i from an explicit Poisson input on
/// Q_lambda x [0, horizon]: the diameter of the union of cube clusters of all
/// arrivals in C_i.
inline StabilizationSample estimate_radius_causal(double lambda, const ConvexSolid& solid, const CubeIndex& i,
                                                  const CausalOptions& opt, std::uint64_t seed) {
  if (i.dim != solid.dim()) throw ContractViolation("cube and solid dimensions differ");
  if (!(opt.horizon > 0.0)) throw ValidationError("horizon must be positive");
  const Box q = q_lambda(lambda, solid.dim());
  Rng rng(seed);
  std::vector<SpaceTimePoint> input = poisson_spacetime(q, opt.horizon, 1.0, rng);

  const std::vector<CubeIndex> cubes = cubes_of_region(q);
  std::map<CubeIndex, std::vector<SpaceTimePoint>> by_cube;
  for (const auto& p : input) by_cube[cube_of(p.position)].push_back(p);
  StabilizationSample out;
  out.center = i;
  out.lambda = lambda;
  out.method = RadiusMethod::causal_diameter;
  out.horizon = opt.horizon;

  std::map<CubeIndex, double> times;
  std::vector<double> finite_times;
  for (const CubeIndex& j : cubes) {
    std::vector<SpaceTimePoint> local;
    for (const CubeIndex& n : j.neighbours()) {
      auto it = by_cube.find(n);
      if (it != by_cube.end()) local.insert(local.end(), it->second.begin(), it->second.end());
    }
    const LocalSaturation ls = local_saturation_time(j, local, solid, opt.subset_budget);
    out.packings += ls.packings;
    times[j] = ls.time;
    finite_times.push_back(ls.time);
  }
  std::sort(finite_times.begin(), finite_times.end());
  const double t_star = opt.t_star ? *opt.t_star
                                   : finite_times[static_cast<std::size_t>(std::ceil(0.9 * finite_times.size())) - 1];
  out.t_star = t_star;
  std::map<CubeIndex, bool> saturated;
  for (auto& [j, t] : times) saturated[j] = t <= t_star;

  const CausalGraph g(input, solid, t_star, saturated);
  std::set<CubeIndex> uni;
  bool any = false;
  for (std::size_t k = 0; k < g.points().size(); ++k) {
    if (!(cube_of(g.points()[k].position) == i)) continue;
    any = true;
    for (const CubeIndex& c : causal_cluster(g, k).cubes) uni.insert(c);
  }
  if (!any)
    for (const CubeIndex& n : i.neighbours()) uni.insert(n);
  out.radius = cube_union_diameter(uni, q);
  return out;
}

// ---------------------------------------------------------------- tail fit

struct TailFit {
  double slope = 0.0, intercept = 0.0, r_squared = 0.0;
  std::size_t points = 0;
  double curvature = 0.0;          // quadratic coefficient of log tau in L
  bool super_exponential = false;  // concave log-tail that a quadratic explains much better
};

/// Least squares of log tau-hat against L over grid points with 0 < tau-hat < 1.
inline TailFit fit_tail(const std::vector<double>& radii, const std::vector<double>& tau) {
  if (radii.size() != tau.size()) throw ContractViolation("fit_tail: radius and tail tables differ in length");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (tau[k] > 0.0 && tau[k] < 1.0) {
      x.push_back(radii[k]);
      y.push_back(std::log(tau[k]));
    }
  if (x.size() < 3)
    throw ValidationError("degenerate tail: only " + std::to_string(x.size()) +
                          " grid radii have 0 < tau_hat < 1 (need 3); widen or refine the L grid");
  const LinearFit lf = linear_fit(x, y);
  TailFit out{lf.slope, lf.intercept, lf.r2, x.size()};
  const auto qf = quadratic_fit(x, y);
  out.curvature = qf[2];
  const double floor = 1e-12 * static_cast<double>(x.size());
  out.super_exponential = qf[2] < 0.0 && lf.sse > floor && qf[3] < 0.5 * lf.sse;
  return out;
}

}  // namespace jamlab
