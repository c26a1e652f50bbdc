#pragma once

// Jamming-variability pipeline: a maximally packed Z^d-periodic set L, the
// counting inequality n3 < n1 - n2 that fixes the box size L0, the
// first-arrival races E_1, E_2, and the variance of N in [0, L0]^d
// conditioned on fixed obstacle sets outside the box.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jamlab/engine.hpp"
#include "jamlab/errors.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/parallel.hpp"
#include "jamlab/rng.hpp"
#include "jamlab/stats.hpp"

namespace jamlab {

// ---------------------------------------------------------------- periodic packed set

/// Generators of a packed set L = G + Z^d. "Packed" here means gauge distance
/// >= 1 between distinct points; beta_hat is the largest gauge distance from
/// a certification grid point to L, and beta_bound adds the Lipschitz slack
/// covering the space between grid points.
struct PeriodicPackedSet {
  ConvexSolid solid;
  std::vector<Vec> generators;  // in [0,1)^d
  double resolution = 0.0;
  double beta_hat = 0.0;
  double beta_bound = 0.0;

  int dim() const { return solid.dim(); }

  /// Gauge distance from x to L.
  double distance(const Vec& x) const {
    const int d = dim();
    Vec w = x;
    for (int k = 0; k < d; ++k) w[k] -= std::floor(w[k]);
    double best = std::numeric_limits<double>::infinity();
    const ConvexBody& D = solid.difference();
    for (const Vec& g : generators) {
      int off[kMaxDim];
      for (int k = 0; k < d; ++k) off[k] = -1;
      for (;;) {
        Vec v = w - g;
        for (int k = 0; k < d; ++k) v[k] -= off[k];
        best = std::min(best, D.gauge(v));
        int k = 0;
        while (k < d && ++off[k] > 1) {
          off[k] = -1;
          ++k;
        }
        if (k == d) break;
      }
    }
    return best;
  }

  /// Gauge distance from x to s * L.
  double scaled_distance(const Vec& x, double s) const { return s * distance(x * (1.0 / s)); }
};

namespace detail {

inline std::vector<Vec> torus_grid(int d, std::int64_t m) {
  std::vector<Vec> pts;
  std::int64_t c[kMaxDim] = {0, 0, 0, 0};
  for (;;) {
    Vec v(d);
    for (int k = 0; k < d; ++k) v[k] = static_cast<double>(c[k]) / static_cast<double>(m);
    pts.push_back(v);
    int k = 0;
    while (k < d && ++c[k] >= m) {
      c[k] = 0;
      ++k;
    }
    if (k == d) break;
  }
  return pts;
}

}  // namespace detail

/// Independent check of the packed and maximality claims; throws
/// ContractViolation naming the first failure.
inline void verify_periodic_set(const PeriodicPackedSet& L) {
  const int d = L.dim();
  const ConvexBody& D = L.solid.difference();
  for (std::size_t a = 0; a < L.generators.size(); ++a) {
    for (int k = 0; k < d; ++k)
      if (!(L.generators[a][k] >= 0.0 && L.generators[a][k] < 1.0))
        throw ContractViolation("generator " + std::to_string(a) + " lies outside [0,1)^d");
    for (std::size_t b = 0; b < L.generators.size(); ++b) {
      int off[kMaxDim];
      for (int k = 0; k < d; ++k) off[k] = -1;
      for (;;) {
        bool self = a == b;
        for (int k = 0; k < d; ++k) self = self && off[k] == 0;
        if (!self) {
          Vec v = L.generators[a] - L.generators[b];
          for (int k = 0; k < d; ++k) v[k] += off[k];
          if (D.gauge(v) < 1.0)
            throw ContractViolation("periodic set not packed: generators " + std::to_string(a) + " and " +
                                    std::to_string(b) + " at gauge distance " + std::to_string(D.gauge(v)));
        }
        int k = 0;
        while (k < d && ++off[k] > 1) {
          off[k] = -1;
          ++k;
        }
        if (k == d) break;
      }
    }
  }
  if (!(L.beta_bound < 1.0)) throw ContractViolation("periodic set not certified maximal (beta bound " + std::to_string(L.beta_bound) + ")");
}

/// Greedy tightest-fit insertion on the unit torus: among grid points k / m at
/// gauge distance >= 1 from the current set, the closest one is added (ties go
/// to the first in lexicographic order) until none is left; the same grid then
/// certifies maximality. The grid is refined up to `max_refinements` times if
/// the Lipschitz slack is too large.
inline PeriodicPackedSet build_periodic_packed_set(const ConvexSolid& solid, double resolution, int max_refinements = 3) {
  if (!(2.0 * solid.diameter() < 1.0))
    throw ValidationError("periodic packed set needs 2 d_S < 1 (d_S = " + std::to_string(solid.diameter()) + ")");
  if (!(resolution > 0.0 && resolution < 1.0)) throw ValidationError("resolution must lie in (0, 1)");
  const int d = solid.dim();
  const double inr = solid.difference().inradius();
  auto m = static_cast<std::int64_t>(std::ceil(1.0 / resolution));
  for (int attempt = 0; attempt <= max_refinements; ++attempt, m *= 2) {
    if (std::pow(static_cast<double>(m), d) > 2e7) break;
    PeriodicPackedSet L{solid, {}, 1.0 / static_cast<double>(m), 0.0, 0.0};
    const auto grid = detail::torus_grid(d, m);
    std::vector<double> dist(grid.size(), std::numeric_limits<double>::infinity());
    std::size_t pick = 0;
    for (;;) {
      L.generators.push_back(grid[pick]);
      const PeriodicPackedSet one{solid, {grid[pick]}, 0.0, 0.0, 0.0};
      bool found = false;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < grid.size(); ++g) {
        dist[g] = std::min(dist[g], one.distance(grid[g]));
        if (dist[g] >= 1.0 && dist[g] < best) {
          best = dist[g];
          pick = g;
          found = true;
        }
      }
      if (!found) break;
    }
    const double beta = *std::max_element(dist.begin(), dist.end());
    // any point lies within half a grid diagonal of a grid point; gauge is
    // 1/inradius(D)-Lipschitz in the Euclidean norm
    const double slack = 0.5 * L.resolution * std::sqrt(static_cast<double>(d)) / inr;
    L.beta_hat = beta;
    L.beta_bound = beta + slack;
    if (L.beta_bound < 1.0) {
      verify_periodic_set(L);
      return L;
    }
  }
  throw RunFailure("resolution too coarse: maximality of the periodic set could not be certified");
}

// ---------------------------------------------------------------- counts

/// Largest delta with beta (1 + 6 delta) < 1 - 2 delta (exclusive bound).
inline double max_feasible_delta(double beta) { return (1.0 - beta) / (6.0 * beta + 2.0); }

inline void check_delta(double beta, double delta) {
  if (!(delta > 0.0) || !(beta * (1.0 + 6.0 * delta) < 1.0 - 2.0 * delta))
    throw ValidationError("delta = " + std::to_string(delta) + " is infeasible for beta_hat = " + std::to_string(beta) +
                          "; feasible range is (0, " + std::to_string(max_feasible_delta(beta)) + ")");
}

struct Counts {
  double L = 0.0;
  std::uint64_t n1 = 0, n2 = 0;
  std::uint64_t n3_bound = 0;
  bool separated() const { return n3_bound + n2 < n1; }
};

/// Number of points of s * (G + Z^d) in the closed box [-h, h]^d.
inline std::uint64_t count_scaled_in_box(const PeriodicPackedSet& L, double s, double h) {
  std::uint64_t total = 0;
  for (const Vec& g : L.generators) {
    std::uint64_t prod = 1;
    for (int k = 0; k < L.dim(); ++k) {
      // z with -h <= s (g + z) <= h
      auto lo = static_cast<std::int64_t>(std::ceil(-h / s - g[k]));
      auto hi = static_cast<std::int64_t>(std::floor(h / s - g[k]));
      while (s * (g[k] + static_cast<double>(lo - 1)) >= -h) --lo;
      while (s * (g[k] + static_cast<double>(lo)) < -h) ++lo;
      while (s * (g[k] + static_cast<double>(hi + 1)) <= h) ++hi;
      while (s * (g[k] + static_cast<double>(hi)) > h) --hi;
      prod *= hi >= lo ? static_cast<std::uint64_t>(hi - lo + 1) : 0;
    }
    total += prod;
  }
  return total;
}

/// n_i = #(1 + 3 i delta) L in Box(L - 4), Box(a) = [-a/2, a/2]^d; n3_bound is
/// the half-gauge-ball volume bound on packed subsets of Box(L) minus Box(L - 6).
inline Counts counts_n1_n2_n3(const PeriodicPackedSet& L, double delta, double side) {
  check_delta(L.beta_hat, delta);
  if (!(side > 6.0)) throw ValidationError("L too small: the shell Box(L) minus Box(L-6) needs L > 6 (got " + std::to_string(side) + ")");
  Counts c;
  c.L = side;
  const double h = (side - 4.0) / 2.0;
  c.n1 = count_scaled_in_box(L, 1.0 + 3.0 * delta, h);
  c.n2 = count_scaled_in_box(L, 1.0 + 6.0 * delta, h);
  const Box hb = L.solid.difference().bounds();
  double outer = 1.0, inner = 1.0;
  for (int k = 0; k < L.dim(); ++k) {
    const double rho = 0.5 * hb.hi[k];  // half-width of D/2 along axis k
    outer *= side + 2.0 * rho;
    inner *= std::max(0.0, side - 6.0 - 2.0 * rho);
  }
  // the ratio can be an exact integer (the bound is tight for rods); keep it from rounding down
  c.n3_bound = static_cast<std::uint64_t>(std::floor((outer - inner) / L.solid.half_gauge_ball_volume() * (1.0 + 1e-12)));
  return c;
}

/// Smallest integer L in [7, L_max] with n3_bound < n1 - n2.
inline Counts find_L0(const PeriodicPackedSet& L, double delta, double L_max) {
  for (double side = 7.0; side <= L_max; side += 1.0) {
    Counts c = counts_n1_n2_n3(L, delta, side);
    if (c.separated()) return c;
  }
  throw RunFailure("no L in [7, " + std::to_string(L_max) + "] satisfies n3 < n1 - n2; raise --Lmax or delta");
}

// ---------------------------------------------------------------- races

struct RaceSetup {
  std::uint64_t balls = 0;
  double ball_volume = 0.0;  // each ball
  double complement_volume = 0.0;
};

/// log P(every ball receives an arrival before the complement does):
/// with a = c / v this is log Gamma(n+1) + log Gamma(a+1) - log Gamma(n+a+1).
inline double race_log_probability(const RaceSetup& r) {
  if (r.complement_volume <= 0.0) return 0.0;
  if (r.balls == 0) return 0.0;
  const double n = static_cast<double>(r.balls);
  const double a = r.complement_volume / r.ball_volume;
  return std::lgamma(n + 1.0) + std::lgamma(a + 1.0) - std::lgamma(n + a + 1.0);
}

struct RaceEstimate {
  RaceSetup setup;
  // direct simulation of the arrival order
  std::uint64_t reps = 0, successes = 0;
  Interval direct;
  // conditional estimate: the first arrival time M in the last ball is drawn
  // under importance sampling and the complement is integrated out
  // (P(no complement arrival before M) = exp(-c M)); values in log10
  std::uint64_t is_reps = 0;
  double log10_p = -std::numeric_limits<double>::infinity();
  double log10_lo = -std::numeric_limits<double>::infinity();
  double log10_hi = -std::numeric_limits<double>::infinity();
  double log10_exact = 0.0;
  bool direct_resolved = false;  // the direct lower confidence bound is positive
  bool inconclusive = true;      // neither estimator certifies p > 0

  double log10_estimate() const { return direct_resolved ? std::log10(direct.estimate) : log10_p; }
};

/// Direct race: arrivals land in the complement with probability
/// c / (c + u v) while u balls are still empty.
inline bool simulate_race(const RaceSetup& r, Rng& rng) {
  std::uint64_t u = r.balls;
  while (u > 0) {
    const double c = r.complement_volume;
    const double uv = static_cast<double>(u) * r.ball_volume;
    if (rng.uniform01() * (c + uv) < c) return false;
    --u;
  }
  return true;
}

namespace detail {

inline double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng.engine()), y = gb(rng.engine());
  return x / (x + y);
}

inline double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace detail

/// Estimates the race probability two ways. The direct estimator doubles its
/// replication count (up to `max_reps`) until the Wilson lower bound is
/// positive. The conditional estimator writes Y = 1 - exp(-v M) for the
/// maximum M of the n ball arrival times, so Y ~ Beta(n, 1), and averages
/// (1 - Y)^(c/v) under a Beta(kappa n, kappa (c/v + 1)) proposal.
inline RaceEstimate estimate_race(const RaceSetup& r, std::uint64_t reps, std::uint64_t max_reps, std::uint64_t is_reps,
                                  Rng& rng, double kappa = 0.5) {
  if (reps < 1) throw ContractViolation("estimate_race needs reps >= 1");
  RaceEstimate e;
  e.setup = r;
  e.log10_exact = race_log_probability(r) / std::log(10.0);
  std::uint64_t target = reps;
  while (true) {
    while (e.reps < target) {
      if (simulate_race(r, rng)) ++e.successes;
      ++e.reps;
    }
    e.direct = wilson_interval(e.successes, e.reps);
    if (e.direct.lo > 0.0 || target >= max_reps) break;
    target = std::min(max_reps, target * 2);
  }
  e.direct_resolved = e.successes > 0 && e.direct.lo > 0.0;

  if (r.complement_volume <= 0.0 || r.balls == 0) {
    e.log10_p = e.log10_lo = e.log10_hi = 0.0;
    e.inconclusive = false;
    return e;
  }
  const double n = static_cast<double>(r.balls);
  const double a = r.complement_volume / r.ball_volume;
  const double pa = kappa * n, pb = kappa * (a + 1.0);
  const double log_norm_g = detail::log_beta_fn(pa, pb);
  std::vector<double> lw;
  for (std::uint64_t k = 0; k < is_reps; ++k) {
    const double y = detail::sample_beta(pa, pb, rng);
    if (!(y > 0.0 && y < 1.0)) continue;
    const double log_f = std::log(n) + (n - 1.0) * std::log(y);
    const double log_g = (pa - 1.0) * std::log(y) + (pb - 1.0) * std::log1p(-y) - log_norm_g;
    lw.push_back(log_f - log_g + a * std::log1p(-y));
  }
  e.is_reps = lw.size();
  if (lw.size() >= 2) {
    const double mx = *std::max_element(lw.begin(), lw.end());
    std::vector<double> w(lw.size());
    for (std::size_t k = 0; k < lw.size(); ++k) w[k] = std::exp(lw[k] - mx);
    const double m = mean(w);
    const double se = standard_error(w);
    const double ln10 = std::log(10.0);
    e.log10_p = (mx + std::log(m)) / ln10;
    e.log10_hi = (mx + std::log(m + 1.959963984540054 * se)) / ln10;
    const double lo = m - 1.959963984540054 * se;
    e.log10_lo = lo > 0.0 ? (mx + std::log(lo)) / ln10 : -std::numeric_limits<double>::infinity();
  }
  e.inconclusive = !e.direct_resolved && !std::isfinite(e.log10_lo);
  return e;
}

/// Race setups for E_1 and E_2: balls of gauge radius delta around the points
/// of L_i in Box(L - 4) against the rest of Box(L).
inline std::array<RaceSetup, 2> event_setups(const PeriodicPackedSet& L, double delta, double side) {
  const Counts c = counts_n1_n2_n3(L, delta, side);
  const double v = std::pow(delta, L.dim()) * L.solid.difference().volume();
  const double box = std::pow(side, L.dim());
  std::array<RaceSetup, 2> out;
  out[0] = {c.n1, v, std::max(0.0, box - static_cast<double>(c.n1) * v)};
  out[1] = {c.n2, v, std::max(0.0, box - static_cast<double>(c.n2) * v)};
  return out;
}

inline std::array<RaceEstimate, 2> estimate_event_probabilities(const PeriodicPackedSet& L, double delta, double side,
                                                                std::uint64_t reps, std::uint64_t max_reps,
                                                                std::uint64_t is_reps, Rng& rng) {
  const auto s = event_setups(L, delta, side);
  return {estimate_race(s[0], reps, max_reps, is_reps, rng), estimate_race(s[1], reps, max_reps, is_reps, rng)};
}

// ---------------------------------------------------------------- obstacle designs

/// Keeps candidates in order whenever they sit at gauge distance > 1 from
/// everything kept so far and outside the closed box [0, L]^d.
inline std::vector<Vec> admissible_filter(const std::vector<Vec>& candidates, const ConvexSolid& solid, double side) {
  const Box box = Box::cube(solid.dim(), 0.0, side);
  const Box domain = box.dilate(4.0 * solid.diameter() + 1.0);
  CenterGrid grid(domain, solid.diameter());
  std::vector<Vec> kept;
  const double r = solid.diameter();
  for (const Vec& c : candidates) {
    if (box.contains(c)) continue;
    const bool clash = grid.visit_until(Box{c - Vec(c.dim(), r), c + Vec(c.dim(), r)},
                                        [&](std::int32_t id) { return overlaps(c, kept[id], solid); });
    if (clash) continue;
    grid.insert(static_cast<std::int32_t>(kept.size()), c);
    kept.push_back(c);
  }
  return kept;
}

/// Face grids just outside each face of [0, L]^d, spaced slightly wider than
/// the support of D along each axis.
inline std::vector<Vec> lattice_ring(const ConvexSolid& solid, double side, double gap = 1e-3) {
  const int d = solid.dim();
  const Box hb = solid.difference().bounds();
  std::vector<Vec> cand;
  for (int f = 0; f < d; ++f)
    for (int sgn = 0; sgn < 2; ++sgn) {
      const double x0 = sgn == 0 ? -gap : side + gap;
      std::vector<std::vector<double>> axes(d);
      for (int k = 0; k < d; ++k) {
        if (k == f) {
          axes[k] = {x0};
          continue;
        }
        const double step = 1.0001 * hb.hi[k];
        for (double x = -gap; x <= side + gap + 1e-12; x += step) axes[k].push_back(x);
      }
      std::size_t idx[kMaxDim] = {0, 0, 0, 0};
      for (;;) {
        Vec v(d);
        for (int k = 0; k < d; ++k) v[k] = axes[k][idx[k]];
        cand.push_back(v);
        int k = 0;
        while (k < d && ++idx[k] >= axes[k].size()) {
          idx[k] = 0;
          ++k;
        }
        if (k == d) break;
      }
    }
  return admissible_filter(cand, solid, side);
}

/// Random candidates in the shell of width d_S around [0, L]^d, filtered greedily in draw order.
inline std::vector<Vec> random_ring(const ConvexSolid& solid, double side, std::uint64_t seed) {
  const int d = solid.dim();
  const Box box = Box::cube(d, 0.0, side);
  const Box outer = box.dilate(solid.diameter());
  const double shell = outer.volume() - box.volume();
  const auto n = static_cast<std::size_t>(std::ceil(8.0 * shell / solid.half_gauge_ball_volume()));
  Rng rng(seed);
  std::vector<Vec> cand;
  cand.reserve(n);
  while (cand.size() < n) {
    Vec v = uniform_in(outer, rng);
    if (!box.contains(v)) cand.push_back(v);
  }
  return admissible_filter(cand, solid, side);
}

/// x -> L - x in every coordinate.
inline std::vector<Vec> reflect(const std::vector<Vec>& eta, double side) {
  std::vector<Vec> out;
  for (const Vec& v : eta) {
    Vec w = v;
    for (int k = 0; k < w.dim(); ++k) w[k] = side - v[k];
    out.push_back(w);
  }
  return out;
}

struct EtaDesign {
  std::string id;
  std::vector<Vec> points;
};

/// Presets: "empty", "lattice", "random" (and "<name>-reflected" variants).
inline EtaDesign make_design(const std::string& name, const ConvexSolid& solid, double side, std::uint64_t seed) {
  std::string base = name;
  bool reflected = false;
  const std::string suffix = "-reflected";
  if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    base.resize(base.size() - suffix.size());
    reflected = true;
  }
  std::vector<Vec> pts;
  if (base == "empty") {
  } else if (base == "lattice") {
    pts = lattice_ring(solid, side);
  } else if (base == "random") {
    pts = random_ring(solid, side, derive_seed(seed, "eta", 0));
  } else {
    throw ValidationError("unknown design '" + name + "'; accepted: empty, lattice, random (optionally with -reflected)");
  }
  if (reflected) pts = reflect(pts, side);
  return {name, pts};
}

struct VarianceRow {
  std::string id;
  std::size_t eta_size = 0;
  std::size_t reps = 0;
  double mean = 0.0;
  Interval variance;  // sample variance with percentile bootstrap interval
  std::vector<double> counts;
};

/// Var N[[0, L]^d | eta] for each design, `reps` saturation runs per design.
inline std::vector<VarianceRow> conditional_variance_experiment(double side, const std::vector<EtaDesign>& designs,
                                                                const ConvexSolid& solid, std::size_t reps,
                                                                const SaturationOptions& opt, std::uint64_t seed,
                                                                double level = 0.95, int threads = 0) {
  if (reps < 2) throw ContractViolation("conditional variance needs at least two replications");
  std::vector<VarianceRow> rows;
  for (std::size_t di = 0; di < designs.size(); ++di) {
    const EtaDesign& des = designs[di];
    PackingState(solid, Box::cube(solid.dim(), 0.0, side), des.points);  // throws if eta is not admissible
    std::vector<double> counts(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
      Rng rng(derive_seed(seed, "variability:" + des.id, r));
      counts[r] = static_cast<double>(pack_with_boundary(side, des.points, solid, rng, opt).N());
    });
    VarianceRow row;
    row.id = des.id;
    row.eta_size = des.points.size();
    row.reps = reps;
    row.mean = mean(counts);
    Rng boot(derive_seed(seed, "bootstrap:" + des.id, 0));
    row.variance = bootstrap_variance_ci(counts, 2000, level, boot);
    row.counts = std::move(counts);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------- pipeline

struct VariabilityOptions {
  double resolution = 1.0 / 96.0;
  std::optional<double> delta;  // default: midpoint of the feasible interval
  double L_max = 400.0;
  std::size_t reps = 30;
  std::vector<std::string> designs{"empty", "lattice", "random"};
  std::uint64_t race_reps = 1000, race_max_reps = 1'000'000, race_is_reps = 4000;
  SaturationOptions saturation;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct VariabilityReport {
  PeriodicPackedSet lattice;
  double delta = 0.0;
  double delta_max = 0.0;
  Counts at_L0;
  std::vector<Counts> table;  // a few L values up to L0 for context
  std::array<RaceEstimate, 2> events;
  std::vector<VarianceRow> variance;
  double min_variance_lo = 0.0;  // smallest lower confidence bound across designs
};

inline VariabilityReport run_variability(const ConvexSolid& solid, const VariabilityOptions& opt) {
  VariabilityReport rep{build_periodic_packed_set(solid, opt.resolution)};
  rep.delta_max = max_feasible_delta(rep.lattice.beta_hat);
  rep.delta = opt.delta ? *opt.delta : 0.5 * rep.delta_max;
  check_delta(rep.lattice.beta_hat, rep.delta);
  rep.at_L0 = find_L0(rep.lattice, rep.delta, opt.L_max);
  const double L0 = rep.at_L0.L;
  for (double f : {0.25, 0.5, 0.75, 1.0, 1.5, 2.0}) {
    const double side = std::floor(f * L0);
    if (side > 6.0) rep.table.push_back(counts_n1_n2_n3(rep.lattice, rep.delta, side));
  }
  Rng race(derive_seed(opt.seed, "race", 0));
  rep.events = estimate_event_probabilities(rep.lattice, rep.delta, L0, opt.race_reps, opt.race_max_reps, opt.race_is_reps, race);
  std::vector<EtaDesign> designs;
  for (const auto& name : opt.designs) designs.push_back(make_design(name, solid, L0, opt.seed));
  rep.variance = conditional_variance_experiment(L0, designs, solid, opt.reps, opt.saturation, opt.seed, 0.95, opt.threads);
  rep.min_variance_lo = std::numeric_limits<double>::infinity();
  for (const auto& row : rep.variance) rep.min_variance_lo = std::min(rep.min_variance_lo, row.variance.lo);
  return rep;
}

}  // namespace jamlab
