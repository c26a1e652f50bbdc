#pragma once

// Replication harness and the small amount of statistics it needs: sample
// moments, KS distance to the normal law, Wilson and bootstrap intervals,
// chi-square homogeneity, least squares and Richardson extrapolation.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "jamlab/engine.hpp"
#include "jamlab/errors.hpp"
#include "jamlab/measures.hpp"
#include "jamlab/parallel.hpp"
#include "jamlab/rng.hpp"

namespace jamlab {

// ---------------------------------------------------------------- moments

namespace detail {

// Sums in sorted order so the result does not depend on replication order.
inline double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s);
}

}  // namespace detail

inline double mean(const std::vector<double>& x) {
  if (x.empty()) throw ContractViolation("mean of an empty sample");
  return detail::sorted_sum(x) / static_cast<double>(x.size());
}

/// Unbiased sample covariance. Pairs are sorted first, so the value is a
/// function of the multiset of pairs only.
inline double sample_covariance(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ContractViolation("sample_covariance: length mismatch");
  if (x.size() < 2) throw ContractViolation("sample_covariance needs at least two samples");
  std::vector<std::pair<double, double>> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = {x[i], y[i]};
  std::sort(p.begin(), p.end());
  long double sx = 0.0L, sy = 0.0L;
  for (auto& [a, b] : p) {
    sx += a;
    sy += b;
  }
  const long double n = static_cast<long double>(p.size());
  const long double mx = sx / n, my = sy / n;
  long double s = 0.0L;
  for (auto& [a, b] : p) s += (a - mx) * (b - my);
  return static_cast<double>(s / (n - 1.0L));
}

inline double sample_variance(const std::vector<double>& x) { return sample_covariance(x, x); }

inline double central_moment4(const std::vector<double>& x) {
  const double m = mean(x);
  std::vector<double> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q[i] = std::pow(x[i] - m, 4);
  return detail::sorted_sum(q) / static_cast<double>(x.size());
}

/// Standard error of the mean of per-replication values v (sd / sqrt(n)).
inline double standard_error(const std::vector<double>& v) {
  return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------- normal law

/// Standard normal CDF, Hart's double-precision rational approximation in the
/// form published by G. West (2005); absolute error below 1e-14.
inline double normal_cdf(double x) {
  const double a = std::abs(x);
  double c;
  if (a > 37.0) {
    c = 0.0;
  } else {
    const double e = std::exp(-a * a / 2.0);
    if (a < 7.07106781186547) {
      double b = 3.52624965998911e-02 * a + 0.700383064443688;
      b = b * a + 6.37396220353165;
      b = b * a + 33.912866078383;
      b = b * a + 112.079291497871;
      b = b * a + 221.213596169931;
      b = b * a + 220.206867912376;
      c = e * b;
      b = 8.83883476483184e-02 * a + 1.75566716318264;
      b = b * a + 16.064177579207;
      b = b * a + 86.7807322029461;
      b = b * a + 296.564248779674;
      b = b * a + 637.333633378831;
      b = b * a + 793.826512519948;
      b = b * a + 440.413735824752;
      c /= b;
    } else {
      double b = a + 0.65;
      b = a + 4.0 / b;
      b = a + 3.0 / b;
      b = a + 2.0 / b;
      b = a + 1.0 / b;
      c = e / b / 2.506628274631;
    }
  }
  return x > 0.0 ? 1.0 - c : c;
}

/// Standardizes by sample mean and sd; a constant sample maps to all zeros.
inline std::vector<double> standardize(const std::vector<double>& x) {
  const double m = mean(x);
  const double sd = x.size() >= 2 ? std::sqrt(sample_variance(x)) : 0.0;
  std::vector<double> z(x.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / sd;
  return z;
}

/// Kolmogorov-Smirnov distance between the empirical law of `z` and N(0,1).
inline double ks_normal(std::vector<double> z) {
  if (z.size() < 20) throw ContractViolation("ks_normal needs at least 20 samples, got " + std::to_string(z.size()));
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < z.size()) {
    std::size_t j = i;
    while (j + 1 < z.size() && z[j + 1] == z[i]) ++j;
    const double f = normal_cdf(z[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(j + 1) / n - f});
    i = j + 1;
  }
  return d;
}

// ---------------------------------------------------------------- intervals

struct Interval {
  double estimate = 0.0, lo = 0.0, hi = 0.0;
};

inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double z = 1.959963984540054) {
  if (n == 0) throw ContractViolation("wilson_interval with zero trials");
  if (successes > n) throw ContractViolation("wilson_interval: successes exceed trials");
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, centre + half);
  return {p, lo, hi};
}

/// Percentile bootstrap interval for the sample variance.
inline Interval bootstrap_variance_ci(const std::vector<double>& x, std::size_t resamples, double level, Rng& rng) {
  if (x.size() < 2) throw ContractViolation("bootstrap needs at least two samples");
  if (!(level > 0.0 && level < 1.0)) throw ContractViolation("confidence level must lie in (0,1)");
  std::vector<double> stats(resamples);
  std::vector<double> r(x.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& v : r) v = x[rng.below(static_cast<std::uint64_t>(x.size()))];
    stats[b] = sample_variance(r);
  }
  std::sort(stats.begin(), stats.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(resamples - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return k + 1 < resamples ? stats[k] * (1 - frac) + stats[k + 1] * frac : stats[k];
  };
  const double a = (1.0 - level) / 2.0;
  return {sample_variance(x), q(a), q(1.0 - a)};
}

// ---------------------------------------------------------------- chi-square

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::vector<std::pair<long, long>> bins;  // [first, last] value range per pooled bin
};

/// Two-sample homogeneity test on integer-valued samples. Adjacent values are
/// pooled until every bin has pooled expected count >= 5 in both samples.
inline ChiSquareResult chi_square_homogeneity(const std::vector<long>& a, const std::vector<long>& b) {
  if (a.empty() || b.empty()) throw ContractViolation("chi_square_homogeneity: empty sample");
  std::map<long, std::pair<double, double>> counts;
  for (long v : a) counts[v].first += 1;
  for (long v : b) counts[v].second += 1;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double n = na + nb;
  struct Bin {
    long first, last;
    double ca, cb;
  };
  std::vector<Bin> bins;
  Bin cur{0, 0, 0, 0};
  bool open = false;
  auto enough = [&](const Bin& x) {
    const double tot = x.ca + x.cb;
    return tot * na / n >= 5.0 && tot * nb / n >= 5.0;
  };
  for (auto& [v, c] : counts) {
    if (!open) cur = {v, v, 0, 0};
    open = true;
    cur.last = v;
    cur.ca += c.first;
    cur.cb += c.second;
    if (enough(cur)) {
      bins.push_back(cur);
      open = false;
    }
  }
  if (open) {
    if (bins.empty()) {
      bins.push_back(cur);
    } else {
      bins.back().last = cur.last;
      bins.back().ca += cur.ca;
      bins.back().cb += cur.cb;
    }
  }
  ChiSquareResult r;
  for (const auto& x : bins) {
    const double tot = x.ca + x.cb;
    const double ea = tot * na / n, eb = tot * nb / n;
    r.statistic += (x.ca - ea) * (x.ca - ea) / ea + (x.cb - eb) * (x.cb - eb) / eb;
    r.bins.emplace_back(x.first, x.last);
  }
  r.df = static_cast<int>(bins.size()) - 1;
  if (r.df <= 0) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.df);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

// ---------------------------------------------------------------- regression

struct LinearFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0, sse = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractViolation("linear_fit needs two or more (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ContractViolation("linear_fit: all x values are equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    f.sse += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - f.sse / syy : 1.0;
  return f;
}

/// Least-squares y = c0 + c1 x + c2 x^2; returns {c0, c1, c2, sse}.
inline std::array<double, 4> quadratic_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw ContractViolation("quadratic_fit needs three or more points");
  double m[3][4] = {};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p[3] = {1.0, x[i], x[i] * x[i]};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += p[r] * p[c];
      m[r][3] += p[r] * y[i];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    if (std::abs(m[c][c]) < 1e-300) throw ContractViolation("quadratic_fit: singular design");
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  std::array<double, 4> out{m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2], 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - out[0] - out[1] * x[i] - out[2] * x[i] * x[i];
    out[3] += e * e;
  }
  return out;
}

/// Limit estimate from two levels assuming error c * lambda^(-p).
inline double richardson(double lambda1, double m1, double lambda2, double m2, double p) {
  const double w1 = std::pow(lambda1, p), w2 = std::pow(lambda2, p);
  return (w2 * m2 - w1 * m1) / (w2 - w1);
}

// ---------------------------------------------------------------- replications

/// Per-replication seed: the master seed, an experiment tag, lambda and the
/// replication index hashed together with derive_seed.
inline std::uint64_t replication_seed(std::uint64_t master, const std::string& tag, double lambda, std::uint64_t rep) {
  return derive_seed(master ^ splitmix64(std::bit_cast<std::uint64_t>(lambda)), tag, rep);
}

struct RepSummary {
  std::uint64_t rep = 0;
  std::uint64_t seed = 0;
  std::size_t N = 0;
  double virtual_time = 0.0;
  double vacancy_bound = 0.0;
  double extra_solids_bound = 0.0;
  std::uint64_t probes = 0;
  bool guard_tripped = false;
  double wall_ms = 0.0;
  std::vector<double> point_integrals;   // one per test function
  std::vector<double> volume_integrals;  // empty unless requested
};

struct ReplicationPlan {
  double lambda = 1.0;
  ConvexSolid solid = ConvexSolid::ball(1, 0.5);
  SaturationOptions options;
  std::uint64_t seed = 0;
  std::string tag = "saturate";
  std::size_t reps = 1;
  std::vector<TestFunction> functions;
  bool volume = false;
  double quadrature_tol = 1e-6;
  int threads = 0;
};

/// Runs `reps` independent saturation packings of Q_lambda and integrates the
/// requested test functions against the rescaled measures. Results are
/// ordered by replication index regardless of thread scheduling.
inline std::vector<RepSummary> run_replications(const ReplicationPlan& plan) {
  std::vector<RepSummary> out(plan.reps);
  parallel_for(plan.reps, plan.threads, [&](std::size_t i) {
    RepSummary& r = out[i];
    r.rep = i;
    r.seed = replication_seed(plan.seed, plan.tag, plan.lambda, i);
    Rng rng(r.seed);
    const auto t0 = std::chrono::steady_clock::now();
    PackOutcome o = pack_to_saturation(plan.lambda, plan.solid, rng, plan.options);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    r.N = o.N();
    r.virtual_time = o.virtual_time;
    r.vacancy_bound = o.vacancy_bound;
    r.extra_solids_bound = o.extra_solids_bound;
    r.probes = o.probes;
    r.guard_tripped = o.guard_tripped;
    if (!plan.functions.empty()) {
      const auto pm = point_measure(o.state, plan.lambda);
      for (const auto& f : plan.functions) r.point_integrals.push_back(integrate_point(f, pm));
      if (plan.volume) {
        const auto vm = volume_measure(o.state, plan.lambda);
        for (const auto& f : plan.functions) r.volume_integrals.push_back(integrate_volume(f, vm, plan.quadrature_tol));
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
  double lambda = 0.0;
  std::size_t reps = 0;
  double mean_ratio = 0.0;  // mean N / lambda
  double var_ratio = 0.0;   // sample Var N / lambda
  double se_mean = 0.0;
  double se_var = 0.0;
  double ks = 0.0;  // NaN when reps < 20
  std::vector<double> counts;
  std::vector<double> standardized;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Aggregates replication counts at one lambda.
inline SweepRow summarize_counts(double lambda, const std::vector<double>& counts) {
  if (counts.size() < 2) throw ContractViolation("a sweep needs at least two replications per lambda");
  SweepRow row;
  row.lambda = lambda;
  row.reps = counts.size();
  row.counts = counts;
  const double n = static_cast<double>(counts.size());
  const double m = mean(counts);
  const double v = sample_variance(counts);
  row.mean_ratio = m / lambda;
  row.var_ratio = v / lambda;
  row.se_mean = std::sqrt(v / n) / lambda;
  row.se_var = std::sqrt(std::max(0.0, central_moment4(counts) - v * v) / n) / lambda;
  row.standardized = standardize(counts);
  row.ks = counts.size() >= 20 ? ks_normal(row.standardized) : std::nan("");
  return row;
}

inline SweepResult sweep_jamming(const std::vector<double>& lambda_grid, std::size_t reps, const ConvexSolid& solid,
                                 double epsilon, std::uint64_t seed, int threads = 0) {
  if (lambda_grid.empty()) throw ContractViolation("sweep: empty lambda grid");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (!(lambda_grid[i] > lambda_grid[i - 1])) throw ContractViolation("sweep: lambda grid must be strictly ascending");
  if (reps < 2) throw ContractViolation("sweep: reps must be at least 2");
  SweepResult res;
  for (double lambda : lambda_grid) {
    ReplicationPlan plan;
    plan.lambda = lambda;
    plan.solid = solid;
    plan.options.epsilon = epsilon;
    plan.seed = seed;
    plan.reps = reps;
    plan.threads = threads;
    std::vector<double> counts;
    for (const auto& r : run_replications(plan)) counts.push_back(static_cast<double>(r.N));
    res.rows.push_back(summarize_counts(lambda, counts));
  }
  return res;
}

// ---------------------------------------------------------------- covariance

struct CovarianceResult {
  std::vector<std::vector<double>> estimate;        // lambda^-1 sample covariance
  std::vector<std::vector<double>> standard_error;  // from per-replication influence values
  std::vector<std::vector<double>> integrals;       // [rep][function]
};

/// lambda^-1 Cov of the integrals; standard errors use the influence values
/// (a_r - mean a)(b_r - mean b) of the covariance estimator.
inline CovarianceResult covariance_from_integrals(const std::vector<std::vector<double>>& per_rep, double lambda) {
  if (per_rep.size() < 2) throw ContractViolation("covariance needs at least two replications");
  const std::size_t k = per_rep.front().size();
  std::vector<std::vector<double>> cols(k, std::vector<double>(per_rep.size()));
  for (std::size_t r = 0; r < per_rep.size(); ++r)
    for (std::size_t j = 0; j < k; ++j) cols[j][r] = per_rep[r][j];
  CovarianceResult res;
  res.integrals = per_rep;
  res.estimate.assign(k, std::vector<double>(k));
  res.standard_error.assign(k, std::vector<double>(k));
  std::vector<double> means(k);
  for (std::size_t j = 0; j < k; ++j) means[j] = mean(cols[j]);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      res.estimate[a][b] = sample_covariance(cols[a], cols[b]) / lambda;
      std::vector<double> infl(per_rep.size());
      for (std::size_t r = 0; r < per_rep.size(); ++r) infl[r] = (cols[a][r] - means[a]) * (cols[b][r] - means[b]);
      res.standard_error[a][b] = standard_error(infl) / lambda;
    }
  return res;
}

enum class MeasureKind { point, volume };

inline CovarianceResult covariance_experiment(const std::vector<TestFunction>& fs, double lambda, std::size_t reps,
                                              std::uint64_t seed, MeasureKind which, const ConvexSolid& solid,
                                              double epsilon = 1e-6, int threads = 0) {
  if (reps < 30) throw ContractViolation("covariance_experiment needs at least 30 replications");
  if (fs.empty()) throw ContractViolation("covariance_experiment needs at least one test function");
  ReplicationPlan plan;
  plan.lambda = lambda;
  plan.solid = solid;
  plan.options.epsilon = epsilon;
  plan.seed = seed;
  plan.reps = reps;
  plan.functions = fs;
  plan.volume = which == MeasureKind::volume;
  plan.threads = threads;
  std::vector<std::vector<double>> per_rep;
  for (auto& r : run_replications(plan)) per_rep.push_back(which == MeasureKind::volume ? r.volume_integrals : r.point_integrals);
  return covariance_from_integrals(per_rep, lambda);
}

// ---------------------------------------------------------------- rate fit

enum class RateStatus { pass, fail, inconclusive };

inline const char* to_string(RateStatus s) {
  switch (s) {
    case RateStatus::pass: return "pass";
    case RateStatus::fail: return "fail";
    default: return "inconclusive";
  }
}

struct RateFit {
  double exponent = std::nan("");
  double limit = std::nan("");        // extrapolated mu
  double assumed_order = 0.0;         // p used for the extrapolation
  bool noise_dominated = false;
  RateStatus status = RateStatus::inconclusive;
  LinearFit fit;
};

/// Fits |mean(lambda) - mu_hat| ~ C lambda^exponent. The extrapolation order
/// p is solved from the three largest grid points (falling back to 1/d when
/// they are not monotone), and mu_hat is the Richardson limit of the last two.
inline RateFit rate_fit(const SweepResult& sweep, int d) {
  const auto& rows = sweep.rows;
  if (rows.size() < 3) throw ContractViolation("rate_fit needs at least three grid points");
  const std::size_t n = rows.size();
  RateFit out;
  const double l1 = rows[n - 3].lambda, l2 = rows[n - 2].lambda, l3 = rows[n - 1].lambda;
  const double m1 = rows[n - 3].mean_ratio, m2 = rows[n - 2].mean_ratio, m3 = rows[n - 1].mean_ratio;
  double p = 1.0 / d;
  const double ratio = (m1 - m2) / (m2 - m3);
  if (std::isfinite(ratio) && ratio > 0.0) {
    auto g = [&](double q) {
      return (std::pow(l1, -q) - std::pow(l2, -q)) / (std::pow(l2, -q) - std::pow(l3, -q)) - ratio;
    };
    double lo = 1e-3, hi = 8.0;
    if (g(lo) * g(hi) < 0.0) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(lo) * g(mid) <= 0.0 ? hi : lo) = mid;
      }
      p = 0.5 * (lo + hi);
    }
  }
  out.assumed_order = p;
  out.limit = richardson(l2, m2, l3, m3, p);
  std::vector<double> x, y;
  for (const auto& r : rows) {
    const double diff = std::abs(r.mean_ratio - out.limit);
    if (diff <= 2.0 * r.se_mean) out.noise_dominated = true;
    if (diff > 0.0) {
      x.push_back(std::log(r.lambda));
      y.push_back(std::log(diff));
    }
  }
  if (x.size() >= 2) {
    out.fit = linear_fit(x, y);
    out.exponent = out.fit.slope;
  }
  if (out.noise_dominated || x.size() < 2)
    out.status = RateStatus::inconclusive;
  else
    out.status = out.exponent <= -1.0 / d + 0.25 ? RateStatus::pass : RateStatus::fail;
  return out;
}

}  // namespace jamlab
