#include <gtest/gtest.h>

#include <cmath>

#include "jamlab/variability.hpp"

using namespace jamlab;

namespace {

// gauge distance to G + Z^d by explicit enumeration of shifts in [-2, 2]^d
double lattice_distance_brute(const PeriodicPackedSet& L, const Vec& x) {
  const int d = L.dim();
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& g : L.generators) {
    int z[kMaxDim] = {-2, -2, -2, -2};
    for (;;) {
      Vec v = x - g;
      for (int k = 0; k < d; ++k) v[k] -= z[k];
      best = std::min(best, L.solid.difference().gauge(v));
      int k = 0;
      while (k < d && ++z[k] > 2) {
        z[k] = -2;
        ++k;
      }
      if (k == d) break;
    }
  }
  return best;
}

std::uint64_t count_brute(const PeriodicPackedSet& L, double s, double h) {
  const int d = L.dim();
  const int span = static_cast<int>(std::ceil(h / s)) + 2;
  std::uint64_t n = 0;
  for (const Vec& g : L.generators) {
    int z[kMaxDim] = {-span, -span, -span, -span};
    for (;;) {
      bool in = true;
      for (int k = 0; k < d; ++k) in = in && std::abs(s * (g[k] + z[k])) <= h;
      n += in ? 1 : 0;
      int k = 0;
      while (k < d && ++z[k] > span) {
        z[k] = -span;
        ++k;
      }
      if (k == d) break;
    }
  }
  return n;
}

const ConvexSolid& rod() {
  static const ConvexSolid s = ConvexSolid::ball(1, 1.0 / 6.0);
  return s;
}

const ConvexSolid& small_disk() {
  static const ConvexSolid s = ConvexSolid::ball(2, 0.1);
  return s;
}

}  // namespace

TEST(PeriodicSet, OneDimensionalRodsGiveThreeEquallySpacedGenerators) {
  const auto L = build_periodic_packed_set(rod(), 1.0 / 96.0);
  ASSERT_EQ(L.generators.size(), 3u);
  EXPECT_NEAR(L.generators[1][0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(L.generators[2][0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(L.beta_hat, 0.5, 1e-9);
  EXPECT_NO_THROW(verify_periodic_set(L));
}

TEST(PeriodicSet, DistanceAndBetaAgreeWithBruteForce) {
  for (const ConvexSolid& s : {small_disk(), ConvexSolid::box(Vec{0.12, 0.08}),
                               ConvexSolid::polygon({Vec{0, 0}, Vec{0.2, 0}, Vec{0.05, 0.18}})}) {
    const auto L = build_periodic_packed_set(s, 1.0 / 64.0);
    EXPECT_NO_THROW(verify_periodic_set(L));
    Rng rng(4);
    double worst = 0.0;
    for (int t = 0; t < 3000; ++t) {
      const Vec x{rng.uniform(-1.0, 2.0), rng.uniform(-1.0, 2.0)};
      const double got = L.distance(x);
      ASSERT_NEAR(got, lattice_distance_brute(L, x), 1e-12);
      worst = std::max(worst, got);
    }
    // random points never beat the certified bound, and beta is attained up to grid slack
    EXPECT_LE(worst, L.beta_bound);
    EXPECT_LT(L.beta_bound, 1.0);
    EXPECT_GE(worst, L.beta_hat - (L.beta_bound - L.beta_hat) - 0.05);
  }
}

TEST(PeriodicSet, VerifierRejectsBrokenSets) {
  auto L = build_periodic_packed_set(rod(), 1.0 / 96.0);
  auto crowded = L;
  crowded.generators.push_back(Vec{0.1});
  EXPECT_THROW(verify_periodic_set(crowded), ContractViolation);
  auto sparse = L;
  sparse.generators.pop_back();
  sparse.beta_hat = sparse.beta_bound = 1.0;  // the gap (1/3, 1) fits another rod
  EXPECT_THROW(verify_periodic_set(sparse), ContractViolation);
  EXPECT_THROW(build_periodic_packed_set(ConvexSolid::ball(1, 0.5), 0.01), ValidationError);
}

TEST(Delta, FeasibleRangeBoundary) {
  for (double beta : {0.3, 0.5, 0.8}) {
    const double m = max_feasible_delta(beta);
    EXPECT_NEAR(beta * (1 + 6 * m), 1 - 2 * m, 1e-12);
    EXPECT_NO_THROW(check_delta(beta, 0.5 * m));
    EXPECT_NO_THROW(check_delta(beta, m * (1 - 1e-9)));
    EXPECT_THROW(check_delta(beta, m * (1 + 1e-9)), ValidationError);
    EXPECT_THROW(check_delta(beta, 0.0), ValidationError);
    EXPECT_THROW(check_delta(beta, -0.1), ValidationError);
  }
}

TEST(Counts, LatticeCountsMatchEnumeration) {
  for (const ConvexSolid& s : {rod(), small_disk()}) {
    const auto L = build_periodic_packed_set(s, 1.0 / 64.0);
    Rng rng(2);
    for (int t = 0; t < 40; ++t) {
      const double sc = rng.uniform(1.0, 1.6), h = rng.uniform(0.5, 9.0);
      EXPECT_EQ(count_scaled_in_box(L, sc, h), count_brute(L, sc, h)) << sc << " " << h;
    }
  }
  // closed box: -1 and 1 are counted along with the five thirds between them
  EXPECT_EQ(count_scaled_in_box(build_periodic_packed_set(rod(), 1.0 / 96.0), 1.0, 1.0), 7u);
}

TEST(Counts, ShellBoundFormulaAndPackings) {
  const auto L = build_periodic_packed_set(rod(), 1.0 / 96.0);
  const double delta = 0.5 * max_feasible_delta(L.beta_hat);
  // D = [-1/3, 1/3]: the two shell pieces of length 3, widened by 1/6 at every
  // end, total 6 + 2/3, and each rod of D / 2 has length 1/3. Ten rods at
  // spacing 1/3 fit in each closed piece, so the bound is attained.
  const auto c = counts_n1_n2_n3(L, delta, 20.0);
  EXPECT_EQ(c.n3_bound, 20u);
  EXPECT_EQ(c.n1, count_brute(L, 1 + 3 * delta, 8.0));
  EXPECT_EQ(c.n2, count_brute(L, 1 + 6 * delta, 8.0));
  EXPECT_GT(c.n1, c.n2);
  EXPECT_THROW(counts_n1_n2_n3(L, delta, 6.0), ValidationError);

  // random maximal packings of the d = 2 shell never exceed the bound
  const auto& s = small_disk();
  const auto P = build_periodic_packed_set(s, 1.0 / 64.0);
  const double dd = 0.5 * max_feasible_delta(P.beta_hat);
  const double side = 9.0;
  const auto cs = counts_n1_n2_n3(P, dd, side);
  const Box outer = Box::cube(2, -side / 2, side / 2), inner = Box::cube(2, -(side - 6) / 2, (side - 6) / 2);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    std::vector<Vec> kept;
    for (int t = 0; t < 60000; ++t) {
      const Vec x = uniform_in(outer, rng);
      if (inner.contains(x)) continue;
      bool ok = true;
      for (const Vec& y : kept) ok = ok && gauge_norm(x - y, s) >= 1.0;
      if (ok) kept.push_back(x);
    }
    EXPECT_LE(kept.size(), cs.n3_bound);
    EXPECT_GT(kept.size(), cs.n3_bound / 4);
  }
}

TEST(Counts, FindL0IsTheFirstSeparatedSide) {
  const auto L = build_periodic_packed_set(rod(), 1.0 / 96.0);
  const double delta = 0.5 * max_feasible_delta(L.beta_hat);
  const auto c = find_L0(L, delta, 400.0);
  EXPECT_TRUE(c.separated());
  for (double side = 7.0; side < c.L; side += 1.0) EXPECT_FALSE(counts_n1_n2_n3(L, delta, side).separated()) << side;
  EXPECT_THROW(find_L0(L, delta, c.L - 1.0), RunFailure);
}

TEST(Race, ClosedFormSmallCases) {
  const RaceSetup one{1, 2.0, 6.0};
  EXPECT_NEAR(std::exp(race_log_probability(one)), 2.0 / 8.0, 1e-13);
  const RaceSetup two{2, 1.0, 3.0};
  EXPECT_NEAR(std::exp(race_log_probability(two)), (2.0 / 5.0) * (1.0 / 4.0), 1e-13);
  EXPECT_EQ(race_log_probability(RaceSetup{5, 1.0, 0.0}), 0.0);
}

TEST(Race, DirectSimulationMatchesExact) {
  const RaceSetup r{5, 1.0, 2.0};
  Rng rng(6);
  const auto e = estimate_race(r, 20000, 20000, 2000, rng);
  const double p = std::pow(10.0, e.log10_exact);
  EXPECT_LE(e.direct.lo, p);
  EXPECT_GE(e.direct.hi, p);
  EXPECT_TRUE(e.direct_resolved);
  EXPECT_FALSE(e.inconclusive);
}

TEST(Race, ImportanceSamplingReachesRareEvents) {
  for (const RaceSetup& r : {RaceSetup{40, 1.0, 150.0}, RaceSetup{300, 0.01, 40.0}}) {
    Rng rng(7);
    const auto e = estimate_race(r, 100, 1000, 20000, rng);
    EXPECT_FALSE(e.direct_resolved);
    EXPECT_FALSE(e.inconclusive);
    EXPECT_LT(e.log10_exact, -10.0);
    EXPECT_NEAR(e.log10_p, e.log10_exact, 0.05);
    EXPECT_LE(e.log10_lo, e.log10_exact + 0.01);
    EXPECT_GE(e.log10_hi, e.log10_exact - 0.01);
  }
}

TEST(Designs, AdmissibleOutsideTheBoxAndReflected) {
  for (const ConvexSolid& s : {rod(), small_disk(), ConvexSolid::box(Vec{0.1, 0.15})}) {
    const double side = 5.0;
    const Box box = Box::cube(s.dim(), 0.0, side);
    for (const std::string name : {"lattice", "random"}) {
      const auto des = make_design(name, s, side, 3);
      EXPECT_FALSE(des.points.empty()) << name;
      for (std::size_t a = 0; a < des.points.size(); ++a) {
        EXPECT_FALSE(box.contains(des.points[a]));
        for (std::size_t b = 0; b < a; ++b) ASSERT_GT(gauge_norm(des.points[a] - des.points[b], s), 1.0);
      }
      EXPECT_NO_THROW(PackingState(s, box, des.points));
      const auto ref = make_design(name + "-reflected", s, side, 3);
      EXPECT_EQ(ref.points, reflect(des.points, side));
      EXPECT_EQ(reflect(ref.points, side).size(), des.points.size());
      for (std::size_t k = 0; k < des.points.size(); ++k)
        for (int j = 0; j < s.dim(); ++j) EXPECT_NEAR(reflect(ref.points, side)[k][j], des.points[k][j], 1e-12);
    }
    EXPECT_TRUE(make_design("empty", s, side, 3).points.empty());
  }
  EXPECT_THROW(make_design("spiral", rod(), 5.0, 0), ValidationError);
}

TEST(ConditionalVariance, PositiveAndReproducible) {
  const auto& s = rod();
  const double side = 12.0;
  std::vector<EtaDesign> designs{make_design("empty", s, side, 1), make_design("lattice", s, side, 1)};
  const auto a = conditional_variance_experiment(side, designs, s, 60, SaturationOptions{}, 9);
  const auto b = conditional_variance_experiment(side, designs, s, 60, SaturationOptions{}, 9, 0.95, 2);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].counts, b[k].counts);
    EXPECT_GT(a[k].variance.lo, 0.0);
    EXPECT_LE(a[k].variance.lo, a[k].variance.estimate);
    EXPECT_GE(a[k].variance.hi, a[k].variance.estimate);
    EXPECT_GT(a[k].mean, 0.5 * side / (2 * s.diameter()));
  }
  EXPECT_THROW(conditional_variance_experiment(side, designs, s, 1, SaturationOptions{}, 9), ContractViolation);
}
