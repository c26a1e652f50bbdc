#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "jamlab/stabilization.hpp"
#include "jamlab/stats.hpp"
#include "oracles.hpp"

using namespace jamlab;

namespace {

CubeIndex cube1(std::int64_t a) { return CubeIndex(std::vector<std::int64_t>{a}); }

// [lo, hi] covered by the union of closed intervals [c - 1, c + 1]?
bool covers(std::vector<double> centers, double lo, double hi) {
  std::sort(centers.begin(), centers.end());
  double at = lo;
  for (double c : centers) {
    if (c - 1.0 > at) break;
    at = std::max(at, c + 1.0);
  }
  return at >= hi;
}

// Brute force local saturation time for unit intervals in d = 1.
double local_time_oracle(std::int64_t i, std::vector<SpaceTimePoint> input) {
  const ConvexSolid s = ConvexSolid::ball(1, 0.5);
  const Box plus{Vec{i - 1.0}, Vec{i + 2.0}};
  std::vector<SpaceTimePoint> all;
  for (const auto& p : input)
    if (p.position[0] >= i - 1.0 && p.position[0] < i + 2.0) all.push_back(p);
  sort_and_index(all);
  for (const auto& cand : all) {
    std::vector<SpaceTimePoint> inside, moat;
    for (const auto& p : all) {
      if (p.time > cand.time) continue;
      (p.position[0] >= i && p.position[0] < i + 1.0 ? inside : moat).push_back(p);
    }
    bool ok = true;
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << moat.size()) && ok; ++m) {
      std::vector<SpaceTimePoint> seq = inside;
      for (std::size_t k = 0; k < moat.size(); ++k)
        if ((m >> k) & 1u) seq.push_back(moat[k]);
      std::sort(seq.begin(), seq.end(), arrives_before);
      std::vector<double> packed;
      for (std::size_t idx : oracle::naive_pack(s, plus, {}, seq)) packed.push_back(seq[idx].position[0]);
      ok = covers(packed, static_cast<double>(i), i + 1.0);
    }
    if (ok) return cand.time;
  }
  return kInfiniteRadius;
}

}  // namespace

TEST(Cubes, IndexingAndNeighbours) {
  EXPECT_EQ(cube_of(Vec{2.5, -0.1}).str(), "(2,-1)");
  const CubeIndex j(std::vector<std::int64_t>{3, 4, 5});
  EXPECT_EQ(j.neighbours().size(), 27u);
  EXPECT_NE(std::find(j.neighbours().begin(), j.neighbours().end(), j), j.neighbours().end());
  EXPECT_EQ(cubes_of_region(q_lambda(30.0, 2)).size(), 36u);  // side 5.48 -> 6 x 6
  EXPECT_DOUBLE_EQ(j.plus_box().volume(), 27.0);
}

TEST(Cubes, UnionDiameter) {
  const Box big = Box::cube(2, -100, 100);
  std::set<CubeIndex> one{CubeIndex(std::vector<std::int64_t>{0, 0})};
  EXPECT_NEAR(cube_union_diameter(one, big), std::sqrt(2.0), 1e-12);
  std::set<CubeIndex> two{CubeIndex(std::vector<std::int64_t>{0, 0}), CubeIndex(std::vector<std::int64_t>{2, 0})};
  EXPECT_NEAR(cube_union_diameter(two, big), std::sqrt(10.0), 1e-12);
  // clipped to the domain
  EXPECT_NEAR(cube_union_diameter(one, Box::cube(2, 0.5, 10)), std::sqrt(0.5), 1e-12);
}

TEST(Coverage, VacantPointExactInOneDimension) {
  const auto s = ConvexSolid::ball(1, 0.5);
  EXPECT_FALSE(vacant_point(s, {Vec{0.5}, Vec{2.5}}, Box{Vec{0.0}, Vec{3.0}}).has_value());
  const auto p = vacant_point(s, {Vec{0.5}, Vec{2.6}}, Box{Vec{0.0}, Vec{3.0}});
  ASSERT_TRUE(p.has_value());
  EXPECT_GT((*p)[0], 1.5);
  EXPECT_LT((*p)[0], 1.6);
  // squares of half-width 0.5 block closed squares of side 2; on a lattice of
  // spacing 1.5 these overlap and cover the plane
  const auto sq = ConvexSolid::box(Vec{0.5, 0.5});
  std::vector<Vec> lattice;
  for (int a = -1; a <= 3; ++a)
    for (int b = -1; b <= 3; ++b) lattice.push_back(Vec{1.5 * a, 1.5 * b});
  EXPECT_FALSE(vacant_point(sq, lattice, Box::cube(2, 0, 3)).has_value());
  // without (1.5, 1.5) the open square (1, 2)^2 is left free
  auto holed = lattice;
  holed.erase(std::find_if(holed.begin(), holed.end(), [](const Vec& v) { return v[0] == 1.5 && v[1] == 1.5; }));
  const auto h = vacant_point(sq, holed, Box::cube(2, 0, 3));
  ASSERT_TRUE(h.has_value());
  EXPECT_GT((*h)[0], 1.0);
  EXPECT_LT((*h)[0], 2.0);
  EXPECT_GT((*h)[1], 1.0);
  EXPECT_LT((*h)[1], 2.0);
  // blocked squares of side 1.4 leave lines of width 0.1 between them
  EXPECT_TRUE(vacant_point(ConvexSolid::box(Vec{0.35, 0.35}), lattice, Box::cube(2, 0, 3)).has_value());
}

TEST(LocalSaturation, MatchesBruteForceOnRandomInputs) {
  const auto s = ConvexSolid::ball(1, 0.5);
  int finite = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    Rng rng(seed);
    const double horizon = 0.5 + 2.0 * rng.uniform01();
    auto input = poisson_spacetime(Box{Vec{-1.0}, Vec{2.0}}, horizon, 1.0, rng);
    const auto got = local_saturation_time(cube1(0), input, s, 24);
    const double want = local_time_oracle(0, input);
    ASSERT_EQ(got.time, want) << "seed " << seed << " points " << input.size();
    EXPECT_TRUE(got.exact || input.size() > 24);
    finite += std::isfinite(want) ? 1 : 0;
  }
  EXPECT_GT(finite, 10);
}

TEST(LocalSaturation, BudgetedSearchIsALowerBound) {
  const auto s = ConvexSolid::ball(1, 0.5);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(500 + seed);
    auto input = poisson_spacetime(Box{Vec{-1.0}, Vec{2.0}}, 3.0, 1.0, rng);
    const auto exact = local_saturation_time(cube1(0), input, s, 20);
    const auto cheap = local_saturation_time(cube1(0), input, s, 0);
    EXPECT_LE(cheap.time, exact.time);
    if (cheap.moat_points > 0) EXPECT_FALSE(cheap.exact);
  }
  EXPECT_THROW(local_saturation_time(cube1(0), {}, s, 25), ContractViolation);
}

TEST(CausalGraph, ClustersMatchBruteForceSearch) {
  const auto s = ConvexSolid::ball(2, 0.5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Box q = Box::cube(2, 0, 8);
    auto input = poisson_spacetime(q, 0.6, 1.0, rng);
    std::map<CubeIndex, bool> sat;
    for (const auto& j : cubes_of_region(q)) sat[j] = rng.uniform01() < 0.5;
    const double t_star = 0.3;
    const CausalGraph g(input, s, t_star, sat);
    auto relevant = [&](std::size_t k) {
      return !sat[cube_of(input[k].position)] || input[k].time <= t_star;
    };
    for (std::size_t target = 0; target < input.size(); target += 7) {
      std::vector<bool> in(input.size(), false);
      in[target] = true;
      for (bool grew = true; grew;) {
        grew = false;
        for (std::size_t a = 0; a < input.size(); ++a) {
          if (!in[a]) continue;
          for (std::size_t b = 0; b < input.size(); ++b)
            if (!in[b] && relevant(b) && input[b].time < input[a].time &&
                distance(input[a].position, input[b].position) <= 2.0 * s.diameter()) {
              in[b] = true;
              grew = true;
            }
        }
      }
      std::vector<std::size_t> want;
      for (std::size_t k = 0; k < input.size(); ++k)
        if (in[k]) want.push_back(k);
      EXPECT_EQ(causal_cluster(g, target).members, want);
    }
  }
}

namespace {

std::vector<Vec> explicit_pack(const ConvexSolid& s, const detail::LazyField& field,
                               const std::vector<detail::ArrivalStream>& streams, double horizon) {
  std::vector<SpaceTimePoint> all;
  for (auto st : streams) {
    for (;;) {
      st.advance(field.cells[st.cell], field.rates[st.cell]);
      if (st.time > horizon) break;
      all.push_back({st.pos, st.time, 0});
    }
  }
  sort_and_index(all);
  std::vector<Vec> out;
  for (std::size_t k : oracle::naive_pack(s, field.region, {}, all)) out.push_back(all[k].position);
  std::sort(out.begin(), out.end(), [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  return out;
}

}  // namespace

TEST(LazyField, DeadCellSkippingMatchesExplicitPacking) {
  for (const auto& s : {ConvexSolid::ball(1, 0.5), ConvexSolid::ball(2, 0.5), ConvexSolid::box(Vec{0.5, 0.3})}) {
    const Box q = q_lambda(s.dim() == 1 ? 40.0 : 36.0, s.dim());
    detail::LazyField field(s, q);
    std::vector<detail::ArrivalStream> streams;
    for (std::size_t c = 0; c < field.cells.size(); ++c)
      streams.push_back({static_cast<std::uint32_t>(c), 0, derive_seed(3, "t", c), 0.0, Vec(s.dim())});
    const auto partial = field.run(streams, Vec(s.dim()), kInfiniteRadius, q.dilate(1.0), 6.0, 1e-6);
    EXPECT_EQ(partial.window, explicit_pack(s, field, streams, 6.0)) << format_solid(s);
    // run to saturation: everything accepted arrived by the last acceptance
    const auto full = field.run(streams, Vec(s.dim()), kInfiniteRadius, q.dilate(1.0), kInfiniteRadius, 1e-6);
    EXPECT_TRUE(full.saturated) << format_solid(s);
    EXPECT_EQ(full.window, explicit_pack(s, field, streams, full.saturation_time)) << format_solid(s);
    std::vector<Vec> acc = full.window;
    EXPECT_FALSE(vacant_point(s, acc, q, 1e-6).has_value());
  }
}

TEST(Perturbation, DeterministicAndOnTheGrid) {
  const auto s = ConvexSolid::ball(1, 0.5);
  PerturbationOptions o;
  for (double L = 0; L <= 8; L += 0.5) o.radii.push_back(L);
  o.resamples = 10;
  const auto a = estimate_radius_perturbation(60.0, s, cube1(30), o, 4);
  const auto b = estimate_radius_perturbation(60.0, s, cube1(30), o, 4);
  EXPECT_EQ(a.radius, b.radius);
  EXPECT_EQ(a.packings, b.packings);
  if (std::isfinite(a.radius)) EXPECT_NE(std::find(o.radii.begin(), o.radii.end(), a.radius), o.radii.end());
  EXPECT_GT(a.baseline_saturation_time, 0.0);
}

TEST(Perturbation, RadiusCoveringTheRegionIsAlwaysStable) {
  const auto s = ConvexSolid::ball(2, 0.5);
  PerturbationOptions o;
  o.radii = {100.0};
  o.resamples = 2;
  const auto r = estimate_radius_perturbation(25.0, s, CubeIndex(std::vector<std::int64_t>{2, 2}), o, 1);
  EXPECT_EQ(r.radius, 100.0);
}

TEST(Perturbation, SmallHorizonIsReported) {
  const auto s = ConvexSolid::ball(1, 0.5);
  PerturbationOptions o;
  o.radii = {1.0, 2.0};
  o.horizon = 0.01;
  EXPECT_THROW(estimate_radius_perturbation(50.0, s, cube1(20), o, 1), RunFailure);
  o.horizon = 1e9;
  o.radii = {2.0, 1.0};
  EXPECT_THROW(estimate_radius_perturbation(50.0, s, cube1(20), o, 1), ContractViolation);
}

TEST(Perturbation, TailFractionsAreNonincreasing) {
  const auto s = ConvexSolid::ball(2, 0.5);
  PerturbationOptions o;
  for (double L = 0; L <= 6; L += 1.0) o.radii.push_back(L);
  o.resamples = 3;
  std::vector<StabilizationSample> samples;
  for (std::uint64_t k = 0; k < 6; ++k)
    samples.push_back(estimate_radius_perturbation(40.0, s, CubeIndex(std::vector<std::int64_t>{3, 3}), o, k));
  const auto tau = tail_fractions(samples, o.radii);
  for (std::size_t k = 1; k < tau.size(); ++k) EXPECT_LE(tau[k], tau[k - 1]);
}

TEST(Causal, RadiusAtLeastTheNeighbourhoodAndDeterministic) {
  const auto s = ConvexSolid::ball(1, 0.5);
  CausalOptions o;
  o.horizon = 20.0;
  const auto a = estimate_radius_causal(30.0, s, cube1(15), o, 7);
  const auto b = estimate_radius_causal(30.0, s, cube1(15), o, 7);
  EXPECT_EQ(a.radius, b.radius);
  EXPECT_GE(a.radius, 3.0);
  EXPECT_LE(a.radius, 30.0);
  EXPECT_GT(a.t_star, 0.0);
  o.t_star = 0.0;  // nothing saturated in time: clusters can only grow
  const auto c = estimate_radius_causal(30.0, s, cube1(15), o, 7);
  EXPECT_GE(c.radius, a.radius);
}

TEST(TailFit, ExponentialAndGaussianTails) {
  std::vector<double> L, e, g;
  for (double x = 0.5; x <= 4.0; x += 0.25) {
    L.push_back(x);
    e.push_back(std::exp(-x));
    g.push_back(std::exp(-x * x));
  }
  const auto fe = fit_tail(L, e);
  EXPECT_NEAR(fe.slope, -1.0, 1e-12);
  EXPECT_NEAR(fe.r_squared, 1.0, 1e-12);
  EXPECT_FALSE(fe.super_exponential);
  const auto fg = fit_tail(L, g);
  EXPECT_TRUE(fg.super_exponential);
  EXPECT_NEAR(fg.curvature, -1.0, 1e-9);
  EXPECT_THROW(fit_tail({1, 2, 3}, {1.0, 0.5, 0.0}), ValidationError);
}
