#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "jamlab/errors.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/packing_state.hpp"
#include "jamlab/rng.hpp"
#include "jamlab/spacetime.hpp"
#include "jamlab/vacancy.hpp"

namespace jamlab {

inline constexpr const char* kEngineVersion = "jamlab 0.1.0";

/// Q_lambda = [0, lambda^(1/d))^d.
inline Box q_lambda(double lambda, int dim) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive and finite");
  return Box::cube(dim, 0.0, std::pow(lambda, 1.0 / dim));
}

/// Applies the usual packing rule to `points` in order.
inline void pack_sequence_into(const std::vector<SpaceTimePoint>& points, PackingState& state) {
  for (std::size_t i = 1; i < points.size(); ++i)
    if (arrives_before(points[i], points[i - 1]))
      throw ContractViolation("pack_sequence: input not sorted by (time, position) at element " + std::to_string(i));
  for (const auto& p : points) {
    if (p.position.dim() != state.dim()) throw ContractViolation("pack_sequence: dimension mismatch");
    state.try_accept(p);
  }
}

inline PackingState pack_sequence(const std::vector<SpaceTimePoint>& points, PackingState state) {
  pack_sequence_into(points, state);
  return state;
}

struct SaturationOptions {
  double epsilon = 1e-6;  // relative vacancy tolerance; ignored in d = 1
  std::uint64_t guard_limit = 1'000'000;
  bool rejection = false;  // plain uniform proposals over the whole region (oracle mode)
};

struct PackOutcome {
  PackingState state;
  double virtual_time = 0.0;        // arrival time of the last accepted solid
  double vacancy_bound = 0.0;       // measure bound on the vacant set left at termination
  double extra_solids_bound = 0.0;  // vacancy_bound / vol(half-gauge ball)
  std::uint64_t probes = 0;
  bool guard_tripped = false;

  std::size_t N() const { return state.count(); }
};

namespace detail {

inline void check_count_bound(const PackingState& st) {
  const double bound = packing_count_bound(st.solid(), st.region());
  if (static_cast<double>(st.count()) > bound * (1.0 + 1e-12))
    throw RunFailure("packing count " + std::to_string(st.count()) + " exceeds the volume bound " + std::to_string(bound));
}

}  // namespace detail

/// Packs `state.region()` until no further solid fits (d = 1) or the vacancy
/// bound drops below eps * |region| (d >= 2).
inline PackOutcome saturate(PackingState state, Rng& rng, const SaturationOptions& opt = {}) {
  if (state.dim() >= 2 && !(opt.epsilon > 0.0))
    throw UnsupportedConfiguration("epsilon = 0 is only supported in d = 1 (exact interval vacancy)");
  PackOutcome out{std::move(state)};
  PackingState& st = out.state;
  auto vac = make_vacancy(st, opt.epsilon);
  double now = 0.0;
  std::uint64_t next_index = st.count();
  if (!opt.rejection) {
    for (;;) {
      VacancyDraw draw = vac->sample(rng, opt.epsilon, opt.guard_limit);
      now += draw.elapsed;
      out.probes += draw.probes;
      if (!draw.point) {
        out.guard_tripped = draw.guard_tripped;
        break;
      }
      SpaceTimePoint p{*draw.point, now, next_index};
      if (st.try_accept(p)) {
        ++next_index;
        out.virtual_time = now;
        vac->on_accept(p.position);
      }
    }
  } else {
    const Box& region = st.region();
    const double rate = region.volume();
    while (!vac->exhausted(opt.epsilon)) {
      now += rng.exponential(rate);
      ++out.probes;
      SpaceTimePoint p{uniform_in(region, rng), now, next_index};
      if (st.try_accept(p)) {
        ++next_index;
        out.virtual_time = now;
        vac->on_accept(p.position);
      }
    }
  }
  out.vacancy_bound = vac->measure_bound();
  out.extra_solids_bound = out.vacancy_bound / st.solid().half_gauge_ball_volume();
  detail::check_count_bound(st);
  return out;
}

inline PackOutcome pack_to_saturation(double lambda, const ConvexSolid& solid, Rng& rng, const SaturationOptions& opt = {}) {
  return saturate(PackingState(solid, q_lambda(lambda, solid.dim())), rng, opt);
}

/// First ceil(lambda * tau) arrivals, uniform on Q_lambda, times equal to their ordinals.
inline PackOutcome pack_finite_input(double lambda, double tau, const ConvexSolid& solid, Rng& rng) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive and finite");
  const Box q = q_lambda(lambda, solid.dim());
  const double count = std::ceil(lambda * tau);
  if (count > 1e10) throw ValidationError("lambda * tau is too large");
  PackOutcome out{PackingState(solid, q)};
  const auto n = static_cast<std::uint64_t>(count);
  for (std::uint64_t i = 0; i < n; ++i) {
    SpaceTimePoint p{uniform_in(q, rng), static_cast<double>(i + 1), i};
    if (out.state.try_accept(p)) out.virtual_time = p.time;
  }
  out.probes = n;
  detail::check_count_bound(out.state);
  return out;
}

/// Saturation packing of [0, L]^d with the admissible obstacle set eta outside the box.
inline PackOutcome pack_with_boundary(double L, const std::vector<Vec>& eta, const ConvexSolid& solid, Rng& rng,
                                      const SaturationOptions& opt = {}) {
  if (!(L > 0.0) || !std::isfinite(L)) throw ValidationError("L must be positive and finite");
  const Box box = Box::cube(solid.dim(), 0.0, L);
  for (std::size_t j = 0; j < eta.size(); ++j) {
    if (eta[j].dim() != solid.dim()) throw ValidationError("eta point " + std::to_string(j) + " has the wrong dimension");
    if (box.contains(eta[j])) throw ValidationError("eta point " + std::to_string(j) + " lies inside [0,L]^d");
  }
  return saturate(PackingState(solid, box, eta), rng, opt);
}

}  // namespace jamlab
