#pragma once

// The vacant set is the part of the region not covered by x + D for any packed
// center x; a new center is acceptable exactly when it lands there. Two
// trackers: exact interval lists in d = 1, and a dyadic cell tree in d >= 2
// whose FREE + MIXED leaves always contain the vacant set.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "jamlab/errors.hpp"
#include "jamlab/fenwick.hpp"
#include "jamlab/geometry.hpp"
#include "jamlab/packing_state.hpp"
#include "jamlab/rng.hpp"

namespace jamlab {

struct VacancyDraw {
  std::optional<Vec> point;  // empty when saturated
  double elapsed = 0.0;      // virtual time spent by all probes, including the successful one
  std::uint64_t probes = 0;
  bool guard_tripped = false;
};

class Vacancy {
 public:
  explicit Vacancy(const PackingState& state) : state_(&state) {}
  virtual ~Vacancy() = default;

  /// Upper bound on the vacant measure (exact in d = 1).
  virtual double measure_bound() const = 0;
  virtual bool exhausted(double eps) const = 0;
  virtual void on_accept(const Vec& x) = 0;
  /// Point uniform on the tracked superset of the vacant set.
  virtual Vec propose(Rng& rng) = 0;
  /// Feedback after the last proposal turned out to be blocked.
  virtual void on_blocked() {}

  /// Probes the frontier until an unblocked point turns up. Each probe costs
  /// an Exp(frontier measure) waiting time, so the returned point and the
  /// accumulated time follow the law of the first Poisson arrival in the
  /// vacant set.
  VacancyDraw sample(Rng& rng, double eps, std::uint64_t guard_limit = 1'000'000) {
    VacancyDraw out;
    std::uint64_t blocked_run = 0;
    while (!exhausted(eps)) {
      out.elapsed += rng.exponential(measure_bound());
      Vec p = propose(rng);
      ++out.probes;
      if (!state_->is_blocked(p)) {
        out.point = p;
        return out;
      }
      on_blocked();
      if (++blocked_run >= guard_limit) {
        out.guard_tripped = true;
        return out;
      }
    }
    return out;
  }

 protected:
  const PackingState* state_;
};

/// d = 1: the vacant set is a finite union of intervals, tracked exactly.
class IntervalVacancy : public Vacancy {
 public:
  explicit IntervalVacancy(const PackingState& state) : Vacancy(state) {
    if (state.dim() != 1) throw ContractViolation("IntervalVacancy needs d = 1");
    half_width_ = state.solid().difference().bounds().hi[0];
    add_gap(state.region().lo[0], state.region().hi[0]);
    for (const Vec& c : state.centers()) on_accept(c);
  }

  double measure_bound() const override {
    const double t = fen_.total();
    return t > 0.0 ? t : 0.0;
  }
  bool exhausted(double) const override { return gaps_.empty(); }

  /// Sum of gap lengths recomputed from the interval list.
  double free_measure() const {
    double s = 0.0;
    for (const auto& [a, g] : gaps_) s += g.end - a;
    return s;
  }
  std::size_t gap_count() const { return gaps_.size(); }
  /// Some gap meets the open interval (a, b).
  bool meets(double a, double b) const {
    auto it = gaps_.lower_bound(b);
    if (it == gaps_.begin()) return false;
    --it;
    return it->second.end > a;
  }
  std::vector<std::pair<double, double>> gaps() const {
    std::vector<std::pair<double, double>> out;
    for (const auto& [a, g] : gaps_) out.emplace_back(a, g.end);
    return out;
  }

  void on_accept(const Vec& x) override {
    const double a0 = x[0] - half_width_, b0 = x[0] + half_width_;
    auto it = gaps_.upper_bound(a0);
    if (it != gaps_.begin()) --it;
    std::vector<std::pair<double, double>> pieces;
    while (it != gaps_.end() && it->first < b0) {
      const double a = it->first, b = it->second.end;
      if (b > a0) {
        release(it->second.slot);
        it = gaps_.erase(it);
        if (a0 > a) pieces.emplace_back(a, a0);
        if (b > b0) pieces.emplace_back(b0, b);
      } else {
        ++it;
      }
    }
    for (auto [a, b] : pieces) add_gap(a, b);
    if (++updates_ % 4096 == 0) fen_.rebuild();
  }

  Vec propose(Rng& rng) override {
    if (!(fen_.total() > 0.0)) fen_.rebuild();
    std::size_t slot = fen_.find(rng.uniform01() * fen_.total());
    if (slot >= fen_.size() || !(fen_.value(slot) > 0.0)) {
      // rounding pushed the lookup onto a dead slot; any live gap will do
      // because this happens with probability ~1e-16
      slot = gaps_.begin()->second.slot;
    }
    const auto& [a, b] = slot_gap_[slot];
    return Vec{a + (b - a) * rng.uniform01()};
  }

 private:
  struct Gap {
    double end;
    std::size_t slot;
  };

  void add_gap(double a, double b) {
    std::size_t slot;
    if (!free_slots_.empty()) {
      slot = free_slots_.back();
      free_slots_.pop_back();
      fen_.set(slot, b - a);
      slot_gap_[slot] = {a, b};
    } else {
      slot = fen_.push_back(b - a);
      slot_gap_.emplace_back(a, b);
    }
    gaps_.emplace(a, Gap{b, slot});
  }

  void release(std::size_t slot) {
    fen_.set(slot, 0.0);
    free_slots_.push_back(slot);
  }

  double half_width_ = 0.0;
  std::map<double, Gap> gaps_;
  Fenwick<double> fen_;
  std::vector<std::pair<double, double>> slot_gap_;
  std::vector<std::size_t> free_slots_;
  std::uint64_t updates_ = 0;
};

/// d >= 2: dyadic refinement of a base grid (cell side about d_S). Leaves are
/// COVERED (inside x + D for one center x, certified by the corner test),
/// FREE (meeting no x + D) or MIXED. Leaf measures are integers in units of
/// the finest cell, so the sampling index is exact.
///
/// Refinement has two triggers: on acceptance, leaves straddling the new
/// x + D are split down to `eager_depth`; a blocked probe splits its leaf one
/// level (down to `max_depth`). The second trigger resolves cells that are
/// covered only by a union of translates, which the corner test cannot
/// certify at any fixed resolution.
class VacancyTree : public Vacancy {
 public:
  using Units = unsigned __int128;
  static constexpr int kEagerLevels = 1;
  enum Status : std::uint8_t { kFree, kMixed, kCovered, kSplit };

  VacancyTree(const PackingState& state, double epsilon) : Vacancy(state), dim_(state.dim()) {
    const Box& region = state.region();
    const double ds = state.solid().diameter();
    std::int64_t nbase = 1;
    for (int k = 0; k < dim_; ++k) {
      const double cells = std::ceil(region.side(k) / ds);
      if (!(cells <= 1e7)) throw UnsupportedConfiguration("region too large for the vacancy tree");
      nb_[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(cells));
      side0_[k] = region.side(k) / static_cast<double>(nb_[k]);
      stride_[k] = nbase;
      nbase *= nb_[k];
      if (nbase > (std::int64_t{1} << 26)) throw UnsupportedConfiguration("region too large for the vacancy tree");
    }
    int lg = 0;
    while ((std::int64_t{1} << lg) < nbase) ++lg;
    max_depth_ = std::min(40, (124 - lg) / dim_);
    // eager refinement stops at the side floor region_side * eps^(1/d) / 2 or one
    // level below the base grid, whichever is coarser; blocked probes refine further
    double min_cell = std::numeric_limits<double>::infinity();
    for (int k = 0; k < dim_; ++k) min_cell = std::min(min_cell, region.side(k));
    min_cell *= std::pow(std::max(epsilon, 0.0), 1.0 / dim_) / 2.0;
    sides_.resize(max_depth_ + 1);
    for (int dep = 0; dep <= max_depth_; ++dep)
      for (int k = 0; k < dim_; ++k) sides_[dep][k] = std::ldexp(side0_[k], -dep);
    eager_depth_ = 0;
    while (eager_depth_ < std::min(kEagerLevels, max_depth_) && max_side(eager_depth_) > min_cell) ++eager_depth_;
    unit_volume_ = 1.0;
    for (int k = 0; k < dim_; ++k) unit_volume_ *= side0_[k];
    unit_volume_ = std::ldexp(unit_volume_, -dim_ * max_depth_);

    nodes_.resize(static_cast<std::size_t>(nbase));
    for (std::int64_t b = 0; b < nbase; ++b) {
      Node& n = nodes_[b];
      std::int64_t rem = b;
      for (int k = dim_ - 1; k >= 0; --k) {
        const std::int64_t c = rem / stride_[k];
        rem -= c * stride_[k];
        n.lo[k] = region.lo[k] + static_cast<double>(c) * side0_[k];
      }
      n.depth = 0;
      n.status = kFree;
      attach_slot(static_cast<std::int32_t>(b));
    }
    for (const Vec& c : state.centers()) on_accept(c);
  }

  int max_depth() const { return max_depth_; }
  int eager_depth() const { return eager_depth_; }
  std::size_t node_count() const { return nodes_.size() - free_blocks_.size() * (std::size_t{1} << dim_); }

  double measure_bound() const override { return static_cast<double>(fen_.total()) * unit_volume_; }
  bool exhausted(double eps) const override {
    if (eps <= 0.0) return fen_.total() == 0;
    return measure_bound() < eps * state_->region().volume();
  }

  /// Measure of FREE leaves (every point of which is vacant).
  double free_measure() const {
    Units s = 0;
    for (std::size_t i = 0; i < slot_node_.size(); ++i)
      if (slot_node_[i] >= 0 && nodes_[slot_node_[i]].status == kFree) s += fen_.value(i);
    return static_cast<double>(s) * unit_volume_;
  }

  /// p lies in a FREE or MIXED leaf.
  bool frontier_contains(const Vec& p) const {
    const Box& region = state_->region();
    if (!region.contains_half_open(p)) return false;
    std::int64_t b = 0;
    for (int k = 0; k < dim_; ++k) {
      auto c = static_cast<std::int64_t>(std::floor((p[k] - region.lo[k]) / side0_[k]));
      b += std::clamp<std::int64_t>(c, 0, nb_[k] - 1) * stride_[k];
    }
    std::int32_t id = static_cast<std::int32_t>(b);
    while (nodes_[id].status == kSplit) {
      const Node& n = nodes_[id];
      unsigned m = 0;
      for (int k = 0; k < dim_; ++k)
        if (p[k] >= n.lo[k] + side(n.depth + 1, k)) m |= 1u << k;
      id = n.child + static_cast<std::int32_t>(m);
    }
    return nodes_[id].status == kFree || nodes_[id].status == kMixed;
  }

  void on_accept(const Vec& x) override {
    const double ds = state_->solid().diameter();
    const Box& region = state_->region();
    std::int64_t lo[kMaxDim], hi[kMaxDim];
    for (int k = 0; k < dim_; ++k) {
      lo[k] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((x[k] - ds - region.lo[k]) / side0_[k])));
      hi[k] = std::min<std::int64_t>(nb_[k] - 1, static_cast<std::int64_t>(std::floor((x[k] + ds - region.lo[k]) / side0_[k])));
      if (lo[k] > hi[k]) return;
    }
    Box reach{x - Vec(dim_, ds), x + Vec(dim_, ds)};
    for (int k = 0; k < dim_; ++k) {
      reach.lo[k] -= side0_[k];
      reach.hi[k] += side0_[k];
    }
    reach_ = reach;
    gathered_ = false;
    std::int64_t c[kMaxDim];
    for (int k = 0; k < dim_; ++k) c[k] = lo[k];
    for (;;) {
      std::int64_t b = 0;
      for (int k = 0; k < dim_; ++k) b += c[k] * stride_[k];
      update(static_cast<std::int32_t>(b), x);
      int k = 0;
      while (k < dim_ && ++c[k] > hi[k]) {
        c[k] = lo[k];
        ++k;
      }
      if (k == dim_) break;
    }
  }

  Vec propose(Rng& rng) override {
    const Units r = rng.below(fen_.total());
    const std::size_t slot = fen_.find(r);
    last_leaf_ = slot_node_[slot];
    const Node& n = nodes_[last_leaf_];
    Vec p(dim_);
    for (int k = 0; k < dim_; ++k) p[k] = n.lo[k] + side(n.depth, k) * rng.uniform01();
    return p;
  }

  void on_blocked() override {
    if (last_leaf_ < 0) return;
    const std::int32_t id = last_leaf_;
    last_leaf_ = -1;
    if (nodes_[id].depth >= max_depth_ || nodes_[id].status != kMixed) return;
    gather(box_of(id));
    split(id, all_);
    try_collapse(id);
  }

 private:
  struct Node {
    double lo[kMaxDim] = {0, 0, 0, 0};
    std::int32_t child = -1;
    std::int32_t slot = -1;
    std::uint8_t depth = 0;
    std::uint8_t status = kFree;
  };

  double side(int depth, int k) const { return sides_[depth][k]; }
  double max_side(int depth) const {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s = std::max(s, side(depth, k));
    return s;
  }
  Units units(int depth) const { return static_cast<Units>(1) << (dim_ * (max_depth_ - depth)); }

  Box box_of(std::int32_t id) const {
    const Node& n = nodes_[id];
    Box b = Box::cube(dim_, 0.0, 0.0);
    for (int k = 0; k < dim_; ++k) {
      b.lo[k] = n.lo[k];
      b.hi[k] = n.lo[k] + side(n.depth, k);
    }
    return b;
  }

  using Cands = std::vector<std::int32_t>;

  void gather(const Box& box) {
    near_.clear();
    state_->visit_near(box, [&](const Vec& c) { near_.push_back(c); });
    all_.resize(near_.size());
    for (std::size_t i = 0; i < near_.size(); ++i) all_[i] = static_cast<std::int32_t>(i);
  }

  /// Candidates (indices into near_) whose translate of D meets `cell`.
  void filter(const Box& cell, const Cands& in, Cands& out) const {
    const ConvexBody& d = state_->solid().difference();
    out.clear();
    for (std::int32_t i : in)
      if (d.intersects_box(near_[i], cell)) out.push_back(i);
  }

  std::uint8_t classify(const Box& cell, const Cands& cands) const {
    const ConvexBody& d = state_->solid().difference();
    bool touched = false;
    for (std::int32_t i : cands) {
      if (!d.intersects_box(near_[i], cell)) continue;
      if (d.covers_box(near_[i], cell)) return kCovered;
      touched = true;
    }
    return touched ? kMixed : kFree;
  }

  void attach_slot(std::int32_t id) {
    Node& n = nodes_[id];
    if (!free_slots_.empty()) {
      n.slot = free_slots_.back();
      free_slots_.pop_back();
      fen_.set(n.slot, units(n.depth));
      slot_node_[n.slot] = id;
    } else {
      n.slot = static_cast<std::int32_t>(fen_.push_back(units(n.depth)));
      slot_node_.push_back(id);
    }
  }

  void detach_slot(std::int32_t id) {
    Node& n = nodes_[id];
    if (n.slot < 0) return;
    fen_.set(n.slot, 0);
    slot_node_[n.slot] = -1;
    free_slots_.push_back(n.slot);
    n.slot = -1;
  }

  void split(std::int32_t id, const Cands& cands) {
    detach_slot(id);
    const unsigned nc = 1u << dim_;
    std::int32_t block;
    if (!free_blocks_.empty()) {
      block = free_blocks_.back();
      free_blocks_.pop_back();
    } else {
      block = static_cast<std::int32_t>(nodes_.size());
      nodes_.resize(nodes_.size() + nc);
    }
    const Node parent = nodes_[id];
    for (unsigned m = 0; m < nc; ++m) {
      Node& ch = nodes_[block + m];
      ch = Node{};
      ch.depth = static_cast<std::uint8_t>(parent.depth + 1);
      for (int k = 0; k < dim_; ++k) ch.lo[k] = parent.lo[k] + ((m >> k) & 1u ? side(ch.depth, k) : 0.0);
      ch.status = classify(box_of(block + static_cast<std::int32_t>(m)), cands);
      if (ch.status != kCovered) attach_slot(block + static_cast<std::int32_t>(m));
    }
    nodes_[id].child = block;
    nodes_[id].status = kSplit;
  }

  void cover(std::int32_t id) {
    Node& n = nodes_[id];
    if (n.status == kSplit) {
      const std::int32_t block = n.child;
      for (unsigned m = 0; m < (1u << dim_); ++m) cover(block + static_cast<std::int32_t>(m));
      free_blocks_.push_back(block);
      nodes_[id].child = -1;
    } else {
      detach_slot(id);
    }
    nodes_[id].status = kCovered;
  }

  void try_collapse(std::int32_t id) {
    Node& n = nodes_[id];
    if (n.status != kSplit) return;
    for (unsigned m = 0; m < (1u << dim_); ++m)
      if (nodes_[n.child + static_cast<std::int32_t>(m)].status != kCovered) return;
    free_blocks_.push_back(n.child);
    n.child = -1;
    n.status = kCovered;
  }

  void update(std::int32_t id, const Vec& x) {
    const std::uint8_t st = nodes_[id].status;
    if (st == kCovered) return;
    const Box cell = box_of(id);
    const ConvexBody& d = state_->solid().difference();
    if (!d.intersects_box(x, cell)) return;
    if (d.covers_box(x, cell)) {
      cover(id);
      return;
    }
    if (st == kFree || st == kMixed) {
      if (nodes_[id].depth >= eager_depth_ || nodes_[id].depth >= max_depth_) {
        nodes_[id].status = kMixed;
        return;
      }
      if (!gathered_) {
        gather(reach_);
        gathered_ = true;
      }
      filter(cell, all_, cands_);
      split(id, cands_);
    }
    const std::int32_t block = nodes_[id].child;
    for (unsigned m = 0; m < (1u << dim_); ++m) update(block + static_cast<std::int32_t>(m), x);
    try_collapse(id);
  }

  int dim_;
  std::int64_t nb_[kMaxDim] = {1, 1, 1, 1};
  std::int64_t stride_[kMaxDim] = {0, 0, 0, 0};
  double side0_[kMaxDim] = {1, 1, 1, 1};
  std::vector<std::array<double, kMaxDim>> sides_;
  int max_depth_ = 0;
  int eager_depth_ = 0;
  double unit_volume_ = 1.0;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> free_blocks_;
  Fenwick<Units> fen_;
  std::vector<std::int32_t> slot_node_;
  std::vector<std::int32_t> free_slots_;
  std::vector<Vec> near_;
  Cands all_;
  Cands cands_;
  Box reach_;
  bool gathered_ = false;
  std::int32_t last_leaf_ = -1;
};

inline std::unique_ptr<Vacancy> make_vacancy(const PackingState& state, double epsilon) {
  if (state.dim() == 1) return std::make_unique<IntervalVacancy>(state);
  return std::make_unique<VacancyTree>(state, epsilon);
}

}  // namespace jamlab
