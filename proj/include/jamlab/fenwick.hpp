#pragma once

#include <cstddef>
#include <vector>

#include "jamlab/errors.hpp"

namespace jamlab {

/// Binary indexed tree over nonnegative weights with proportional lookup.
/// Capacity is a power of two and grows by rebuilding.
template <class T>
class Fenwick {
 public:
  std::size_t size() const { return vals_.size(); }
  T total() const { return total_; }
  T value(std::size_t i) const { return vals_[i]; }

  std::size_t push_back(T v) {
    if (vals_.size() == cap_) grow();
    vals_.push_back(T{});
    set(vals_.size() - 1, v);
    return vals_.size() - 1;
  }

  void set(std::size_t i, T v) {
    const T old = vals_[i];
    vals_[i] = v;
    if (v >= old)
      add(i, v - old, true);
    else
      add(i, old - v, false);
  }

  /// Sum of values [0, i).
  T prefix(std::size_t i) const {
    T s{};
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

  /// Smallest i with prefix(i + 1) > u, for 0 <= u < total(). Returns size() if none.
  std::size_t find(T u) const {
    std::size_t pos = 0;
    for (std::size_t step = cap_; step > 0; step >>= 1) {
      const std::size_t nxt = pos + step;
      if (nxt <= cap_ && !(u < tree_[nxt])) {
        pos = nxt;
        u -= tree_[nxt];
      }
    }
    return pos < vals_.size() ? pos : vals_.size();
  }

  /// Recompute internal sums from the stored values (clears accumulated rounding for floating T).
  void rebuild() {
    tree_.assign(cap_ + 1, T{});
    total_ = T{};
    for (std::size_t k = 1; k <= cap_; ++k) {
      if (k <= vals_.size()) {
        total_ += vals_[k - 1];
        tree_[k] += vals_[k - 1];
      }
      const std::size_t j = k + (k & (~k + 1));
      if (j <= cap_) tree_[j] += tree_[k];
    }
  }

 private:
  void add(std::size_t i, T delta, bool up) {
    if (up)
      total_ += delta;
    else
      total_ -= delta;
    for (std::size_t k = i + 1; k <= cap_; k += k & (~k + 1)) {
      if (up)
        tree_[k] += delta;
      else
        tree_[k] -= delta;
    }
  }

  void grow() {
    cap_ = cap_ == 0 ? 16 : cap_ * 2;
    rebuild();
  }

  std::vector<T> vals_;
  std::vector<T> tree_{T{}};
  std::size_t cap_ = 0;
  T total_{};
};

}  // namespace jamlab
