#pragma once

// 0-dimensional persistent homology of 1D signals and Betti-curve vectorization.
//
// A signal is read as the piecewise-linear interpolation of its samples, so the
// sublevel set {t : f(t) <= a} at a generic threshold a has one connected
// component per maximal run of consecutive samples <= a. The barcode records
// when those components appear (local minima) and when they merge (the younger
// one dies).

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <boost/sort/spreadsort/integer_sort.hpp>
#include <cstdint>
#include <limits>
#include <numeric>
#include <type_traits>
#include <utility>
#include <vector>

#include "ecgtda/errors.hpp"
#include "ecgtda/signal.hpp"

namespace ecgtda::tda {

inline constexpr int kDefaultBins = 100;

enum class Filtration { sublevel, superlevel };

template <typename Scalar>
struct Interval {
  Scalar birth{};
  Scalar death{};
  bool essential = false;

  Scalar persistence() const { return death - birth; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Intervals are kept sorted by (birth, essential first, death).
/// Superlevel barcodes are stored in negated coordinates, i.e. as the
/// sublevel barcode of -f, so birth <= death always holds.
template <typename Scalar>
struct Barcode {
  std::vector<Interval<Scalar>> intervals;
  Filtration kind = Filtration::sublevel;

  std::size_t size() const noexcept { return intervals.size(); }
  bool empty() const noexcept { return intervals.empty(); }
};

template <typename Scalar>
struct BettiCurve {
  VectorX<Scalar> grid;
  Eigen::VectorXi counts;
};

namespace detail {

// Order-preserving map from a finite double to an unsigned key; -0 and +0
// share a key so that ties fall through to the secondary keys, as with operator<.
inline std::uint64_t monotone_key(double x) noexcept {
  const auto bits = std::bit_cast<std::uint64_t>(x + 0.0);
  return bits >> 63 ? ~bits : bits | (std::uint64_t{1} << 63);
}

template <typename Scalar>
void canonical_sort(std::vector<Interval<Scalar>>& v) {
  const auto less = [](const Interval<Scalar>& a, const Interval<Scalar>& b) {
    if (a.birth != b.birth) return a.birth < b.birth;
    if (a.essential != b.essential) return a.essential;
    return a.death < b.death;
  };
  if constexpr (std::is_same_v<Scalar, double> || std::is_same_v<Scalar, float>)
    boost::sort::spreadsort::integer_sort(
        v.begin(), v.end(),
        [](const Interval<Scalar>& iv, unsigned shift) { return monotone_key(double(iv.birth)) >> shift; }, less);
  else
    std::sort(v.begin(), v.end(), less);
}

// Disjoint sets over sample indices whose roots are the oldest vertex of the
// component: smallest value, then smallest index. Vertices not yet swept hold
// the sentinel `absent`.
template <typename Index>
class ElderForest {
 public:
  static constexpr Index absent = ~Index{0};

  explicit ElderForest(std::size_t n) : parent_(n, absent) {}

  bool active(Index x) const noexcept { return parent_[x] != absent; }
  void activate(Index x) noexcept { parent_[x] = x; }

  Index find(Index x) noexcept {
    Index root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const Index next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  void attach(Index child_root, Index new_root) noexcept { parent_[child_root] = new_root; }

 private:
  std::vector<Index> parent_;
};

// Vertex indices in (value, index) order. Floating-point values go through a
// radix-based sort, which scales almost linearly on large inputs.
template <typename Scalar, typename Index>
std::vector<Index> sweep_order(const VectorX<Scalar>& f) {
  const auto n = static_cast<std::size_t>(f.size());
  std::vector<Index> order(n);
  if constexpr (std::is_same_v<Scalar, double> || std::is_same_v<Scalar, float>) {
    struct Keyed {
      std::uint64_t key;
      Index index;
    };
    std::vector<Keyed> keyed(n);
    for (std::size_t i = 0; i < n; ++i)
      keyed[i] = {monotone_key(double(f[static_cast<Eigen::Index>(i)])), static_cast<Index>(i)};
    boost::sort::spreadsort::integer_sort(
        keyed.begin(), keyed.end(), [](const Keyed& k, unsigned shift) { return k.key >> shift; },
        [](const Keyed& a, const Keyed& b) { return a.key < b.key || (a.key == b.key && a.index < b.index); });
    for (std::size_t r = 0; r < n; ++r) order[r] = keyed[r].index;
  } else {
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&f](Index a, Index b) { return f[a] < f[b] || (f[a] == f[b] && a < b); });
  }
  return order;
}

template <typename Scalar, typename Index>
Barcode<Scalar> sweep(const VectorX<Scalar>& f) {
  const auto n = static_cast<std::size_t>(f.size());
  const auto order = sweep_order<Scalar, Index>(f);

  ElderForest<Index> forest(n);
  Barcode<Scalar> out;
  for (const Index v : order) {
    const Scalar value = f[v];
    forest.activate(v);
    Index roots[2];
    int found = 0;
    if (v > 0 && forest.active(v - 1)) roots[found++] = forest.find(v - 1);
    if (std::size_t(v) + 1 < n && forest.active(v + 1)) {
      const Index r = forest.find(v + 1);
      if (found == 0 || roots[0] != r) roots[found++] = r;
    }
    if (found == 0) continue;  // v is a new root: a component is born here
    if (found == 1) {
      forest.attach(v, roots[0]);
      continue;
    }
    // Roots are the oldest vertex of their component, so comparing their
    // (value, index) keys compares sweep positions.
    const Scalar f0 = f[roots[0]], f1 = f[roots[1]];
    const bool first_older = f0 < f1 || (f0 == f1 && roots[0] < roots[1]);
    const Index elder = first_older ? roots[0] : roots[1];
    const Index younger = first_older ? roots[1] : roots[0];
    const Scalar birth = first_older ? f1 : f0;
    if (birth < value) out.intervals.push_back({birth, value, false});
    forest.attach(younger, elder);
    forest.attach(v, elder);
  }

  out.intervals.push_back({f[order.front()], f[order.back()], true});
  canonical_sort(out.intervals);
  return out;
}

}  // namespace detail

/// Sublevel-set 0-dim barcode of the piecewise-linear interpolation of `samples`.
///
/// Single sweep over vertices in (value, index) order with union-find; O(n log n).
/// Merges kill the younger component (equal births: the larger sample index dies).
/// The surviving component yields the essential interval [global min, global max].
/// Zero-length non-essential pairs, which only arise on plateaus, are dropped so
/// that a plateau minimum contributes a single interval.
template <typename Derived>
Barcode<typename Derived::Scalar> sublevel_barcode(const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  require_finite_nonempty(samples, "sublevel_barcode");
  const VectorX<Scalar> f = samples;
  // 32-bit indices halve the sweep's working set whenever they suffice.
  if (static_cast<std::uint64_t>(f.size()) < std::numeric_limits<std::uint32_t>::max())
    return detail::sweep<Scalar, std::uint32_t>(f);
  return detail::sweep<Scalar, std::size_t>(f);
}

template <typename Scalar>
Barcode<Scalar> sublevel_barcode(const BasicSignal<Scalar>& s) {
  return sublevel_barcode(s.samples);
}

/// Superlevel-set barcode of f, computed as the sublevel barcode of -f and kept
/// in those negated coordinates.
template <typename Derived>
Barcode<typename Derived::Scalar> superlevel_barcode(const Eigen::MatrixBase<Derived>& samples) {
  auto bc = sublevel_barcode(-samples);
  bc.kind = Filtration::superlevel;
  return bc;
}

template <typename Scalar>
Barcode<Scalar> superlevel_barcode(const BasicSignal<Scalar>& s) {
  return superlevel_barcode(s.samples);
}

/// Number of intervals containing `alpha`: [birth, death) for ordinary
/// intervals, [birth, death] for the essential one.
template <typename Scalar>
int betti_number(const Barcode<Scalar>& bc, Scalar alpha) {
  int count = 0;
  for (const auto& iv : bc.intervals) {
    const bool inside = iv.essential ? (iv.birth <= alpha && alpha <= iv.death)
                                     : (iv.birth <= alpha && alpha < iv.death);
    count += inside ? 1 : 0;
  }
  return count;
}

/// Betti curve sampled on `bins` evenly spaced thresholds spanning
/// [min birth, max death]. A zero-width span gives `bins` copies of that value.
template <typename Scalar>
BettiCurve<Scalar> betti_curve(const Barcode<Scalar>& bc, int bins = kDefaultBins) {
  if (bc.empty()) throw InvalidInput("betti_curve: empty barcode");
  if (bins < 2) throw InvalidInput("betti_curve: bins must be >= 2");

  Scalar lo = bc.intervals.front().birth;
  Scalar hi = bc.intervals.front().death;
  std::vector<Scalar> births, deaths;
  births.reserve(bc.size());
  deaths.reserve(bc.size());
  std::vector<Scalar> essential_deaths;
  for (const auto& iv : bc.intervals) {
    lo = std::min(lo, iv.birth);
    hi = std::max(hi, iv.death);
    births.push_back(iv.birth);
    (iv.essential ? essential_deaths : deaths).push_back(iv.death);
  }
  std::sort(births.begin(), births.end());
  std::sort(deaths.begin(), deaths.end());
  std::sort(essential_deaths.begin(), essential_deaths.end());

  BettiCurve<Scalar> out;
  out.grid.resize(bins);
  const Scalar span = hi - lo;
  for (int i = 0; i < bins; ++i) out.grid[i] = lo + span * Scalar(i) / Scalar(bins - 1);
  out.grid[bins - 1] = hi;

  out.counts.resize(bins);
  for (int i = 0; i < bins; ++i) {
    const Scalar a = out.grid[i];
    const auto born = std::upper_bound(births.begin(), births.end(), a) - births.begin();
    const auto dead = std::upper_bound(deaths.begin(), deaths.end(), a) - deaths.begin();
    const auto dead_essential =
        std::lower_bound(essential_deaths.begin(), essential_deaths.end(), a) - essential_deaths.begin();
    out.counts[i] = static_cast<int>(born - dead - dead_essential);
  }
  return out;
}

template <typename Scalar>
struct BettiPair {
  BettiCurve<Scalar> sublevel;
  BettiCurve<Scalar> superlevel;
};

/// Betti curves of the signal and of its negation, each on its own grid.
template <typename Derived>
BettiPair<typename Derived::Scalar> betti_pair(const Eigen::MatrixBase<Derived>& samples,
                                               int bins = kDefaultBins) {
  return {betti_curve(sublevel_barcode(samples), bins), betti_curve(superlevel_barcode(samples), bins)};
}

template <typename Scalar>
BettiPair<Scalar> betti_pair(const BasicSignal<Scalar>& s, int bins = kDefaultBins) {
  return betti_pair(s.samples, bins);
}

}  // namespace ecgtda::tda
