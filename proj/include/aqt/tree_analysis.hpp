#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace aqt {

/// Leaf-level multiset of a settled policy tree. A settled tree is a full
/// binary tree, so the levels satisfy the Kraft equality sum(2^-l) = 1.
struct SettledRealization {
  std::vector<std::uint32_t> leaf_levels;  // kept sorted ascending

  std::size_t user_count() const { return leaf_levels.size(); }
  std::uint32_t height() const {
    return leaf_levels.empty() ? 0 : *std::max_element(leaf_levels.begin(), leaf_levels.end());
  }

  /// Exact Kraft check in integer arithmetic scaled by 2^height.
  bool kraft_complete() const {
    if (leaf_levels.empty()) return false;
    const std::uint32_t h = height();
    if (h >= 63) return false;
    std::uint64_t total = 0;
    for (std::uint32_t l : leaf_levels) total += std::uint64_t{1} << (h - l);
    return total == (std::uint64_t{1} << h);
  }
};

/// Long-term mean AoI of a user holding a level-l leaf: (2^l + 1) / 2.
inline double mean_user_aoi(std::uint32_t level) {
  return (std::ldexp(1.0, static_cast<int>(level)) + 1.0) / 2.0;
}

/// Mean network AoI of a settled realization: (1 + mean(2^l)) / 2.
inline double mean_network_aoi(const SettledRealization& r) {
  if (!r.kraft_complete())
    throw std::invalid_argument("leaf levels do not form a complete full binary tree");
  double sum = 0.0;
  for (std::uint32_t l : r.leaf_levels) sum += std::ldexp(1.0, static_cast<int>(l));
  return 0.5 * (1.0 + sum / static_cast<double>(r.leaf_levels.size()));
}

namespace detail {

inline void enumerate_rec(std::uint32_t n_left, std::uint64_t cap_left, std::uint32_t level,
                          std::uint32_t max_depth, std::vector<std::uint32_t>& prefix,
                          std::vector<SettledRealization>& out) {
  // cap_left is the remaining slot capacity in units of 2^-max_depth.
  if (n_left == 0) {
    if (cap_left == 0) out.push_back(SettledRealization{prefix});
    return;
  }
  if (cap_left == 0 || level > max_depth) return;
  const std::uint64_t unit = std::uint64_t{1} << (max_depth - level);
  // Levels are emitted non-decreasing, so every remaining leaf takes at most
  // `unit` and at least 2^0 = 1 of the capacity.
  const std::uint32_t max_here =
      static_cast<std::uint32_t>(std::min<std::uint64_t>(n_left, cap_left / unit));
  for (std::uint32_t count = 0; count <= max_here; ++count) {
    const std::uint64_t used = static_cast<std::uint64_t>(count) * unit;
    const std::uint32_t rest = n_left - count;
    const std::uint64_t cap_rest = cap_left - used;
    if (cap_rest < rest) continue;                       // not enough capacity even at depth J
    if (level == max_depth && rest > 0) continue;        // nothing below the cap
    prefix.insert(prefix.end(), count, level);
    enumerate_rec(rest, cap_rest, level + 1, max_depth, prefix, out);
    prefix.erase(prefix.end() - count, prefix.end());
  }
}

}  // namespace detail

/// Every leaf-level multiset of n users with height <= max_depth satisfying
/// the Kraft equality. Complete and duplicate-free (multisets are generated in
/// sorted order).
inline std::vector<SettledRealization> enumerate_realizations(std::uint32_t n,
                                                              std::uint32_t max_depth) {
  if (n == 0) throw std::invalid_argument("need at least one user");
  if (max_depth >= 62 || (std::uint64_t{1} << max_depth) < n)
    throw std::invalid_argument("no settled tree exists: n exceeds 2^J");
  std::vector<SettledRealization> out;
  std::vector<std::uint32_t> prefix;
  if (n == 1) {
    out.push_back(SettledRealization{{0}});
    return out;
  }
  detail::enumerate_rec(n, std::uint64_t{1} << max_depth, 1, max_depth, prefix, out);
  return out;
}

inline double worst_case_aoi(std::uint32_t n, std::uint32_t max_depth) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const SettledRealization& r : enumerate_realizations(n, max_depth))
    worst = std::max(worst, mean_network_aoi(r));
  return worst;
}

/// The fully balanced realization: n - x leaves at ceil(log2 n), x at one
/// level above, with x chosen to close the Kraft equality.
inline SettledRealization balanced_realization(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("need at least one user");
  if (n == 1) return SettledRealization{{0}};
  std::uint32_t h = 0;
  while ((std::uint32_t{1} << h) < n) ++h;
  const std::uint32_t x = (std::uint32_t{1} << h) - n;  // leaves at level h-1
  SettledRealization r;
  r.leaf_levels.insert(r.leaf_levels.end(), x, h - 1);
  r.leaf_levels.insert(r.leaf_levels.end(), n - x, h);
  return r;
}

inline double best_case_aoi(std::uint32_t n, std::uint32_t max_depth) {
  double best = std::numeric_limits<double>::infinity();
  for (const SettledRealization& r : enumerate_realizations(n, max_depth))
    best = std::min(best, mean_network_aoi(r));
  return best;
}

/// AoI reduction from one balancing move (remove the sibling pair at l_max,
/// split a leaf at l_min): (3 / 2n) * (2^(l_max - 1) - 2^l_min).
inline double balance_delta(std::uint32_t l_max, std::uint32_t l_min, std::uint32_t n) {
  if (!(l_max > l_min && l_min >= 1)) throw std::invalid_argument("need l_max > l_min >= 1");
  return 1.5 / static_cast<double>(n) *
         (std::ldexp(1.0, static_cast<int>(l_max) - 1) - std::ldexp(1.0, static_cast<int>(l_min)));
}

/// Mean network AoI of the fully skewed tree {1, 2, ..., n-2, n-1, n-1}:
/// (1 + (3 * 2^(n-1) - 2) / n) / 2. Derived from the multiset directly; the
/// simplification (3 * 2^n - 1) / (2n) found in some write-ups does not match
/// the enumerated worst case (5.25 vs 5.1 at n = 5).
inline double skew_bound(std::uint32_t n) {
  if (n < 2) throw std::invalid_argument("skewed tree needs n >= 2");
  return 0.5 * (1.0 + (3.0 * std::ldexp(1.0, static_cast<int>(n) - 1) - 2.0) /
                          static_cast<double>(n));
}

/// Smallest depth admitting a settled tree for n users: ceil(log2 n).
inline std::uint32_t min_depth(std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("need at least one user");
  std::uint32_t h = 0;
  while ((std::uint64_t{1} << h) < n) ++h;
  return h;
}

/// Depth to provision when at most max_users can be active simultaneously.
inline std::uint32_t recommend_depth(std::uint32_t max_users) { return min_depth(max_users); }

}  // namespace aqt
