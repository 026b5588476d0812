#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aqt/rng.hpp"

namespace aqt {

/// A node of the binary policy tree. Schedule (c, l) prescribes transmission
/// in every slot t with t mod 2^l == c.
struct Schedule {
  std::uint32_t offset = 0;  // c, 0 <= c < 2^l
  std::uint32_t level = 0;   // l, 0 <= l <= J

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

inline std::uint64_t period(const Schedule& s) { return std::uint64_t{1} << s.level; }

inline bool prescribes(const Schedule& s, std::uint64_t t) {
  return (t & (period(s) - 1)) == s.offset;
}

/// Children split the parent's slots disjointly: (c, l) -> (c, l+1), (c+2^l, l+1).
inline std::pair<Schedule, Schedule> children(const Schedule& s, std::uint32_t max_depth) {
  if (s.level >= max_depth)
    throw std::out_of_range("schedule at maximum depth has no children");
  return {Schedule{s.offset, s.level + 1},
          Schedule{s.offset + static_cast<std::uint32_t>(period(s)), s.level + 1}};
}

inline Schedule parent(const Schedule& s) {
  if (s.level == 0) throw std::out_of_range("root schedule has no parent");
  return Schedule{s.offset & static_cast<std::uint32_t>((period(s) >> 1) - 1), s.level - 1};
}

/// True iff the schedules' prescribed slot sets intersect, i.e. one is an
/// ancestor of the other (or they are equal).
inline bool conflicts(const Schedule& a, const Schedule& b) {
  const Schedule& lo = a.level <= b.level ? a : b;
  const Schedule& hi = a.level <= b.level ? b : a;
  return (hi.offset & (period(lo) - 1)) == lo.offset;
}

/// The J+1 schedules prescribing transmission at slot t; a root-to-leaf path.
inline std::vector<Schedule> active_set(std::uint64_t t, std::uint32_t depth) {
  std::vector<Schedule> path;
  path.reserve(depth + 1);
  for (std::uint32_t l = 0; l <= depth; ++l)
    path.push_back(Schedule{static_cast<std::uint32_t>(t & ((std::uint64_t{1} << l) - 1)), l});
  return path;
}

/// Learning parameters of the policy-tree agents.
struct AgentParams {
  double eta = 0.95;         // selection threshold
  double epsilon = 0.02;     // voluntary relinquishing probability
  double alpha_plus = 0.2;   // increment factor
  double alpha_minus = -0.5; // decrement factor
  double gamma0 = 0.1;       // initialization noise share
  double gamma1 = 1.8;       // per-level initialization decay
  double w_init = 0.25;      // initialization scale

  void validate() const {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must be in (0,1)");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in [0,1)");
    if (!(alpha_plus > 0.0)) throw std::invalid_argument("alpha_plus must be > 0");
    if (!(alpha_minus < 0.0)) throw std::invalid_argument("alpha_minus must be < 0");
    if (!(gamma0 >= 0.0 && gamma0 <= 1.0)) throw std::invalid_argument("gamma0 must be in [0,1]");
    if (!(gamma1 >= 1.0)) throw std::invalid_argument("gamma1 must be >= 1");
    if (!(w_init > 0.0 && w_init <= 1.0)) throw std::invalid_argument("w_init must be in (0,1]");
  }
};

/// Per-schedule weights over the depth-J tree, stored in heap order
/// (index = 2^l - 1 + c). Reads and writes are counted so agent complexity
/// claims can be checked from tests.
class WeightTable {
 public:
  WeightTable() = default;
  explicit WeightTable(std::uint32_t depth)
      : depth_(depth), w_((std::size_t{1} << (depth + 1)) - 1, 0.0) {}

  std::uint32_t depth() const { return depth_; }
  std::size_t size() const { return w_.size(); }

  static std::size_t index_of(const Schedule& s) {
    return (std::size_t{1} << s.level) - 1 + s.offset;
  }
  static Schedule schedule_at(std::size_t index) {
    std::uint32_t level = 0;
    while ((std::size_t{2} << level) - 1 <= index) ++level;
    return Schedule{static_cast<std::uint32_t>(index - ((std::size_t{1} << level) - 1)), level};
  }

  double get(const Schedule& s) const { ++reads_; return w_[index_of(s)]; }
  double get(std::size_t index) const { ++reads_; return w_[index]; }
  void set(const Schedule& s, double v) { ++writes_; w_[index_of(s)] = v; }
  void set(std::size_t index, double v) { ++writes_; w_[index] = v; }

  double sum() const {
    reads_ += w_.size();
    double s = 0.0;
    for (double v : w_) s += v;
    return s;
  }

  /// Heap order is level-major, offset-minor, so the first strict maximum
  /// realizes the tie-break (lowest level, then lowest offset).
  Schedule argmax() const {
    reads_ += w_.size();
    std::size_t best = 0;
    for (std::size_t i = 1; i < w_.size(); ++i)
      if (w_[i] > w_[best]) best = i;
    return schedule_at(best);
  }

  std::uint64_t reads() const { return reads_; }
  std::uint64_t writes() const { return writes_; }
  void reset_counters() { reads_ = 0; writes_ = 0; }

 private:
  std::uint32_t depth_ = 0;
  std::vector<double> w_;
  mutable std::uint64_t reads_ = 0;
  std::uint64_t writes_ = 0;
};

/// Weight initialization: level l gets (w_init / gamma1^l) * (1 - gamma0 + gamma0*u),
/// one independent uniform draw per schedule. Higher levels start heavier so
/// agents explore high transmission rates first.
template <class Rng>
WeightTable init_weights(std::uint32_t depth, const AgentParams& p, Rng& rng) {
  p.validate();
  WeightTable table(depth);
  for (std::uint32_t l = 0; l <= depth; ++l) {
    const double scale = p.w_init / std::pow(p.gamma1, static_cast<double>(l));
    for (std::uint32_t c = 0; c < (std::uint32_t{1} << l); ++c)
      table.set(Schedule{c, l}, scale * (1.0 - p.gamma0 + p.gamma0 * rng.next_unit()));
  }
  return table;
}

/// Multiplicative update of the active path: w <- w * exp(alpha * u), fresh
/// uniform draw per schedule. The draw doubles as tie-breaking noise.
template <class Rng>
void multiplicative_update(WeightTable& table, const std::vector<Schedule>& actives,
                           double alpha, Rng& rng) {
  for (const Schedule& s : actives) {
    const double u = rng.next_unit();
    table.set(s, table.get(s) * std::exp(alpha * u));
  }
}

/// Weight normalization: if the table lost mass this slot (sum_before > current
/// sum) and the current sum is below w_init * |S|, the lost mass is
/// redistributed over all schedules with random proportions.
template <class Rng>
void normalize_weights(double sum_before, WeightTable& table, double w_init, Rng& rng) {
  const double sum_now = table.sum();
  const double delta = sum_before - sum_now;
  if (delta <= 0.0 || sum_now >= w_init * static_cast<double>(table.size())) return;
  std::vector<double> shares(table.size());
  double share_sum = 0.0;
  for (double& x : shares) {
    x = rng.next_unit();
    share_sum += x;
  }
  for (std::size_t i = 0; i < table.size(); ++i)
    table.set(i, table.get(i) + delta * (shares[i] / share_sum));
}

/// Clamp every weight to at most 1.
inline void enforce_bounds(WeightTable& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double v = table.get(i);
    if (v > 1.0) table.set(i, 1.0);
  }
}

}  // namespace aqt
