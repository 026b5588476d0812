#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "aqt/policy_tree.hpp"
#include "aqt/rng.hpp"

namespace aqt {

/// Ternary slot outcome broadcast by the access point.
enum class Feedback { Idle, Success, Collision };

inline Feedback feedback_for(int transmitters) {
  if (transmitters == 0) return Feedback::Idle;
  return transmitters == 1 ? Feedback::Success : Feedback::Collision;
}

enum class QtVariant { AlohaQt, Maqt };

/// Expert-weights policy-tree agent. Covers both the original algorithm and
/// the modified variant (single selected schedule, no voluntary
/// relinquishment, frozen schedule while the tree is settled).
class QtAgent {
 public:
  QtAgent() = default;

  template <class Rng>
  QtAgent(QtVariant variant, std::uint32_t depth, const AgentParams& params, Rng& rng)
      : variant_(variant), depth_(depth), params_(params),
        weights_(init_weights(depth, params, rng)) {}

  template <class Rng>
  static QtAgent make(QtVariant variant, std::uint32_t depth, const AgentParams& params,
                      Rng& rng) {
    return QtAgent(variant, depth, params, rng);
  }

  bool decide() {
    decide_reads_start_ = weights_.reads();
    slot_rw_start_ = weights_.reads() + weights_.writes();
    if (variant_ == QtVariant::Maqt && settled_)
      return prescribes(frozen_, t_local_);
    const Schedule primary = weights_.argmax();
    if (variant_ == QtVariant::Maqt)
      return prescribes(primary, t_local_);
    // Original variant: transmit if the primary or any schedule above the
    // threshold is active in this slot.
    if (prescribes(primary, t_local_)) return true;
    bool tx = false;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_.get(i) > params_.eta && prescribes(WeightTable::schedule_at(i), t_local_))
        tx = true;
    }
    return tx;
  }

  template <class Rng>
  void observe(Feedback f, bool transmitted, Rng& rng) {
    if (transmitted && f == Feedback::Idle)
      throw std::logic_error("protocol violation: transmitter observed an idle slot");
    if (variant_ == QtVariant::Maqt && settled_) {
      if (f != Feedback::Success) {
        settled_ = false;
        streak_ = 0;
      }
      ++t_local_;
      return;
    }
    const double alpha =
        ((f == Feedback::Idle && !transmitted) || (f == Feedback::Success && transmitted))
            ? params_.alpha_plus
            : params_.alpha_minus;
    const double sum_before = weights_.sum();
    const std::vector<Schedule> actives = active_set(t_local_, depth_);
    multiplicative_update(weights_, actives, alpha, rng);
    if (variant_ == QtVariant::AlohaQt && rng.next_unit() <= params_.epsilon)
      for (const Schedule& s : actives) weights_.set(s, 0.0);
    normalize_weights(sum_before, weights_, params_.w_init, rng);
    enforce_bounds(weights_);
    if (variant_ == QtVariant::Maqt) {
      streak_ = (f == Feedback::Success) ? streak_ + 1 : 0;
      if (streak_ >= (std::uint64_t{1} << depth_)) {
        settled_ = true;
        frozen_ = weights_.argmax();
      }
    }
    ++t_local_;
  }

  bool settled() const { return settled_; }
  Schedule frozen_schedule() const { return frozen_; }
  std::uint64_t local_time() const { return t_local_; }
  void set_local_time(std::uint64_t t) { t_local_ = t; }
  const WeightTable& weights() const { return weights_; }
  WeightTable& weights() { return weights_; }

  /// Weight reads consumed by the most recent decide() (schedule-selection scan).
  std::uint64_t last_decide_reads() const { return weights_.reads() - decide_reads_start_; }
  /// Weight reads + writes since the most recent decide() started, i.e. the
  /// whole slot once observe() has run.
  std::uint64_t slot_weight_accesses() const {
    return weights_.reads() + weights_.writes() - slot_rw_start_;
  }

 private:
  QtVariant variant_ = QtVariant::Maqt;
  std::uint32_t depth_ = 0;
  AgentParams params_;
  WeightTable weights_;
  std::uint64_t t_local_ = 0;
  bool settled_ = false;
  std::uint64_t streak_ = 0;
  Schedule frozen_;
  std::uint64_t decide_reads_start_ = 0;
  std::uint64_t slot_rw_start_ = 0;
};

/// Frame-based Q-learning agent: one claimed slot per frame of fixed size F.
class AlohaQAgent {
 public:
  AlohaQAgent() = default;

  template <class Rng>
  AlohaQAgent(std::uint32_t frame_size, double learning_rate, Rng& rng)
      : frame_size_(frame_size), learning_rate_(learning_rate), q_(frame_size) {
    // Tiny random offsets desynchronize initial slot choices; otherwise every
    // agent argmaxes to slot 0 in lockstep and collisions never resolve.
    for (double& q : q_) q = 1e-3 * rng.next_unit();
    chosen_ = argmax_slot();
  }

  bool decide() { return frame_pos_ == chosen_; }

  void observe(Feedback f, bool transmitted) {
    if (transmitted) {
      const double reward = (f == Feedback::Success) ? 1.0 : -1.0;
      q_[chosen_] += learning_rate_ * (reward - q_[chosen_]);
    }
    ++frame_pos_;
    if (frame_pos_ == frame_size_) {
      frame_pos_ = 0;
      chosen_ = argmax_slot();
    }
  }

  std::uint32_t frame_size() const { return frame_size_; }
  std::uint32_t chosen_slot() const { return chosen_; }
  std::size_t weight_count() const { return q_.size(); }

 private:
  std::uint32_t argmax_slot() const {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < frame_size_; ++i)
      if (q_[i] > q_[best]) best = i;
    return best;
  }

  std::uint32_t frame_size_ = 1;
  double learning_rate_ = 0.1;
  std::vector<double> q_;
  std::uint32_t chosen_ = 0;
  std::uint32_t frame_pos_ = 0;
};

/// Slotted ALOHA with the genie-optimal access probability 1/n.
template <class Rng>
bool sa_decide(std::uint32_t active_users, Rng& rng) {
  if (active_users == 0) throw std::logic_error("slotted ALOHA queried with no active users");
  return rng.next_unit() < 1.0 / static_cast<double>(active_users);
}

/// Age-threshold random access: per active-user-count table of access
/// probability and AoI threshold.
struct AdraParams {
  double access_prob = 1.0;
  double aoi_threshold = 1.0;
};

class AdraTable {
 public:
  void set(std::uint32_t n, AdraParams p) { table_[n] = p; }
  const AdraParams& at(std::uint32_t n) const {
    auto it = table_.find(n);
    if (it == table_.end())
      throw std::runtime_error("ADRA parameter table has no entry for n=" + std::to_string(n));
    return it->second;
  }
  bool empty() const { return table_.empty(); }
  const std::map<std::uint32_t, AdraParams>& entries() const { return table_; }

 private:
  std::map<std::uint32_t, AdraParams> table_;
};

/// Transmit with probability p(n) only once the own AoI reaches the threshold.
template <class Rng>
bool adra_decide(double aoi, std::uint32_t active_users, const AdraTable& table, Rng& rng) {
  const AdraParams& p = table.at(active_users);
  if (aoi < p.aoi_threshold) return false;
  return rng.next_unit() < p.access_prob;
}

/// Centralized round-robin genie: exactly one transmitter per slot.
inline std::size_t rr_turn(std::size_t active_count, std::uint64_t t) {
  return static_cast<std::size_t>(t % active_count);
}

}  // namespace aqt
