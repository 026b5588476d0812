#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aqt/agents.hpp"
#include "aqt/policy_tree.hpp"
#include "aqt/rng.hpp"

namespace aqt {

enum class Protocol { Maqt, AlohaQt, AlohaQ, SlottedAloha, Adra, RoundRobin };

inline std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Maqt: return "maqt";
    case Protocol::AlohaQt: return "aloha_qt";
    case Protocol::AlohaQ: return "aloha_q";
    case Protocol::SlottedAloha: return "slotted_aloha";
    case Protocol::Adra: return "adra";
    case Protocol::RoundRobin: return "round_robin";
  }
  throw std::logic_error("unreachable");
}

inline Protocol protocol_from_name(const std::string& name) {
  if (name == "maqt") return Protocol::Maqt;
  if (name == "aloha_qt") return Protocol::AlohaQt;
  if (name == "aloha_q") return Protocol::AlohaQ;
  if (name == "slotted_aloha") return Protocol::SlottedAloha;
  if (name == "adra") return Protocol::Adra;
  if (name == "round_robin") return Protocol::RoundRobin;
  throw std::invalid_argument("unknown protocol: " + name);
}

struct SimConfig {
  std::uint32_t total_users = 32;   // M
  double mean_holding_time = 50000; // k; 0 disables activation dynamics
  std::uint32_t initial_active = 16;
  std::uint64_t horizon = 50000;    // T, slots
  std::uint32_t tree_depth = 5;     // J
  std::uint32_t batch = 100;        // reporting batch, slots
  Protocol protocol = Protocol::Maqt;
  AgentParams qt_params;
  std::uint32_t aloha_q_frame = 0;  // 0 -> 2^J
  double aloha_q_rate = 0.1;
  AdraTable adra;
  std::uint64_t event_seed = 1;
  std::uint64_t agent_seed = 2;
  bool record_slots = false;

  void validate() const {
    if (initial_active < 1 || initial_active > total_users)
      throw std::invalid_argument("need 1 <= n0 <= M");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (mean_holding_time < 0) throw std::invalid_argument("k must be >= 0");
    qt_params.validate();
  }
};

struct EventRecord {
  std::uint64_t t;
  std::uint32_t user;
  bool arrival;  // false -> departure
};

struct BatchRow {
  std::uint64_t t_start;
  std::uint32_t n;  // active count at batch start
  double utilization;
  double mean_aoi;  // average over the batch's slots with n >= 1
  double settled_fraction;
};

struct SlotRecord {
  std::uint64_t t;
  std::uint32_t n;
  Feedback feedback;
  double mean_aoi;  // over active users, at the start of the slot
  bool settled;
  std::uint64_t active_mask;
  std::uint64_t tx_mask;
};

struct RunSummary {
  std::vector<BatchRow> batches;
  std::vector<EventRecord> events;
  std::vector<SlotRecord> slots;  // only when record_slots
  double overall_mean_aoi = 0.0;  // time average over slots with n >= 1
  double overall_utilization = 0.0;
  double settled_fraction = 0.0;
  std::uint64_t slots_with_users = 0;
};

/// True iff the window holds at least 2^J outcomes and all of them are
/// successes.
inline bool detect_settled(const std::vector<Feedback>& history, std::uint32_t tree_depth) {
  const std::uint64_t window = std::uint64_t{1} << tree_depth;
  if (history.size() < window) return false;
  for (std::size_t i = history.size() - window; i < history.size(); ++i)
    if (history[i] != Feedback::Success) return false;
  return true;
}

/// One deterministic slotted-time run. All randomness flows from two named
/// seeds: the event seed drives activation dynamics, the agent seed drives
/// every per-agent draw, through independent per-user derived streams.
class Simulator {
 public:
  explicit Simulator(const SimConfig& config) : cfg_(config) {
    cfg_.validate();
    if (cfg_.total_users > 64)
      throw std::invalid_argument("at most 64 users supported (bitmask logs)");
    users_.resize(cfg_.total_users);
    for (std::uint32_t u = 0; u < cfg_.total_users; ++u) {
      users_[u].event_stream = RngStream::derive(cfg_.event_seed, u);
      users_[u].agent_stream = RngStream::derive(cfg_.agent_seed, u);
    }
    for (std::uint32_t u = 0; u < cfg_.initial_active; ++u) activate(u, /*log=*/false);
  }

  const SimConfig& config() const { return cfg_; }
  std::uint64_t now() const { return t_; }
  std::uint32_t active_count() const { return active_count_; }
  bool user_active(std::uint32_t u) const { return users_[u].active; }
  std::uint64_t user_aoi(std::uint32_t u) const { return users_[u].aoi; }
  const QtAgent& qt_agent(std::uint32_t u) const { return users_[u].qt; }
  const AlohaQAgent& aloha_q_agent(std::uint32_t u) const { return users_[u].aq; }

  /// Consecutive successes observed so far (the settledness observer).
  std::uint64_t success_streak() const { return success_streak_; }
  bool observer_settled() const {
    return success_streak_ >= (std::uint64_t{1} << cfg_.tree_depth);
  }
  void reset_observer() { success_streak_ = 0; }

  /// Structural settledness (tree-protocol runs): every active agent frozen,
  /// frozen schedules pairwise non-conflicting, and their periods tile every
  /// slot exactly once. From this state every future slot is a success until
  /// the next activity event.
  bool settled_tree() const {
    std::vector<Schedule> leaves;
    for (std::uint32_t u = 0; u < cfg_.total_users; ++u)
      if (users_[u].active) {
        if (!users_[u].qt.settled()) return false;
        leaves.push_back(users_[u].qt.frozen_schedule());
      }
    if (leaves.empty()) return false;
    for (std::size_t i = 0; i < leaves.size(); ++i)
      for (std::size_t j = i + 1; j < leaves.size(); ++j)
        if (conflicts(leaves[i], leaves[j])) return false;
    std::uint64_t kraft = 0;  // in units of 2^-J
    for (const Schedule& s : leaves) kraft += std::uint64_t{1} << (cfg_.tree_depth - s.level);
    return kraft == std::uint64_t{1} << cfg_.tree_depth;
  }

  void activate(std::uint32_t u) { activate(u, true); }
  void deactivate(std::uint32_t u) { deactivate(u, true); }

  const std::vector<EventRecord>& events() const { return events_; }

  SlotRecord step() {
    // (a) activation dynamics, evaluated before decisions.
    if (cfg_.mean_holding_time > 0) {
      const double p = 1.0 / cfg_.mean_holding_time;
      for (std::uint32_t u = 0; u < cfg_.total_users; ++u) {
        if (users_[u].event_stream.next_unit() < p) {
          if (users_[u].active) deactivate(u, true);
          else activate(u, true);
        }
      }
    }

    // (b) decisions.
    std::uint64_t active_mask = 0, tx_mask = 0;
    int transmitters = 0;
    active_ids_.clear();
    for (std::uint32_t u = 0; u < cfg_.total_users; ++u)
      if (users_[u].active) active_ids_.push_back(u);
    const std::uint32_t n = static_cast<std::uint32_t>(active_ids_.size());
    double aoi_sum = 0.0;
    for (std::uint32_t u : active_ids_) {
      active_mask |= std::uint64_t{1} << u;
      aoi_sum += static_cast<double>(users_[u].aoi);
      bool tx = false;
      switch (cfg_.protocol) {
        case Protocol::Maqt:
        case Protocol::AlohaQt:
          tx = users_[u].qt.decide();
          break;
        case Protocol::AlohaQ:
          tx = users_[u].aq.decide();
          break;
        case Protocol::SlottedAloha:
          tx = sa_decide(n, users_[u].agent_stream);
          break;
        case Protocol::Adra:
          tx = adra_decide(static_cast<double>(users_[u].aoi), n, cfg_.adra,
                           users_[u].agent_stream);
          break;
        case Protocol::RoundRobin:
          tx = (u == active_ids_[rr_turn(n, t_)]);
          break;
      }
      users_[u].decision = tx;
      if (tx) {
        tx_mask |= std::uint64_t{1} << u;
        ++transmitters;
      }
    }

    // (c) channel outcome, (d) broadcast.
    const Feedback fb = feedback_for(transmitters);
    for (std::uint32_t u : active_ids_) {
      switch (cfg_.protocol) {
        case Protocol::Maqt:
        case Protocol::AlohaQt:
          users_[u].qt.observe(fb, users_[u].decision, users_[u].agent_stream);
          break;
        case Protocol::AlohaQ:
          users_[u].aq.observe(fb, users_[u].decision);
          break;
        default:
          break;  // stateless policies
      }
    }

    // (e) AoI recursion.
    for (std::uint32_t u : active_ids_) {
      if (users_[u].decision && fb == Feedback::Success) users_[u].aoi = 1;
      else ++users_[u].aoi;
    }

    success_streak_ = (n > 0 && fb == Feedback::Success) ? success_streak_ + 1 : 0;

    SlotRecord rec;
    rec.t = t_;
    rec.n = n;
    rec.feedback = fb;
    rec.mean_aoi = n > 0 ? aoi_sum / n : 0.0;
    rec.settled = observer_settled();
    rec.active_mask = active_mask;
    rec.tx_mask = tx_mask;
    ++t_;
    return rec;
  }

  RunSummary run() {
    RunSummary out;
    double overall_aoi_sum = 0.0;
    std::uint64_t successes = 0, settled_slots = 0;
    std::uint64_t batch_start = 0;
    std::uint32_t batch_n0 = active_count_;
    std::uint64_t batch_successes = 0, batch_settled = 0, batch_aoi_slots = 0;
    double batch_aoi_sum = 0.0;
    for (std::uint64_t t = 0; t < cfg_.horizon; ++t) {
      if (t == batch_start) batch_n0 = active_count_;
      const SlotRecord rec = step();
      if (cfg_.record_slots) out.slots.push_back(rec);
      if (rec.feedback == Feedback::Success) { ++successes; ++batch_successes; }
      if (rec.settled) { ++settled_slots; ++batch_settled; }
      if (rec.n > 0) {
        overall_aoi_sum += rec.mean_aoi;
        ++out.slots_with_users;
        batch_aoi_sum += rec.mean_aoi;
        ++batch_aoi_slots;
      }
      if ((t + 1) % cfg_.batch == 0 || t + 1 == cfg_.horizon) {
        const double len = static_cast<double>(t + 1 - batch_start);
        out.batches.push_back(BatchRow{
            batch_start, batch_n0, static_cast<double>(batch_successes) / len,
            batch_aoi_slots > 0 ? batch_aoi_sum / static_cast<double>(batch_aoi_slots) : 0.0,
            static_cast<double>(batch_settled) / len});
        batch_start = t + 1;
        batch_successes = 0;
        batch_settled = 0;
        batch_aoi_sum = 0.0;
        batch_aoi_slots = 0;
      }
    }
    out.events = events_;
    out.overall_mean_aoi =
        out.slots_with_users > 0 ? overall_aoi_sum / static_cast<double>(out.slots_with_users)
                                 : 0.0;
    out.overall_utilization =
        static_cast<double>(successes) / static_cast<double>(cfg_.horizon);
    out.settled_fraction =
        static_cast<double>(settled_slots) / static_cast<double>(cfg_.horizon);
    return out;
  }

 private:
  struct User {
    bool active = false;
    std::uint64_t aoi = 0;
    bool decision = false;
    QtAgent qt;
    AlohaQAgent aq;
    RngStream event_stream;
    RngStream agent_stream;
  };

  void activate(std::uint32_t u, bool log) {
    User& usr = users_[u];
    usr.active = true;
    usr.aoi = 1;  // monitor opens a fresh record at activation
    switch (cfg_.protocol) {
      case Protocol::Maqt:
        usr.qt = QtAgent(QtVariant::Maqt, cfg_.tree_depth, cfg_.qt_params, usr.agent_stream);
        break;
      case Protocol::AlohaQt:
        usr.qt = QtAgent(QtVariant::AlohaQt, cfg_.tree_depth, cfg_.qt_params, usr.agent_stream);
        break;
      case Protocol::AlohaQ: {
        const std::uint32_t frame =
            cfg_.aloha_q_frame ? cfg_.aloha_q_frame
                               : static_cast<std::uint32_t>(1u << cfg_.tree_depth);
        usr.aq = AlohaQAgent(frame, cfg_.aloha_q_rate, usr.agent_stream);
        break;
      }
      default:
        break;
    }
    ++active_count_;
    if (log) events_.push_back(EventRecord{t_, u, true});
  }

  void deactivate(std::uint32_t u, bool log) {
    users_[u].active = false;  // learning state is discarded
    --active_count_;
    if (log) events_.push_back(EventRecord{t_, u, false});
  }

  SimConfig cfg_;
  std::vector<User> users_;
  std::vector<std::uint32_t> active_ids_;
  std::vector<EventRecord> events_;
  std::uint64_t t_ = 0;
  std::uint32_t active_count_ = 0;
  std::uint64_t success_streak_ = 0;
};

struct ResettleStats {
  std::uint32_t n;
  bool arrival;
  std::uint32_t runs = 0;
  std::uint32_t timeouts = 0;
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
  std::vector<std::uint64_t> samples;
};

/// Drive a static-n modified-variant system to a genuinely settled tree,
/// inject one arrival or departure, and count slots until the settledness
/// detector (a full success window) fires again. The detector window is not
/// cleared at the event, so a departure whose freed slots have not yet come
/// around can be detected almost immediately. Timeouts are reported, not
/// dropped.
inline ResettleStats measure_resettling(const SimConfig& base, std::uint32_t n, bool arrival,
                                        std::uint32_t runs,
                                        std::uint64_t cap = 100000) {
  ResettleStats stats;
  stats.n = n;
  stats.arrival = arrival;
  stats.runs = runs;
  for (std::uint32_t r = 0; r < runs; ++r) {
    SimConfig cfg = base;
    cfg.mean_holding_time = 0;  // events are injected manually
    cfg.initial_active = n;
    cfg.event_seed = RngStream::derive(base.event_seed, r).next_u64();
    cfg.agent_seed = RngStream::derive(base.agent_seed, r).next_u64();
    Simulator sim(cfg);
    std::uint64_t t = 0;
    while (!(sim.settled_tree() && sim.observer_settled()) && t < cap) { sim.step(); ++t; }
    if (!(sim.settled_tree() && sim.observer_settled())) { ++stats.timeouts; continue; }
    RngStream pick = RngStream::derive(cfg.event_seed, 0x5eed);
    if (arrival) {
      if (n >= cfg.total_users) throw std::invalid_argument("no inactive user to activate");
      sim.activate(n);  // lowest inactive id
    } else {
      sim.deactivate(static_cast<std::uint32_t>(pick.next_u64() % n));
    }
    std::uint64_t elapsed = 0;
    bool detected = false;
    while (elapsed < cap) {
      sim.step();
      ++elapsed;
      if (sim.observer_settled()) { detected = true; break; }
    }
    if (!detected) { ++stats.timeouts; continue; }
    stats.samples.push_back(elapsed);
  }
  if (!stats.samples.empty()) {
    std::vector<std::uint64_t> s = stats.samples;
    std::sort(s.begin(), s.end());
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(s.size() - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(i);
      const double lo = static_cast<double>(s[i]);
      const double hi = static_cast<double>(s[std::min(i + 1, s.size() - 1)]);
      return lo + frac * (hi - lo);
    };
    stats.min = static_cast<double>(s.front());
    stats.max = static_cast<double>(s.back());
    stats.q1 = quantile(0.25);
    stats.median = quantile(0.5);
    stats.q3 = quantile(0.75);
    double total = 0;
    for (std::uint64_t v : s) total += static_cast<double>(v);
    stats.mean = total / static_cast<double>(s.size());
  }
  return stats;
}

}  // namespace aqt
