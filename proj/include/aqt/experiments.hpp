#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "aqt/simulator.hpp"

namespace aqt {

struct ExperimentSpec {
  SimConfig base;
  std::vector<Protocol> protocols;
  std::uint32_t runs = 50;

  void validate() const {
    base.validate();
    if (runs < 1) throw std::invalid_argument("run count must be >= 1");
    if (protocols.empty()) throw std::invalid_argument("protocol list is empty");
  }
};

/// Per-run config: run index r gets derived seeds, the event seed derivation
/// depending only on (base event seed, r) so all protocols see the identical
/// activation pattern.
inline SimConfig run_config(const SimConfig& base, Protocol protocol, std::uint32_t run) {
  SimConfig cfg = base;
  cfg.protocol = protocol;
  cfg.event_seed = RngStream::derive(base.event_seed, run).next_u64();
  cfg.agent_seed = RngStream::derive(base.agent_seed, run).next_u64();
  return cfg;
}

struct BandRow {
  std::uint64_t t_start;
  double mean, p10, p90, min, max;             // batch mean network AoI across runs
  double util_mean, util_min, util_max;        // batch utilization across runs
};

struct ProtocolResult {
  Protocol protocol;
  double overall_mean_aoi = 0.0;  // pooled over runs, weighted by slots with users
  double overall_utilization = 0.0;
  std::vector<double> per_run_aoi;
  std::vector<BandRow> bands;
  std::vector<EventRecord> events;  // of run 0, for the invariance check
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[std::min(i + 1, v.size() - 1)] - v[i]);
}

}  // namespace detail

/// Simulate every protocol against the identical activation event stream and
/// aggregate batch statistics across runs.
inline std::vector<ProtocolResult> compare_protocols(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<ProtocolResult> results;
  for (Protocol protocol : spec.protocols) {
    ProtocolResult res;
    res.protocol = protocol;
    std::vector<RunSummary> summaries;
    summaries.reserve(spec.runs);
    for (std::uint32_t r = 0; r < spec.runs; ++r) {
      Simulator sim(run_config(spec.base, protocol, r));
      summaries.push_back(sim.run());
    }
    double aoi_weighted = 0.0, util_sum = 0.0;
    std::uint64_t slot_total = 0;
    for (const RunSummary& s : summaries) {
      aoi_weighted += s.overall_mean_aoi * static_cast<double>(s.slots_with_users);
      slot_total += s.slots_with_users;
      util_sum += s.overall_utilization;
      res.per_run_aoi.push_back(s.overall_mean_aoi);
    }
    res.overall_mean_aoi = slot_total > 0 ? aoi_weighted / static_cast<double>(slot_total) : 0.0;
    res.overall_utilization = util_sum / static_cast<double>(spec.runs);
    const std::size_t batches = summaries.front().batches.size();
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<double> aoi, util;
      for (const RunSummary& s : summaries) {
        aoi.push_back(s.batches[b].mean_aoi);
        util.push_back(s.batches[b].utilization);
      }
      BandRow row;
      row.t_start = summaries.front().batches[b].t_start;
      row.mean = 0.0;
      for (double v : aoi) row.mean += v;
      row.mean /= static_cast<double>(aoi.size());
      row.p10 = detail::percentile(aoi, 0.10);
      row.p90 = detail::percentile(aoi, 0.90);
      row.min = *std::min_element(aoi.begin(), aoi.end());
      row.max = *std::max_element(aoi.begin(), aoi.end());
      row.util_mean = 0.0;
      for (double v : util) row.util_mean += v;
      row.util_mean /= static_cast<double>(util.size());
      row.util_min = *std::min_element(util.begin(), util.end());
      row.util_max = *std::max_element(util.begin(), util.end());
      res.bands.push_back(row);
    }
    res.events = summaries.front().events;
    results.push_back(std::move(res));
  }
  return results;
}

enum class Objective { MeanAoi, Utilization };

struct GridPoint {
  std::vector<double> values;  // in grid axis order
  double objective = 0.0;
};

struct GridSearchResult {
  std::vector<std::string> param_names;
  std::vector<GridPoint> points;  // row-major over the grid
  GridPoint best;
};

namespace detail {

inline void apply_param(SimConfig& cfg, const std::string& name, double value) {
  if (name == "eta") cfg.qt_params.eta = value;
  else if (name == "epsilon") cfg.qt_params.epsilon = value;
  else if (name == "alpha_plus") cfg.qt_params.alpha_plus = value;
  else if (name == "alpha_minus") cfg.qt_params.alpha_minus = value;
  else if (name == "gamma0") cfg.qt_params.gamma0 = value;
  else if (name == "gamma1") cfg.qt_params.gamma1 = value;
  else if (name == "w_init") cfg.qt_params.w_init = value;
  else if (name == "J") cfg.tree_depth = static_cast<std::uint32_t>(value);
  else if (name == "aloha_q_rate") cfg.aloha_q_rate = value;
  else throw std::invalid_argument("unknown sweep parameter: " + name);
}

}  // namespace detail

/// Exhaustive sweep over a parameter grid. The best point is the strict
/// arg-optimum; exact objective ties keep the lexicographically earlier grid
/// point (row-major order), so the winner is reproducible.
inline GridSearchResult grid_search(const ExperimentSpec& spec,
                                    const std::vector<std::string>& param_names,
                                    const std::vector<std::vector<double>>& param_values,
                                    Objective objective) {
  spec.validate();
  if (param_names.empty() || param_names.size() != param_values.size())
    throw std::invalid_argument("grid is empty or malformed");
  for (const auto& axis : param_values)
    if (axis.empty()) throw std::invalid_argument("empty grid axis");
  GridSearchResult out;
  out.param_names = param_names;
  std::vector<std::size_t> idx(param_names.size(), 0);
  const Protocol protocol = spec.protocols.front();
  bool done = false;
  while (!done) {
    GridPoint pt;
    for (std::size_t a = 0; a < idx.size(); ++a) pt.values.push_back(param_values[a][idx[a]]);
    double acc = 0.0;
    for (std::uint32_t r = 0; r < spec.runs; ++r) {
      SimConfig cfg = run_config(spec.base, protocol, r);
      for (std::size_t a = 0; a < idx.size(); ++a) detail::apply_param(cfg, param_names[a], pt.values[a]);
      const RunSummary s = Simulator(cfg).run();
      acc += objective == Objective::MeanAoi ? s.overall_mean_aoi : s.overall_utilization;
    }
    pt.objective = acc / static_cast<double>(spec.runs);
    const bool better =
        out.points.empty() ||
        (objective == Objective::MeanAoi ? pt.objective < out.best.objective
                                         : pt.objective > out.best.objective);
    if (better) out.best = pt;
    out.points.push_back(std::move(pt));
    // odometer increment, last axis fastest
    done = true;
    for (std::size_t a = idx.size(); a-- > 0;) {
      if (++idx[a] < param_values[a].size()) { done = false; break; }
      idx[a] = 0;
    }
  }
  return out;
}

/// Offline parameterization of the age-threshold baseline: for each active
/// user count n, pick the (access probability, AoI threshold) pair minimizing
/// the simulated mean network AoI at static n.
inline AdraTable adra_oracle(std::uint32_t n_min, std::uint32_t n_max,
                             const std::vector<double>& p_grid,
                             const std::vector<double>& theta_grid, std::uint64_t slots,
                             std::uint64_t seed = 7) {
  if (p_grid.empty() || theta_grid.empty()) throw std::invalid_argument("empty grid");
  AdraTable table;
  for (std::uint32_t n = n_min; n <= n_max; ++n) {
    double best_aoi = 0.0;
    AdraParams best;
    bool first = true;
    for (double theta : theta_grid) {
      if (theta > 4.0 * n && theta > 1.0) continue;  // thresholds beyond ~4n are never optimal
      for (double p : p_grid) {
        SimConfig cfg;
        cfg.total_users = n;
        cfg.initial_active = n;
        cfg.mean_holding_time = 0;
        cfg.horizon = slots;
        cfg.protocol = Protocol::Adra;
        cfg.adra.set(n, AdraParams{p, theta});
        cfg.event_seed = RngStream::derive(seed, n).next_u64();
        cfg.agent_seed = RngStream::derive(seed ^ 0xadaadaULL, n).next_u64();
        const RunSummary s = Simulator(cfg).run();
        if (first || s.overall_mean_aoi < best_aoi) {
          best_aoi = s.overall_mean_aoi;
          best = AdraParams{p, theta};
          first = false;
        }
      }
    }
    table.set(n, best);
  }
  return table;
}

}  // namespace aqt
