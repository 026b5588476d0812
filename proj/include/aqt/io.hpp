#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqt/experiments.hpp"
#include "aqt/simulator.hpp"

namespace aqt::io {

using nlohmann::json;

inline std::string fmt(double v) {
  // shortest representation that parses back to the exact same double
  char buf[40];
  for (int prec : {12, 15, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- CSV emitters (RFC 4180, numeric fields, header row, CRLF-free) ----

inline std::string batches_csv(const std::vector<BatchRow>& rows) {
  std::string s = "t_start,n,utilization,mean_aoi,settled_fraction\n";
  for (const BatchRow& r : rows)
    s += std::to_string(r.t_start) + "," + std::to_string(r.n) + "," + fmt(r.utilization) +
         "," + fmt(r.mean_aoi) + "," + fmt(r.settled_fraction) + "\n";
  return s;
}

inline std::string events_csv(const std::vector<EventRecord>& events) {
  std::string s = "t,user_id,event\n";
  for (const EventRecord& e : events)
    s += std::to_string(e.t) + "," + std::to_string(e.user) + "," +
         (e.arrival ? "arrive" : "depart") + "\n";
  return s;
}

inline std::string comparison_csv(const std::vector<ProtocolResult>& results) {
  std::string s = "protocol,overall_mean_aoi,overall_utilization\n";
  for (const ProtocolResult& r : results)
    s += protocol_name(r.protocol) + "," + fmt(r.overall_mean_aoi) + "," +
         fmt(r.overall_utilization) + "\n";
  return s;
}

inline std::string bands_csv(const ProtocolResult& r) {
  std::string s = "batch_start,mean,p10,p90,min,max,util_mean,util_min,util_max\n";
  for (const BandRow& b : r.bands)
    s += std::to_string(b.t_start) + "," + fmt(b.mean) + "," + fmt(b.p10) + "," + fmt(b.p90) +
         "," + fmt(b.min) + "," + fmt(b.max) + "," + fmt(b.util_mean) + "," + fmt(b.util_min) +
         "," + fmt(b.util_max) + "\n";
  return s;
}

inline std::string resettle_csv(const std::vector<ResettleStats>& rows) {
  std::string s = "n,event,runs,timeouts,min,q1,median,mean,q3,max\n";
  for (const ResettleStats& r : rows)
    s += std::to_string(r.n) + "," + (r.arrival ? "arrival" : "departure") + "," +
         std::to_string(r.runs) + "," + std::to_string(r.timeouts) + "," + fmt(r.min) + "," +
         fmt(r.q1) + "," + fmt(r.median) + "," + fmt(r.mean) + "," + fmt(r.q3) + "," +
         fmt(r.max) + "\n";
  return s;
}

inline std::string grid_csv(const GridSearchResult& r) {
  std::string s;
  for (const std::string& name : r.param_names) s += name + ",";
  s += "objective\n";
  for (const GridPoint& p : r.points) {
    for (double v : p.values) s += fmt(v) + ",";
    s += fmt(p.objective) + "\n";
  }
  return s;
}

inline std::string adra_csv(const AdraTable& table) {
  std::string s = "n,access_prob,aoi_threshold\n";
  for (const auto& [n, p] : table.entries())
    s += std::to_string(n) + "," + fmt(p.access_prob) + "," + fmt(p.aoi_threshold) + "\n";
  return s;
}

inline AdraTable parse_adra_csv(const std::string& content) {
  AdraTable table;
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || line.rfind("n,access_prob,aoi_threshold", 0) != 0)
    throw std::runtime_error("bad ADRA table header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::uint32_t n;
    double p, theta;
    if (std::sscanf(line.c_str(), "%u,%lf,%lf", &n, &p, &theta) != 3)
      throw std::runtime_error("bad ADRA table row: " + line);
    table.set(n, AdraParams{p, theta});
  }
  return table;
}

// ---- config parsing (strict: unknown keys are rejected) ----

inline void require_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::runtime_error("unknown config key '" + it.key() + "' in " + where);
}

inline AgentParams parse_agent_params(const json& j) {
  require_keys(j, {"eta", "epsilon", "alpha_plus", "alpha_minus", "gamma0", "gamma1", "w_init"},
               "agent");
  AgentParams p;
  p.eta = j.value("eta", p.eta);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.alpha_plus = j.value("alpha_plus", p.alpha_plus);
  p.alpha_minus = j.value("alpha_minus", p.alpha_minus);
  p.gamma0 = j.value("gamma0", p.gamma0);
  p.gamma1 = j.value("gamma1", p.gamma1);
  p.w_init = j.value("w_init", p.w_init);
  return p;
}

inline SimConfig parse_sim_config(const json& j, const std::set<std::string>& extra_allowed = {}) {
  std::set<std::string> allowed = {"M",     "k",          "n0",         "T",
                                   "J",     "batch",      "protocol",   "event_seed",
                                   "agent_seed", "agent", "aloha_q",    "adra_table",
                                   "record_slots"};
  allowed.insert(extra_allowed.begin(), extra_allowed.end());
  require_keys(j, allowed, "config");
  SimConfig cfg;
  cfg.total_users = j.value("M", cfg.total_users);
  cfg.mean_holding_time = j.value("k", cfg.mean_holding_time);
  cfg.initial_active = j.value("n0", cfg.initial_active);
  cfg.horizon = j.value("T", cfg.horizon);
  cfg.tree_depth = j.value("J", cfg.tree_depth);
  cfg.batch = j.value("batch", cfg.batch);
  if (j.contains("protocol")) cfg.protocol = protocol_from_name(j.at("protocol"));
  cfg.event_seed = j.value("event_seed", cfg.event_seed);
  cfg.agent_seed = j.value("agent_seed", cfg.agent_seed);
  cfg.record_slots = j.value("record_slots", cfg.record_slots);
  if (j.contains("agent")) cfg.qt_params = parse_agent_params(j.at("agent"));
  if (j.contains("aloha_q")) {
    require_keys(j.at("aloha_q"), {"frame_size", "learning_rate"}, "aloha_q");
    cfg.aloha_q_frame = j.at("aloha_q").value("frame_size", cfg.aloha_q_frame);
    cfg.aloha_q_rate = j.at("aloha_q").value("learning_rate", cfg.aloha_q_rate);
  }
  if (j.contains("adra_table"))
    cfg.adra = parse_adra_csv(read_file(j.at("adra_table").get<std::string>()));
  cfg.validate();
  if (cfg.protocol == Protocol::Maqt && cfg.mean_holding_time > 0 &&
      cfg.mean_holding_time / cfg.total_users < 2000)
    std::fprintf(stderr,
                 "warning: k/M = %.1f < 2000; events may arrive faster than the tree resettles\n",
                 cfg.mean_holding_time / cfg.total_users);
  return cfg;
}

inline json sim_config_json(const SimConfig& cfg) {
  json j;
  j["M"] = cfg.total_users;
  j["k"] = cfg.mean_holding_time;
  j["n0"] = cfg.initial_active;
  j["T"] = cfg.horizon;
  j["J"] = cfg.tree_depth;
  j["batch"] = cfg.batch;
  j["protocol"] = protocol_name(cfg.protocol);
  j["event_seed"] = cfg.event_seed;
  j["agent_seed"] = cfg.agent_seed;
  j["agent"] = {{"eta", cfg.qt_params.eta},
                {"epsilon", cfg.qt_params.epsilon},
                {"alpha_plus", cfg.qt_params.alpha_plus},
                {"alpha_minus", cfg.qt_params.alpha_minus},
                {"gamma0", cfg.qt_params.gamma0},
                {"gamma1", cfg.qt_params.gamma1},
                {"w_init", cfg.qt_params.w_init}};
  j["aloha_q"] = {{"frame_size", cfg.aloha_q_frame}, {"learning_rate", cfg.aloha_q_rate}};
  return j;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Manifest recording the exact config and seeds; regenerating from it yields
/// byte-identical outputs.
inline json manifest(const json& config, const std::vector<std::string>& outputs) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(config.dump())));
  json m;
  m["config"] = config;
  m["config_hash"] = hash;
  m["outputs"] = outputs;
  return m;
}

}  // namespace aqt::io
