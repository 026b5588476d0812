// Command-line front end: runs simulations and analysis sweeps, emitting CSV
// artifacts plus a JSON manifest per invocation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aqt/experiments.hpp"
#include "aqt/io.hpp"
#include "aqt/simulator.hpp"
#include "aqt/tree_analysis.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t event_seed = 0;
  std::uint64_t agent_seed = 0;
  bool has_event_seed = false, has_agent_seed = false;
  std::string protocol;
  std::uint32_t runs = 0;
};

json load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(aqt::io::read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config root must be a JSON object");
  return j;
}

void apply_overrides(aqt::SimConfig& cfg, const CommonOpts& opts) {
  if (opts.has_event_seed) cfg.event_seed = opts.event_seed;
  if (opts.has_agent_seed) cfg.agent_seed = opts.agent_seed;
  if (!opts.protocol.empty()) cfg.protocol = aqt::protocol_from_name(opts.protocol);
}

void write_outputs(const fs::path& dir, const json& config,
                   const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  std::vector<std::string> names;
  for (const auto& [name, content] : files) {
    aqt::io::write_file((dir / name).string(), content);
    names.push_back(name);
  }
  names.push_back("manifest.json");
  aqt::io::write_file((dir / "manifest.json").string(),
                      aqt::io::manifest(config, names).dump(2) + "\n");
}

int cmd_simulate(const CommonOpts& opts) {
  json j = load_config(opts.config_path);
  aqt::SimConfig cfg = aqt::io::parse_sim_config(j);
  apply_overrides(cfg, opts);
  aqt::Simulator sim(cfg);
  const aqt::RunSummary summary = sim.run();
  json manifest_cfg = aqt::io::sim_config_json(cfg);
  manifest_cfg["command"] = "simulate";
  write_outputs(opts.out_dir, manifest_cfg,
                {{"batches.csv", aqt::io::batches_csv(summary.batches)},
                 {"events.csv", aqt::io::events_csv(summary.events)}});
  std::printf("overall_mean_aoi=%s utilization=%s settled_fraction=%s\n",
              aqt::io::fmt(summary.overall_mean_aoi).c_str(),
              aqt::io::fmt(summary.overall_utilization).c_str(),
              aqt::io::fmt(summary.settled_fraction).c_str());
  return 0;
}

int cmd_compare(const CommonOpts& opts) {
  json j = load_config(opts.config_path);
  aqt::ExperimentSpec spec;
  spec.base = aqt::io::parse_sim_config(j, {"protocols", "runs"});
  apply_overrides(spec.base, opts);
  if (!j.contains("protocols")) throw std::runtime_error("compare config needs 'protocols'");
  for (const auto& name : j.at("protocols"))
    spec.protocols.push_back(aqt::protocol_from_name(name.get<std::string>()));
  spec.runs = j.value("runs", 50u);
  if (opts.runs) spec.runs = opts.runs;
  const std::vector<aqt::ProtocolResult> results = aqt::compare_protocols(spec);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("comparison.csv", aqt::io::comparison_csv(results));
  for (const aqt::ProtocolResult& r : results)
    files.emplace_back("bands_" + aqt::protocol_name(r.protocol) + ".csv",
                       aqt::io::bands_csv(r));
  files.emplace_back("events.csv", aqt::io::events_csv(results.front().events));
  json manifest_cfg = aqt::io::sim_config_json(spec.base);
  manifest_cfg["command"] = "compare";
  manifest_cfg["runs"] = spec.runs;
  json protos = json::array();
  for (aqt::Protocol p : spec.protocols) protos.push_back(aqt::protocol_name(p));
  manifest_cfg["protocols"] = protos;
  write_outputs(opts.out_dir, manifest_cfg, files);
  for (const aqt::ProtocolResult& r : results)
    std::printf("%-14s overall_mean_aoi=%s\n", aqt::protocol_name(r.protocol).c_str(),
                aqt::io::fmt(r.overall_mean_aoi).c_str());
  return 0;
}

int cmd_bounds(std::uint32_t n_min, std::uint32_t n_max, std::uint32_t j_min,
               std::uint32_t j_max, const std::string& out_dir) {
  std::string csv = "n,J,best,worst,skew\n";
  for (std::uint32_t n = n_min; n <= n_max; ++n) {
    for (std::uint32_t depth = std::max(j_min, aqt::min_depth(n)); depth <= j_max; ++depth) {
      csv += std::to_string(n) + "," + std::to_string(depth) + "," +
             aqt::io::fmt(aqt::best_case_aoi(n, depth)) + "," +
             aqt::io::fmt(aqt::worst_case_aoi(n, depth));
      csv += (n >= 2 && depth >= n - 1) ? "," + aqt::io::fmt(aqt::skew_bound(n)) : ",";
      csv += "\n";
    }
  }
  json cfg = {{"command", "bounds"}, {"n_min", n_min}, {"n_max", n_max},
              {"j_min", j_min},      {"j_max", j_max}};
  write_outputs(out_dir, cfg, {{"bounds.csv", csv}});
  return 0;
}

int cmd_resettle(const CommonOpts& opts) {
  json j = load_config(opts.config_path);
  aqt::SimConfig base = aqt::io::parse_sim_config(j, {"n_values", "runs", "cap", "events"});
  apply_overrides(base, opts);
  std::vector<std::uint32_t> n_values = j.value("n_values", std::vector<std::uint32_t>{13, 18, 23, 28});
  std::uint32_t runs = j.value("runs", 50u);
  if (opts.runs) runs = opts.runs;
  const std::uint64_t cap = j.value("cap", std::uint64_t{100000});
  std::vector<std::string> event_kinds = j.value("events", std::vector<std::string>{"arrival", "departure"});
  std::vector<aqt::ResettleStats> rows;
  for (std::uint32_t n : n_values)
    for (const std::string& kind : event_kinds) {
      if (kind != "arrival" && kind != "departure")
        throw std::runtime_error("event kind must be 'arrival' or 'departure'");
      rows.push_back(aqt::measure_resettling(base, n, kind == "arrival", runs, cap));
    }
  json manifest_cfg = aqt::io::sim_config_json(base);
  manifest_cfg["command"] = "resettle";
  manifest_cfg["runs"] = runs;
  manifest_cfg["cap"] = cap;
  manifest_cfg["n_values"] = n_values;
  write_outputs(opts.out_dir, manifest_cfg, {{"resettle.csv", aqt::io::resettle_csv(rows)}});
  std::fputs(aqt::io::resettle_csv(rows).c_str(), stdout);
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  json j = load_config(opts.config_path);
  aqt::ExperimentSpec spec;
  spec.base = aqt::io::parse_sim_config(j, {"runs", "grid", "objective"});
  apply_overrides(spec.base, opts);
  spec.protocols = {spec.base.protocol};
  spec.runs = j.value("runs", 5u);
  if (opts.runs) spec.runs = opts.runs;
  if (!j.contains("grid") || !j.at("grid").is_array() || j.at("grid").empty())
    throw std::runtime_error("sweep config needs a non-empty 'grid' array");
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  for (const json& axis : j.at("grid")) {
    aqt::io::require_keys(axis, {"param", "values"}, "grid axis");
    names.push_back(axis.at("param").get<std::string>());
    values.push_back(axis.at("values").get<std::vector<double>>());
  }
  const std::string obj_name = j.value("objective", std::string("mean_aoi"));
  aqt::Objective objective;
  if (obj_name == "mean_aoi") objective = aqt::Objective::MeanAoi;
  else if (obj_name == "utilization") objective = aqt::Objective::Utilization;
  else throw std::runtime_error("objective must be 'mean_aoi' or 'utilization'");
  const aqt::GridSearchResult result = aqt::grid_search(spec, names, values, objective);
  json manifest_cfg = aqt::io::sim_config_json(spec.base);
  manifest_cfg["command"] = "sweep";
  manifest_cfg["runs"] = spec.runs;
  manifest_cfg["objective"] = obj_name;
  write_outputs(opts.out_dir, manifest_cfg, {{"grid.csv", aqt::io::grid_csv(result)}});
  std::printf("best:");
  for (std::size_t i = 0; i < names.size(); ++i)
    std::printf(" %s=%s", names[i].c_str(), aqt::io::fmt(result.best.values[i]).c_str());
  std::printf(" %s=%s\n", obj_name.c_str(), aqt::io::fmt(result.best.objective).c_str());
  return 0;
}

int cmd_adra_oracle(std::uint32_t n_min, std::uint32_t n_max, std::uint64_t slots,
                    double p_step, std::uint32_t theta_steps, const std::string& out_dir) {
  std::vector<double> p_grid;
  for (std::uint32_t i = 1; i * p_step < 1.0 + 1e-12; ++i)
    p_grid.push_back(std::min(1.0, i * p_step));
  std::vector<double> theta_grid;
  // 1..4*n_max, thinned to at most theta_steps values per decade of range
  const std::uint32_t theta_max = 4 * n_max;
  const std::uint32_t stride = std::max(1u, theta_max / theta_steps);
  for (std::uint32_t th = 1; th <= theta_max; th += (th < 4 ? 1 : stride)) theta_grid.push_back(th);
  const aqt::AdraTable table = aqt::adra_oracle(n_min, n_max, p_grid, theta_grid, slots);
  json cfg = {{"command", "adra-oracle"}, {"n_min", n_min},       {"n_max", n_max},
              {"slots", slots},           {"p_step", p_step},     {"theta_steps", theta_steps}};
  write_outputs(out_dir, cfg, {{"adra_params.csv", aqt::io::adra_csv(table)}});
  std::fputs(aqt::io::adra_csv(table).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slotted-time simulator and analysis toolkit for policy-tree medium access"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::uint32_t n_min = 2, n_max = 32, j_min = 1, j_max = 7;
  std::uint64_t oracle_slots = 20000;
  double p_step = 0.05;
  std::uint32_t theta_steps = 16;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config_path, "JSON config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--event-seed", opts.event_seed, "override event seed")
        ->each([&](const std::string&) { opts.has_event_seed = true; });
    sub->add_option("--agent-seed", opts.agent_seed, "override agent seed")
        ->each([&](const std::string&) { opts.has_agent_seed = true; });
    sub->add_option("--runs", opts.runs, "override run count");
    sub->add_option("--protocol", opts.protocol, "override protocol");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "one run; batch + events CSVs");
  add_common(simulate, true);
  CLI::App* compare = app.add_subcommand("compare", "multi-protocol comparison on a shared event stream");
  add_common(compare, true);
  CLI::App* bounds = app.add_subcommand("bounds", "settled-tree AoI bounds table");
  bounds->add_option("--n-min", n_min);
  bounds->add_option("--n-max", n_max);
  bounds->add_option("--j-min", j_min);
  bounds->add_option("--j-max", j_max);
  bounds->add_option("--out", opts.out_dir, "output directory");
  CLI::App* resettle = app.add_subcommand("resettle", "resettling-time distributions");
  add_common(resettle, true);
  CLI::App* sweep = app.add_subcommand("sweep", "parameter grid search");
  add_common(sweep, true);
  CLI::App* oracle = app.add_subcommand("adra-oracle", "derive the ADRA parameter table");
  oracle->add_option("--n-min", n_min);
  oracle->add_option("--n-max", n_max);
  oracle->add_option("--slots", oracle_slots);
  oracle->add_option("--p-step", p_step);
  oracle->add_option("--theta-steps", theta_steps);
  oracle->add_option("--out", opts.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opts);
    if (compare->parsed()) return cmd_compare(opts);
    if (bounds->parsed()) return cmd_bounds(n_min, n_max, j_min, j_max, opts.out_dir);
    if (resettle->parsed()) return cmd_resettle(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (oracle->parsed()) return cmd_adra_oracle(n_min, n_max, oracle_slots, p_step, theta_steps, opts.out_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    std::cerr << (msg.find("config") != std::string::npos ? "config error: " : "error: ")
              << msg << "\n";
    return msg.find("config") != std::string::npos ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
