// netexp: batch front-end for the analysis, simulation, diagnostics and
// propensity workflows. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numerical error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "netexp/netexp.hpp"

namespace {

using netexp::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw netexp::data_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw netexp::config_error(path + ": " + e.what());
  }
}

void write_output(const std::string& dir, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  netexp::write_text_file(dir + "/" + name, content);
}

std::vector<int> parse_grid(const std::string& text) {
  // "lo:hi" or comma-separated values
  std::vector<int> grid;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const int lo = std::stoi(text.substr(0, colon));
    const int hi = std::stoi(text.substr(colon + 1));
    for (int b = lo; b <= hi; ++b) grid.push_back(b);
    return grid;
  }
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) grid.push_back(std::stoi(field));
  return grid;
}

netexp::AnalyzeInputs build_analyze_inputs(const json& cfg) {
  netexp::AnalyzeInputs in;
  in.nodes = netexp::load_node_table(cfg.at("nodes").get<std::string>());
  const auto edges = netexp::load_edge_list(cfg.at("edges").get<std::string>());
  in.graph = netexp::Graph(in.nodes.n, edges, cfg.value("directed", false), &in.load_report);
  in.mapping = netexp::exposure_from_json(cfg.at("exposure"));
  in.design = netexp::design_from_json(cfg.at("design"), in.nodes);
  if (cfg.contains("contrast"))
    in.contrast = netexp::contrast_from_json(cfg.at("contrast"), in.mapping.support_size());
  if (cfg.contains("specs")) in.specs = netexp::specs_from_json(cfg.at("specs"));
  if (cfg.contains("bandwidth") && !cfg.at("bandwidth").is_string()) {
    if (cfg.at("bandwidth").is_number_integer()) {
      in.grid = {cfg.at("bandwidth").get<int>()};
    } else {
      in.grid = cfg.at("bandwidth").at("grid").get<std::vector<int>>();
    }
  }
  in.mc_propensity_draws = cfg.value("mc_propensity_draws", 100000L);
  if (cfg.contains("seed"))
    in.seed = cfg.at("seed").get<std::uint64_t>();
  else if (in.mc_propensity_draws > 0)
    throw netexp::config_error("config: seed is required (Monte-Carlo propensities may be used)");
  in.threads = cfg.value("threads", 1);
  return in;
}

int run_analyze(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir_flag) {
  json cfg = load_json_file(config_path);
  for (const auto& o : overrides) netexp::apply_override(cfg, o);
  const std::string out_dir =
      !out_dir_flag.empty() ? out_dir_flag : cfg.value("out_dir", std::string("out"));
  netexp::AnalyzeInputs in = build_analyze_inputs(cfg);
  netexp::AnalysisResult result = netexp::run_analysis(in);
  write_output(out_dir, "estimates.csv", netexp::analysis_csv(result));
  write_output(out_dir, "estimates.json", netexp::analysis_to_json(result).dump(2) + "\n");
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "analyze: n=" << result.n << " effective_n=" << result.effective_n
            << " suggested_b=" << result.suggested_b << " -> " << out_dir << "\n";
  return 0;
}

int run_simulate(const std::string& preset, const std::string& config_path,
                 const std::vector<std::string>& overrides, long seed_flag,
                 const std::string& out_dir) {
  json cfg;
  if (!preset.empty()) {
    cfg = netexp::sim_config_to_json(netexp::make_preset(preset));
  } else if (!config_path.empty()) {
    cfg = load_json_file(config_path);
  } else {
    throw netexp::config_error("simulate: need --preset or --config");
  }
  if (seed_flag >= 0) {
    // one user seed drives the three internal streams
    std::uint64_t s = static_cast<std::uint64_t>(seed_flag);
    std::uint64_t mix = s;
    cfg["network_seed"] = netexp::splitmix64(mix);
    cfg["assignment_seed"] = netexp::splitmix64(mix);
    cfg["propensity_seed"] = netexp::splitmix64(mix);
  }
  for (const auto& o : overrides) netexp::apply_override(cfg, o);
  netexp::SimConfig sim_cfg = netexp::sim_config_from_json(cfg);
  netexp::SimResult result = netexp::run_monte_carlo(sim_cfg);
  write_output(out_dir, "simresult.csv", netexp::sim_result_csv(result));
  json out = netexp::sim_result_to_json(result);
  out["config"] = cfg;
  write_output(out_dir, "simresult.json", out.dump(2) + "\n");
  std::cout << "simulate: " << sim_cfg.name << " effective_n=" << result.effective_n
            << " b=" << result.bandwidth << " -> " << out_dir << "\n";
  return 0;
}

int run_diagnose(const std::string& edges_path, bool directed, const std::string& grid_text,
                 const std::string& out_dir) {
  const auto edges = netexp::load_edge_list(edges_path);
  long n = 0;
  for (const auto& [s, d] : edges) n = std::max<long>(n, std::max(s, d) + 1);
  netexp::LoadReport report;
  netexp::Graph g(n, edges, directed, &report);
  const std::vector<int> grid = parse_grid(grid_text);
  netexp::DiagnosticsReport result = netexp::diagnostics_report(g, grid);
  write_output(out_dir, "diagnostics.csv", netexp::diagnostics_csv(result));
  write_output(out_dir, "diagnostics.json", netexp::diagnostics_to_json(result).dump(2) + "\n");
  std::cout << "diagnose: n=" << n << " grid=" << grid_text << " -> " << out_dir << "\n";
  return 0;
}

int run_propensity(const std::string& config_path, const std::vector<std::string>& overrides,
                   long mc_draws_flag, const std::string& out_dir_flag) {
  json cfg = load_json_file(config_path);
  for (const auto& o : overrides) netexp::apply_override(cfg, o);
  if (mc_draws_flag > 0) cfg["mc_propensity_draws"] = mc_draws_flag;
  const std::string out_dir =
      !out_dir_flag.empty() ? out_dir_flag : cfg.value("out_dir", std::string("out"));
  netexp::AnalyzeInputs in = build_analyze_inputs(cfg);
  netexp::PropensityTable table = netexp::compute_propensity(
      in.mapping, in.design, in.graph, in.mc_propensity_draws, in.seed, in.threads);
  const netexp::ExposureSupport support = netexp::exposure_support(in.mapping);

  std::string csv = "id";
  for (long t = 0; t < table.pi.cols(); ++t) csv += ",pi_" + std::to_string(t);
  if (table.method == netexp::PropensityTable::Method::MonteCarlo)
    for (long t = 0; t < table.pi.cols(); ++t) csv += ",mc_se_" + std::to_string(t);
  csv += "\n";
  for (long i = 0; i < table.pi.rows(); ++i) {
    csv += std::to_string(i);
    for (long t = 0; t < table.pi.cols(); ++t) csv += "," + netexp::format_double(table.pi(i, t));
    if (table.method == netexp::PropensityTable::Method::MonteCarlo)
      for (long t = 0; t < table.pi.cols(); ++t)
        csv += "," + netexp::format_double(table.mc_std_err(i, t));
    csv += "\n";
  }
  write_output(out_dir, "propensity.csv", csv);

  json summary;
  summary["method"] =
      table.method == netexp::PropensityTable::Method::Exact ? "exact" : "monte_carlo";
  summary["mc_draws"] = table.mc_draws;
  summary["support"] = json::array();
  for (long t = 0; t < table.pi.cols(); ++t) summary["support"].push_back(support.label(t));
  try {
    netexp::EffectiveSample sample = netexp::effective_sample(table);
    summary["effective_n"] = sample.units.size();
    if (in.nodes.has_d) {
      const auto exposures = netexp::compute_exposures(in.mapping, in.nodes.d, in.graph);
      summary["cell_sizes"] =
          netexp::cell_counts(exposures, sample.units, in.mapping.support_size());
    }
  } catch (const netexp::data_error&) {
    summary["effective_n"] = 0;
  }
  write_output(out_dir, "propensity.json", summary.dump(2) + "\n");
  std::cout << "propensity: " << summary["method"] << " -> " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design-based estimation and inference for network experiments"};
  app.require_subcommand(1);

  std::vector<std::string> overrides;
  std::string config_path, preset, out_dir, edges_path, grid_text = "1:10";
  bool directed = false;
  long seed_flag = -1, mc_draws_flag = -1;

  auto* analyze = app.add_subcommand("analyze", "estimate exposure effects from data files");
  analyze->add_option("--config", config_path, "run configuration (JSON)")->required();
  analyze->add_option("--set", overrides, "override config entries, key=value");
  analyze->add_option("--out", out_dir, "output directory");

  auto* simulate = app.add_subcommand("simulate", "finite-population Monte-Carlo study");
  simulate->add_option("--preset", preset, "built-in configuration name");
  simulate->add_option("--config", config_path, "simulation configuration (JSON)");
  simulate->add_option("--set", overrides, "override config entries, key=value");
  simulate->add_option("--seed", seed_flag, "master seed for all random streams");
  simulate->add_option("--out", out_dir, "output directory")->default_val("out");

  auto* diagnose = app.add_subcommand("diagnose", "kernel negative-part moments over a grid");
  diagnose->add_option("--edges", edges_path, "edge list CSV")->required();
  diagnose->add_flag("--directed", directed, "treat the edge list as directed");
  diagnose->add_option("--grid", grid_text, "bandwidth grid, lo:hi or comma list");
  diagnose->add_option("--out", out_dir, "output directory")->default_val("out");

  auto* propensity = app.add_subcommand("propensity", "exposure propensity table");
  propensity->add_option("--config", config_path, "run configuration (JSON)")->required();
  propensity->add_option("--set", overrides, "override config entries, key=value");
  propensity->add_option("--mc-draws", mc_draws_flag, "Monte-Carlo draw count");
  propensity->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(analyze)) return run_analyze(config_path, overrides, out_dir);
    if (app.got_subcommand(simulate))
      return run_simulate(preset, config_path, overrides, seed_flag, out_dir);
    if (app.got_subcommand(diagnose))
      return run_diagnose(edges_path, directed, grid_text, out_dir);
    if (app.got_subcommand(propensity))
      return run_propensity(config_path, overrides, mc_draws_flag, out_dir);
  } catch (const netexp::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const netexp::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const netexp::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
