#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "netexp/netexp.hpp"
#include "oracles.hpp"

using namespace netexp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return NETEXP_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Synthetic five-block fixture: a small geometric graph, block-randomized
// direct treatment, outcome with a covariate signal.
struct Fixture {
  fs::path dir;
  Graph graph;
  NodeTable nodes;

  explicit Fixture(const std::string& name) {
    dir = fs::temp_directory_path() / ("netexp_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);

    RngStream rng(2024, 0);
    auto net = gen_network({NetworkModel::Kind::Rgg, 60, 5.0, 0.0}, rng);
    graph = net.graph;

    std::ofstream edges(dir / "edges.csv");
    edges << "src,dst\n";
    for (long i = 0; i < graph.n(); ++i)
      for (int j : graph.sym_neighbors(static_cast<int>(i)))
        if (static_cast<int>(i) < j) edges << i << "," << j << "\n";
    edges.close();

    // block-complete by parity of id, half treated in each block
    std::vector<int> block(60);
    for (int i = 0; i < 60; ++i) block[static_cast<std::size_t>(i)] = i % 2;
    Design design = Design::block_complete_frac(block, 0.5);
    RngStream draw_rng(2024, 1);
    auto d = draw_assignment(design, graph, draw_rng);

    std::ofstream nodes_out(dir / "nodes.csv");
    nodes_out << "id,eligible,block,D,Y,x1\n";
    RngStream y_rng(2024, 2);
    for (long i = 0; i < 60; ++i) {
      const double x = y_rng.normal();
      const double y = 1.0 + 2.0 * d[static_cast<std::size_t>(i)] + 0.5 * x + y_rng.normal();
      nodes_out << i << ",1," << (i % 2 == 0 ? "even" : "odd") << ","
                << d[static_cast<std::size_t>(i)] << "," << format_double(y) << ","
                << format_double(x) << "\n";
    }
    nodes_out.close();
    nodes = load_node_table((dir / "nodes.csv").string());
  }

  json base_config() const {
    json cfg;
    cfg["edges"] = (dir / "edges.csv").string();
    cfg["nodes"] = (dir / "nodes.csv").string();
    cfg["directed"] = false;
    cfg["exposure"] = {{"kind", "direct"}};
    cfg["design"] = {{"kind", "block_complete"}, {"block_col", "block"}, {"treat_frac", 0.5}};
    cfg["specs"] = {"unadjusted", "additive", "fully_interacted"};
    cfg["seed"] = 7;
    cfg["out_dir"] = (dir / "out").string();
    return cfg;
  }

  fs::path write_config(const json& cfg, const std::string& name = "run.json") const {
    std::ofstream out(dir / name);
    out << cfg.dump(2);
    return dir / name;
  }
};

}  // namespace

TEST_CASE("analyze: table structure and agreement with the library") {
  Fixture fx("analyze");
  json cfg = fx.base_config();
  auto cfg_path = fx.write_config(cfg);
  REQUIRE(run_cli("analyze --config " + cfg_path.string()) == 0);

  const std::string csv = slurp(fx.dir / "out" / "estimates.csv");
  CHECK(csv.find("Estimate") != std::string::npos);
  CHECK(csv.find("b_n=0 SE") != std::string::npos);
  // direct exposures have locality 0: suggested bandwidth comes from the
  // path-length rule, grid covers 0..suggested+1
  json result = json::parse(slurp(fx.dir / "out" / "estimates.json"));
  const int suggested = result.at("suggested_bandwidth").get<int>();
  CHECK(result.at("bands").size() == static_cast<std::size_t>(suggested + 2));
  CHECK(csv.find("b_n=" + std::to_string(suggested) + " WLS+ SE") != std::string::npos);

  // library cross-check, bit-for-bit through the JSON text
  AnalyzeInputs in;
  in.nodes = fx.nodes;
  const auto edges = load_edge_list((fx.dir / "edges.csv").string());
  in.graph = Graph(in.nodes.n, edges, false, &in.load_report);
  in.mapping = exposure_from_json(cfg.at("exposure"));
  in.design = design_from_json(cfg.at("design"), in.nodes);
  in.seed = 7;
  AnalysisResult direct = run_analysis(in);
  for (std::size_t s = 0; s < direct.estimates.size(); ++s)
    for (std::size_t c = 0; c < direct.estimates[s].size(); ++c)
      CHECK(result.at("estimates")[s][c].get<double>() == direct.estimates[s][c]);
  CHECK(result.at("effective_n").get<long>() == direct.effective_n);
}

TEST_CASE("analyze: reruns are byte-identical") {
  Fixture fx("determinism");
  json cfg = fx.base_config();
  auto cfg_path = fx.write_config(cfg);
  REQUIRE(run_cli("analyze --config " + cfg_path.string()) == 0);
  const std::string first_csv = slurp(fx.dir / "out" / "estimates.csv");
  const std::string first_json = slurp(fx.dir / "out" / "estimates.json");
  REQUIRE(run_cli("analyze --config " + cfg_path.string()) == 0);
  CHECK(slurp(fx.dir / "out" / "estimates.csv") == first_csv);
  CHECK(slurp(fx.dir / "out" / "estimates.json") == first_json);
}

TEST_CASE("analyze: contrast estimates match a direct library call") {
  Fixture fx("contrast");
  json cfg = fx.base_config();
  cfg["contrast"] = {{"rows", {{{"label", "diff"}, {"g", {-1.0, 1.0}}}}}};
  auto cfg_path = fx.write_config(cfg);
  REQUIRE(run_cli("analyze --config " + cfg_path.string()) == 0);
  json result = json::parse(slurp(fx.dir / "out" / "estimates.json"));

  AnalyzeInputs in;
  in.nodes = fx.nodes;
  in.graph = Graph(in.nodes.n, load_edge_list((fx.dir / "edges.csv").string()), false);
  in.mapping = exposure_from_json(cfg.at("exposure"));
  in.design = design_from_json(cfg.at("design"), in.nodes);
  in.contrast = contrast_from_json(cfg.at("contrast"), 2);
  in.seed = 7;
  AnalysisResult direct = run_analysis(in);
  CHECK(result.at("estimates")[0][0].get<double>() == direct.estimates[0][0]);
  CHECK(result.at("contrasts")[0].get<std::string>() == "diff");
}

TEST_CASE("analyze error paths carry exit codes and name the offender") {
  Fixture fx("errors");
  json cfg = fx.base_config();
  cfg["nodes"] = (fx.dir / "missing.csv").string();
  CHECK(run_cli("analyze --config " + fx.write_config(cfg, "bad1.json").string()) == 3);

  json cfg2 = fx.base_config();
  cfg2["design"] = {{"kind", "no_such_design"}};
  CHECK(run_cli("analyze --config " + fx.write_config(cfg2, "bad2.json").string()) == 2);

  CHECK(run_cli("analyze --config /nonexistent.json") == 3);
  CHECK(run_cli("analyze") == 2);

  // a unit that realized an exposure with zero exact propensity: here we
  // declare every unit ineligible-but-treated via p = 0
  json cfg3 = fx.base_config();
  cfg3["design"] = {{"kind", "iid_bernoulli"}, {"p", 0.0}};
  CHECK(run_cli("analyze --config " + fx.write_config(cfg3, "bad3.json").string()) == 3);
}

TEST_CASE("simulate: preset runs and seeded reruns are identical") {
  Fixture fx("simulate");
  const std::string out1 = (fx.dir / "sim1").string();
  const std::string out2 = (fx.dir / "sim2").string();
  const std::string overrides =
      " --set network.n=80 --set draws_estimand=40 --set draws_estimation=40"
      " --set outcome.beta=0.3";
  REQUIRE(run_cli("simulate --preset table1-desk --seed 5" + overrides + " --out " + out1) == 0);
  REQUIRE(run_cli("simulate --preset table1-desk --seed 5" + overrides + " --out " + out2) == 0);
  CHECK(slurp(fs::path(out1) / "simresult.csv") == slurp(fs::path(out2) / "simresult.csv"));
  const std::string csv = slurp(fs::path(out1) / "simresult.csv");
  CHECK(csv.find("unadjusted") != std::string::npos);
  CHECK(csv.find("additive") != std::string::npos);
  CHECK(csv.find("fully_interacted") != std::string::npos);

  // invalid peer weight rejected before any draw, config exit code
  CHECK(run_cli("simulate --preset table1-desk --seed 5 --set outcome.beta=1.2 --out " +
                (fx.dir / "sim3").string()) == 2);
}

TEST_CASE("diagnose: grid rows and library agreement") {
  Fixture fx("diagnose");
  const std::string out = (fx.dir / "diag").string();
  REQUIRE(run_cli("diagnose --edges " + (fx.dir / "edges.csv").string() + " --grid 1:6 --out " +
                  out) == 0);
  json result = json::parse(slurp(fs::path(out) / "diagnostics.json"));
  REQUIRE(result.at("rows").size() == 6);

  DiagnosticsReport direct = diagnostics_report(fx.graph, {1, 2, 3, 4, 5, 6});
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(result.at("rows")[r].at("m1_minus").get<double>() == direct.rows[r].m1_minus);
    CHECK(result.at("rows")[r].at("max_j_minus").get<double>() == direct.rows[r].max_j_minus);
  }
  const std::string csv = slurp(fs::path(out) / "diagnostics.csv");
  CHECK(csv.find("m1_minus") != std::string::npos);
}

TEST_CASE("propensity: table export matches the library") {
  Fixture fx("propensity");
  json cfg = fx.base_config();
  cfg["exposure"] = {{"kind", "any_treated_neighbor"}};
  auto cfg_path = fx.write_config(cfg);
  const std::string out = (fx.dir / "prop").string();
  REQUIRE(run_cli("propensity --config " + cfg_path.string() + " --out " + out) == 0);
  json summary = json::parse(slurp(fs::path(out) / "propensity.json"));
  CHECK(summary.at("method") == "exact");

  auto design = design_from_json(cfg.at("design"), fx.nodes);
  auto table = exact_propensity(ExposureMapping::any_treated_neighbor(), design, fx.graph);
  CsvTable csv = read_csv((fs::path(out) / "propensity.csv").string());
  REQUIRE(static_cast<long>(csv.rows.size()) == fx.nodes.n);
  for (long i = 0; i < fx.nodes.n; ++i) {
    const double pi1 = parse_double(csv.rows[static_cast<std::size_t>(i)][2], "pi_1");
    CHECK(pi1 == Catch::Approx(table.pi(i, 1)).epsilon(1e-10));
  }

  // Monte-Carlo path via an unsupported closed form
  json cfg2 = fx.base_config();
  cfg2["exposure"] = {{"kind", "any_treated_friend_of_friend"}};
  cfg2["mc_propensity_draws"] = 4000;
  auto cfg2_path = fx.write_config(cfg2, "run2.json");
  REQUIRE(run_cli("propensity --config " + cfg2_path.string() + " --out " + out + "2") == 0);
  json summary2 = json::parse(slurp(fs::path(out + "2") / "propensity.json"));
  CHECK(summary2.at("method") == "monte_carlo");
}
