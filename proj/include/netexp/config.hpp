#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "netexp/analysis.hpp"
#include "netexp/diagnostics.hpp"
#include "netexp/simulate.hpp"

namespace netexp {

using nlohmann::json;

inline ExposureMapping exposure_from_json(const json& j) {
  auto component = [](const json& cj) {
    ExposureComponent comp;
    const std::string kind = cj.at("kind").get<std::string>();
    if (kind == "direct")
      comp.kind = ExposureKind::Direct;
    else if (kind == "any_treated_neighbor")
      comp.kind = ExposureKind::AnyTreatedNeighbor;
    else if (kind == "any_treated_friend_of_friend")
      comp.kind = ExposureKind::AnyTreatedFriendOfFriend;
    else
      throw config_error("exposure: unknown kind '" + kind + "'");
    if (cj.contains("arm_filter")) comp.arm_filter = cj.at("arm_filter").get<std::vector<int>>();
    return comp;
  };
  ExposureMapping mapping;
  if (j.at("kind").get<std::string>() == "factorial") {
    for (const auto& cj : j.at("components")) mapping.components.push_back(component(cj));
  } else {
    mapping.components.push_back(component(j));
  }
  mapping.validate();
  return mapping;
}

inline Contrast contrast_from_json(const json& j, long cells) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "difference") return Contrast::difference(cells);
    if (name == "identity") return Contrast::identity(cells);
    throw config_error("contrast: unknown preset '" + name + "'");
  }
  Contrast contrast;
  const auto& rows = j.at("rows");
  contrast.g.resize(static_cast<long>(rows.size()), cells);
  long r = 0;
  for (const auto& row : rows) {
    const auto g = row.at("g").get<std::vector<double>>();
    if (static_cast<long>(g.size()) != cells)
      throw config_error("contrast: row has " + std::to_string(g.size()) +
                         " entries for " + std::to_string(cells) + " exposure values");
    for (long c = 0; c < cells; ++c) contrast.g(r, c) = g[static_cast<std::size_t>(c)];
    contrast.labels.push_back(row.value("label", "c" + std::to_string(r)));
    ++r;
  }
  return contrast;
}

inline std::vector<FitSpec> specs_from_json(const json& j) {
  std::vector<FitSpec> specs;
  for (const auto& name : j.get<std::vector<std::string>>()) {
    if (name == "unadjusted")
      specs.push_back(FitSpec::Unadjusted);
    else if (name == "additive")
      specs.push_back(FitSpec::Additive);
    else if (name == "fully_interacted")
      specs.push_back(FitSpec::FullyInteracted);
    else if (name == "ht")
      specs.push_back(FitSpec::HtTransformed);
    else
      throw config_error("specs: unknown spec '" + name + "'");
  }
  if (specs.empty()) throw config_error("specs: empty list");
  return specs;
}

// Design for observed data; per-unit quantities come from the node table.
inline Design design_from_json(const json& j, const NodeTable& nodes) {
  const std::string kind = j.at("kind").get<std::string>();
  std::vector<bool> eligible = nodes.eligible;
  if (kind == "iid_bernoulli") {
    Eigen::VectorXd p(nodes.n);
    if (j.contains("p_col")) {
      const std::string col = j.at("p_col").get<std::string>();
      if (col != "p" || !nodes.has_p)
        throw config_error("design: p_col '" + col + "' not found in the node table");
      p = nodes.p;
    } else {
      p.setConstant(j.at("p").get<double>());
    }
    return Design::iid_bernoulli(std::move(p), std::move(eligible));
  }
  if (kind == "block_complete") {
    if (!nodes.has_block) throw config_error("design: block_complete needs a block column");
    std::vector<int> block = nodes.block;
    for (long i = 0; i < nodes.n; ++i)
      if (!eligible[static_cast<std::size_t>(i)]) block[static_cast<std::size_t>(i)] = -1;
    if (j.value("observed_counts", false)) {
      if (!nodes.has_d) throw config_error("design: observed_counts needs a D column");
      int n_blocks = 0;
      for (int b : block) n_blocks = std::max(n_blocks, b + 1);
      std::vector<long> counts(static_cast<std::size_t>(n_blocks), 0);
      for (long i = 0; i < nodes.n; ++i)
        if (block[static_cast<std::size_t>(i)] >= 0 && nodes.d[static_cast<std::size_t>(i)] != 0)
          ++counts[static_cast<std::size_t>(block[static_cast<std::size_t>(i)])];
      return Design::block_complete(std::move(block), std::move(counts));
    }
    return Design::block_complete_frac(block, j.at("treat_frac").get<double>());
  }
  if (kind == "sequential_neighbor") {
    Eigen::VectorXd base(nodes.n);
    if (j.contains("base_p_col")) {
      if (!nodes.has_p) throw config_error("design: base_p_col needs the p column");
      base = nodes.p;
    } else {
      base.setConstant(j.at("base_p").get<double>());
    }
    return Design::sequential_neighbor(std::move(base), j.at("modifier_factor").get<double>(),
                                       std::move(eligible));
  }
  throw config_error("design: unknown kind '" + kind + "'");
}

// ---- simulation configs ----

inline json sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["network"]["kind"] = cfg.network.kind == NetworkModel::Kind::Rgg ? "rgg" : "erdos_renyi";
  j["network"]["n"] = cfg.network.n;
  j["network"]["kappa"] = cfg.network.kappa;
  j["network"]["expected_degree"] = cfg.network.expected_degree;
  json& oj = j["outcome"];
  switch (cfg.outcome.kind) {
    case OutcomeModel::Kind::LinearInMeans:
      oj["kind"] = "linear_in_means";
      oj["alpha"] = cfg.outcome.lim.alpha;
      oj["beta"] = cfg.outcome.lim.beta;
      oj["delta"] = cfg.outcome.lim.delta;
      oj["xi"] = cfg.outcome.lim.xi;
      oj["gamma"] = cfg.outcome.lim.gamma;
      break;
    case OutcomeModel::Kind::ComplexContagion:
      oj["kind"] = "complex_contagion";
      oj["alpha"] = cfg.outcome.contagion.alpha;
      oj["beta"] = cfg.outcome.contagion.beta;
      oj["delta"] = cfg.outcome.contagion.delta;
      oj["xi"] = cfg.outcome.contagion.xi;
      oj["gamma"] = cfg.outcome.contagion.gamma;
      oj["iteration_cap"] = cfg.outcome.contagion.iteration_cap;
      break;
    case OutcomeModel::Kind::LinearCustom:
      oj["kind"] = "linear_custom";
      oj["intercept"] = cfg.outcome.custom.intercept;
      oj["neighbor_treated_share"] = cfg.outcome.custom.neighbor_treated_share;
      oj["direct"] = cfg.outcome.custom.direct;
      oj["covariate"] = cfg.outcome.custom.covariate;
      oj["direct_exp_x"] = cfg.outcome.custom.direct_exp_x;
      oj["direct_exp_x2"] = cfg.outcome.custom.direct_exp_x2;
      oj["neighbor_covariate_share"] = cfg.outcome.custom.neighbor_covariate_share;
      break;
  }
  oj["homophily"] = cfg.outcome.homophily;
  oj["noise_sd"] = cfg.outcome.noise_sd;
  json& dj = j["design"];
  switch (cfg.design.kind) {
    case SimDesignSpec::Kind::IidBernoulli:
      dj["kind"] = "iid_bernoulli";
      if (cfg.design.per_unit_uniform_p)
        dj["per_unit_uniform"] = {cfg.design.p_lo, cfg.design.p_hi};
      else
        dj["p"] = cfg.design.p;
      break;
    case SimDesignSpec::Kind::BlockComplete:
      dj["kind"] = "block_complete";
      dj["treat_frac"] = cfg.design.treat_frac;
      break;
    case SimDesignSpec::Kind::SequentialNeighbor:
      dj["kind"] = "sequential_neighbor";
      dj["base_p_uniform"] = {cfg.design.base_p_lo, cfg.design.base_p_hi};
      dj["modifier_factor"] = cfg.design.modifier_factor;
      break;
  }
  json ej;
  if (cfg.mapping.n_components() == 1) {
    const auto& comp = cfg.mapping.components[0];
    ej["kind"] = comp.kind == ExposureKind::Direct ? "direct"
                 : comp.kind == ExposureKind::AnyTreatedNeighbor
                     ? "any_treated_neighbor"
                     : "any_treated_friend_of_friend";
    ej["arm_filter"] = comp.arm_filter;
  } else {
    ej["kind"] = "factorial";
    for (const auto& comp : cfg.mapping.components) {
      json cj;
      cj["kind"] = comp.kind == ExposureKind::Direct ? "direct"
                   : comp.kind == ExposureKind::AnyTreatedNeighbor
                       ? "any_treated_neighbor"
                       : "any_treated_friend_of_friend";
      cj["arm_filter"] = comp.arm_filter;
      ej["components"].push_back(cj);
    }
  }
  j["exposure"] = ej;
  std::vector<std::string> spec_names;
  for (FitSpec s : cfg.specs) spec_names.push_back(fit_spec_name(s));
  j["specs"] = spec_names;
  if (cfg.contrast.g.size() > 0) {
    json rows = json::array();
    for (long r = 0; r < cfg.contrast.g.rows(); ++r) {
      json row;
      row["label"] = cfg.contrast.labels[static_cast<std::size_t>(r)];
      std::vector<double> g(static_cast<std::size_t>(cfg.contrast.g.cols()));
      for (long c = 0; c < cfg.contrast.g.cols(); ++c) g[static_cast<std::size_t>(c)] = cfg.contrast.g(r, c);
      row["g"] = g;
      rows.push_back(row);
    }
    j["contrast"]["rows"] = rows;
  }
  j["draws_estimand"] = cfg.draws_estimand;
  j["draws_estimation"] = cfg.draws_estimation;
  j["network_seed"] = cfg.network_seed;
  j["assignment_seed"] = cfg.assignment_seed;
  j["propensity_seed"] = cfg.propensity_seed;
  j["mc_propensity_draws"] = cfg.mc_propensity_draws;
  j["bandwidth"] = cfg.bandwidth;
  j["threads"] = cfg.threads;
  return j;
}

inline SimConfig sim_config_from_json(const json& j) {
  SimConfig cfg;
  cfg.name = j.value("name", "custom");
  const json& nj = j.at("network");
  const std::string net_kind = nj.at("kind").get<std::string>();
  if (net_kind == "rgg")
    cfg.network.kind = NetworkModel::Kind::Rgg;
  else if (net_kind == "erdos_renyi")
    cfg.network.kind = NetworkModel::Kind::ErdosRenyi;
  else
    throw config_error("network: unknown kind '" + net_kind + "'");
  cfg.network.n = nj.at("n").get<long>();
  cfg.network.kappa = nj.value("kappa", 5.0);
  cfg.network.expected_degree = nj.value("expected_degree", 5.0);

  const json& oj = j.at("outcome");
  const std::string outcome_kind = oj.at("kind").get<std::string>();
  if (outcome_kind == "linear_in_means") {
    cfg.outcome.kind = OutcomeModel::Kind::LinearInMeans;
    cfg.outcome.lim = {oj.value("alpha", -1.0), oj.value("beta", 0.8), oj.value("delta", 1.0),
                       oj.value("xi", 1.0), oj.value("gamma", 3.0)};
    if (std::abs(cfg.outcome.lim.beta) >= 1.0)
      throw config_error("outcome: linear_in_means needs |beta| < 1, got " +
                         std::to_string(cfg.outcome.lim.beta));
  } else if (outcome_kind == "complex_contagion") {
    cfg.outcome.kind = OutcomeModel::Kind::ComplexContagion;
    cfg.outcome.contagion = {oj.value("alpha", -1.0),  oj.value("beta", 1.5),
                             oj.value("delta", 1.0),   oj.value("xi", 1.0),
                             oj.value("gamma", 3.0),   oj.value("iteration_cap", 0L)};
  } else if (outcome_kind == "linear_custom") {
    cfg.outcome.kind = OutcomeModel::Kind::LinearCustom;
    cfg.outcome.custom = {oj.value("intercept", 0.0),
                          oj.value("neighbor_treated_share", 0.0),
                          oj.value("direct", 0.0),
                          oj.value("covariate", 0.0),
                          oj.value("direct_exp_x", 0.0),
                          oj.value("direct_exp_x2", 0.0),
                          oj.value("neighbor_covariate_share", 0.0)};
  } else {
    throw config_error("outcome: unknown kind '" + outcome_kind + "'");
  }
  cfg.outcome.homophily = oj.value("homophily", true);
  cfg.outcome.noise_sd = oj.value("noise_sd", 1.0);

  const json& dj = j.at("design");
  const std::string design_kind = dj.at("kind").get<std::string>();
  if (design_kind == "iid_bernoulli") {
    cfg.design.kind = SimDesignSpec::Kind::IidBernoulli;
    if (dj.contains("per_unit_uniform")) {
      cfg.design.per_unit_uniform_p = true;
      cfg.design.p_lo = dj.at("per_unit_uniform").at(0).get<double>();
      cfg.design.p_hi = dj.at("per_unit_uniform").at(1).get<double>();
    } else {
      cfg.design.p = dj.at("p").get<double>();
    }
  } else if (design_kind == "block_complete") {
    cfg.design.kind = SimDesignSpec::Kind::BlockComplete;
    cfg.design.treat_frac = dj.at("treat_frac").get<double>();
  } else if (design_kind == "sequential_neighbor") {
    cfg.design.kind = SimDesignSpec::Kind::SequentialNeighbor;
    cfg.design.base_p_lo = dj.at("base_p_uniform").at(0).get<double>();
    cfg.design.base_p_hi = dj.at("base_p_uniform").at(1).get<double>();
    cfg.design.modifier_factor = dj.at("modifier_factor").get<double>();
  } else {
    throw config_error("design: unknown kind '" + design_kind + "'");
  }

  cfg.mapping = exposure_from_json(j.at("exposure"));
  if (j.contains("specs")) cfg.specs = specs_from_json(j.at("specs"));
  if (j.contains("contrast"))
    cfg.contrast = contrast_from_json(j.at("contrast"), cfg.mapping.support_size());
  cfg.draws_estimand = j.value("draws_estimand", 10000L);
  cfg.draws_estimation = j.value("draws_estimation", 10000L);
  cfg.network_seed = j.value("network_seed", 1ULL);
  cfg.assignment_seed = j.value("assignment_seed", 2ULL);
  cfg.propensity_seed = j.value("propensity_seed", 3ULL);
  cfg.mc_propensity_draws = j.value("mc_propensity_draws", 100000L);
  cfg.bandwidth = j.value("bandwidth", -1);
  cfg.threads = j.value("threads", 1);
  return cfg;
}

// Built-in simulation presets. The *-desk presets run in minutes on a laptop.
inline SimConfig make_preset(const std::string& name) {
  SimConfig cfg;
  cfg.name = name;
  if (name == "table1-desk" || name == "table1") {
    cfg.network = {NetworkModel::Kind::Rgg, name == "table1" ? 1456 : 800, 5.0, 5.0};
    cfg.outcome.kind = OutcomeModel::Kind::LinearInMeans;
    cfg.outcome.lim = {-1.0, 0.8, 1.0, 1.0, 3.0};
    cfg.outcome.homophily = true;
    cfg.outcome.noise_sd = 1.0;
    cfg.design = {SimDesignSpec::Kind::IidBernoulli, 0.5, false, 0.1, 0.9, 0.5, 0.4, 0.8, 1.0};
    cfg.mapping = ExposureMapping::any_treated_neighbor();
    cfg.specs = {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted,
                 FitSpec::HtTransformed};
    const long draws = name == "table1" ? 10000 : 2000;
    cfg.draws_estimand = draws;
    cfg.draws_estimation = draws;
    return cfg;
  }
  if (name == "contagion-desk") {
    cfg.network = {NetworkModel::Kind::Rgg, 800, 5.0, 5.0};
    cfg.outcome.kind = OutcomeModel::Kind::ComplexContagion;
    cfg.outcome.contagion = {-1.0, 1.5, 1.0, 1.0, 3.0, 0};
    cfg.outcome.homophily = true;
    cfg.outcome.noise_sd = 1.0;
    cfg.design = {SimDesignSpec::Kind::IidBernoulli, 0.5, false, 0.1, 0.9, 0.5, 0.4, 0.8, 1.0};
    cfg.mapping = ExposureMapping::any_treated_neighbor();
    cfg.specs = {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted};
    cfg.draws_estimand = 2000;
    cfg.draws_estimation = 2000;
    return cfg;
  }
  if (name == "design1-desk") {
    // direct effect, no interference, unit-varying assignment probabilities
    cfg.network = {NetworkModel::Kind::Rgg, 500, 5.0, 5.0};
    cfg.outcome.kind = OutcomeModel::Kind::LinearCustom;
    cfg.outcome.custom = {1.0, 0.0, 4.0, 2.0, 0.0, 0.1, 0.0};
    cfg.outcome.homophily = false;
    cfg.outcome.noise_sd = 1.0;
    cfg.design.kind = SimDesignSpec::Kind::IidBernoulli;
    cfg.design.per_unit_uniform_p = true;
    cfg.design.p_lo = 0.1;
    cfg.design.p_hi = 0.9;
    cfg.mapping = ExposureMapping::direct();
    cfg.specs = {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted};
    cfg.bandwidth = 0;
    cfg.draws_estimand = 2000;
    cfg.draws_estimation = 2000;
    return cfg;
  }
  if (name == "design2-desk" || name == "design3-desk") {
    cfg.network = {NetworkModel::Kind::Rgg, 500, name == "design2-desk" ? 8.0 : 5.0, 5.0};
    cfg.outcome.kind = OutcomeModel::Kind::LinearCustom;
    cfg.outcome.custom = {1.0, -0.9, 6.0, -1.0, 0.2, 0.0, -3.0};
    cfg.outcome.homophily = false;
    cfg.outcome.noise_sd = 4.0;
    if (name == "design2-desk") {
      cfg.design.kind = SimDesignSpec::Kind::BlockComplete;
      cfg.design.treat_frac = 0.1;
    } else {
      cfg.design.kind = SimDesignSpec::Kind::SequentialNeighbor;
      cfg.design.base_p_lo = 0.4;
      cfg.design.base_p_hi = 0.8;
      cfg.design.modifier_factor = 0.25;
    }
    cfg.mapping = ExposureMapping::direct();
    cfg.specs = {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted};
    cfg.bandwidth = 2;
    cfg.draws_estimand = 2000;
    cfg.draws_estimation = 2000;
    return cfg;
  }
  if (name == "ht-compare-desk") {
    // sequential design whose assignment probability doubles once a
    // processed neighbor is treated
    cfg.network = {NetworkModel::Kind::Rgg, 500, 5.0, 5.0};
    cfg.outcome.kind = OutcomeModel::Kind::LinearCustom;
    cfg.outcome.custom = {1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0};
    cfg.outcome.homophily = false;
    cfg.outcome.noise_sd = 4.0;
    cfg.design.kind = SimDesignSpec::Kind::SequentialNeighbor;
    cfg.design.base_p_lo = 0.2;
    cfg.design.base_p_hi = 0.4;
    cfg.design.modifier_factor = 2.0;
    cfg.mapping = ExposureMapping::direct();
    cfg.specs = {FitSpec::Unadjusted, FitSpec::HtTransformed};
    cfg.bandwidth = 2;
    cfg.draws_estimand = 2000;
    cfg.draws_estimation = 2000;
    return cfg;
  }
  if (name == "zero-effect-desk") {
    cfg.network = {NetworkModel::Kind::Rgg, 400, 5.0, 5.0};
    cfg.outcome.kind = OutcomeModel::Kind::LinearInMeans;
    cfg.outcome.lim = {-1.0, 0.8, 0.0, 0.0, 3.0};
    cfg.outcome.homophily = true;
    cfg.design = {SimDesignSpec::Kind::IidBernoulli, 0.5, false, 0.1, 0.9, 0.5, 0.4, 0.8, 1.0};
    cfg.mapping = ExposureMapping::any_treated_neighbor();
    cfg.specs = {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted};
    cfg.draws_estimand = 2000;
    cfg.draws_estimation = 2000;
    return cfg;
  }
  throw config_error("unknown preset '" + name + "'");
}

// --set key=value overrides on a JSON document; dotted keys descend.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw config_error("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // bare strings
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw config_error("--set: empty key in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

// ---- result serialization ----

inline json sim_result_to_json(const SimResult& r) {
  json j;
  j["n"] = r.n;
  j["effective_n"] = r.effective_n;
  j["mean_cell_counts"] = r.mean_cell_counts;
  j["bandwidth"] = r.bandwidth;
  j["kernel_psd"] = r.kernel_psd;
  j["estimand_exact"] = r.estimand_exact;
  j["draws_estimand"] = r.draws_estimand;
  j["draws_estimation"] = r.draws_estimation;
  j["network_seed"] = r.network_seed;
  j["assignment_seed"] = r.assignment_seed;
  j["average_path_length"] = r.apl;
  j["average_degree"] = r.avg_degree;
  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json rj;
    rj["spec"] = row.spec;
    rj["contrast"] = row.contrast;
    rj["estimand"] = row.estimand;
    rj["oracle_se"] = row.oracle_se;
    rj["mean_estimate"] = row.mean_estimate;
    rj["mean_se_raw"] = row.mean_se_raw;
    rj["mean_se_plus"] = row.mean_se_plus;
    rj["mean_se_ehw"] = row.mean_se_ehw;
    rj["coverage_oracle"] = row.coverage_oracle;
    rj["coverage_raw"] = row.coverage_raw;
    rj["coverage_plus"] = row.coverage_plus;
    rj["coverage_ehw"] = row.coverage_ehw;
    rj["negative_variance_draws"] = row.negative_variance_draws;
    j["rows"].push_back(rj);
  }
  return j;
}

inline std::string sim_result_csv(const SimResult& r) {
  std::string out =
      "spec,contrast,estimand,oracle_se,mean_estimate,mean_se_raw,mean_se_plus,mean_se_ehw,"
      "coverage_oracle,coverage_raw,coverage_plus,coverage_ehw,negative_variance_draws\n";
  for (const auto& row : r.rows) {
    out += row.spec + "," + row.contrast + "," + format_double(row.estimand) + "," +
           format_double(row.oracle_se) + "," + format_double(row.mean_estimate) + "," +
           format_double(row.mean_se_raw) + "," + format_double(row.mean_se_plus) + "," +
           format_double(row.mean_se_ehw) + "," + format_double(row.coverage_oracle) + "," +
           format_double(row.coverage_raw) + "," + format_double(row.coverage_plus) + "," +
           format_double(row.coverage_ehw) + "," + std::to_string(row.negative_variance_draws) +
           "\n";
  }
  return out;
}

inline json analysis_to_json(const AnalysisResult& r) {
  json j;
  j["n"] = r.n;
  j["effective_n"] = r.effective_n;
  j["cell_labels"] = r.cell_labels;
  j["cell_sizes"] = r.cell_sizes;
  j["average_path_length"] = r.apl;
  j["average_degree"] = r.avg_degree;
  j["suggested_bandwidth"] = r.suggested_b;
  j["propensity_method"] =
      r.propensity_method == PropensityTable::Method::Exact ? "exact" : "monte_carlo";
  j["mc_propensity_draws"] = r.mc_propensity_draws;
  j["warnings"] = r.warnings;
  j["specs"] = r.spec_names;
  j["contrasts"] = r.contrast_labels;
  j["estimates"] = r.estimates;
  j["se_ehw"] = r.se_ehw;
  j["bands"] = json::array();
  for (const auto& band : r.bands) {
    json bj;
    bj["b"] = band.b;
    bj["kernel_psd"] = band.kernel_psd;
    bj["se_raw"] = band.se_raw;
    bj["se_plus"] = band.se_plus;
    bj["negative_variance"] = band.negative_variance;
    j["bands"].push_back(bj);
  }
  return j;
}

inline json diagnostics_to_json(const DiagnosticsReport& r) {
  json j;
  j["grid"] = r.grid;
  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json rj;
    rj["b"] = row.b;
    rj["m1"] = row.m1;
    rj["m1_minus"] = row.m1_minus;
    rj["m2_minus"] = row.m2_minus;
    rj["max_j_minus"] = row.max_j_minus;
    rj["min_eigenvalue"] = row.min_eigenvalue;
    rj["kernel_psd"] = row.kernel_psd;
    j["rows"].push_back(rj);
  }
  auto slope = [](const std::optional<SlopeFit>& s) -> json {
    if (!s) return nullptr;
    return {{"slope", s->slope},
            {"intercept", s->intercept},
            {"points_used", s->points_used},
            {"dropped_zeros", s->dropped_zeros}};
  };
  j["slopes"]["m1"] = slope(r.slope_m1);
  j["slopes"]["m1_minus"] = slope(r.slope_m1_minus);
  j["slopes"]["m2_minus"] = slope(r.slope_m2_minus);
  j["slopes"]["max_j_minus"] = slope(r.slope_max_j_minus);
  return j;
}

inline std::string diagnostics_csv(const DiagnosticsReport& r) {
  std::string out = "b,m1,m1_minus,m2_minus,max_j_minus,min_eigenvalue,kernel_psd\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.b) + "," + format_double(row.m1) + "," +
           format_double(row.m1_minus) + "," + format_double(row.m2_minus) + "," +
           format_double(row.max_j_minus) + "," + format_double(row.min_eigenvalue) + "," +
           (row.kernel_psd ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace netexp
