#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "netexp/covariance.hpp"
#include "netexp/design.hpp"
#include "netexp/estimate.hpp"
#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/rng.hpp"

namespace netexp {

struct NetworkModel {
  enum class Kind { Rgg, ErdosRenyi };
  Kind kind = Kind::Rgg;
  long n = 0;
  double kappa = 5.0;            // RGG: connection radius sqrt(kappa / (pi n))
  double expected_degree = 5.0;  // ER: edge probability expected_degree / n
};

struct GeneratedNetwork {
  Graph graph;
  Eigen::MatrixXd positions;  // n x 2 for RGG, empty for ER
};

inline GeneratedNetwork gen_network(const NetworkModel& model, RngStream& rng) {
  if (model.n < 2) throw config_error("gen_network: need at least two units");
  GeneratedNetwork out;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(model.n));
  if (model.kind == NetworkModel::Kind::Rgg) {
    if (model.kappa <= 0.0) throw config_error("gen_network: kappa must be positive");
    out.positions.resize(model.n, 2);
    for (long i = 0; i < model.n; ++i) {
      out.positions(i, 0) = rng.uniform01();
      out.positions(i, 1) = rng.uniform01();
    }
    const double radius2 = model.kappa / (3.14159265358979323846 * static_cast<double>(model.n));
    for (long i = 0; i < model.n; ++i)
      for (long j = i + 1; j < model.n; ++j) {
        const double dx = out.positions(i, 0) - out.positions(j, 0);
        const double dy = out.positions(i, 1) - out.positions(j, 1);
        if (dx * dx + dy * dy <= radius2) {
          adj[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
          adj[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
        }
      }
  } else {
    if (model.expected_degree < 0.0) throw config_error("gen_network: negative expected degree");
    const double q = std::min(1.0, model.expected_degree / static_cast<double>(model.n));
    for (long i = 0; i < model.n; ++i)
      for (long j = i + 1; j < model.n; ++j)
        if (rng.bernoulli(q)) {
          adj[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
          adj[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
        }
  }
  out.graph = Graph::from_adjacency(std::move(adj), false);
  return out;
}

// Row-stochastic adjacency; degree-zero units get an all-zero row.
inline Eigen::SparseMatrix<double> row_normalize(const Graph& g) {
  std::vector<Eigen::Triplet<double>> entries;
  for (long i = 0; i < g.n(); ++i) {
    const auto& nbrs = g.sym_neighbors(static_cast<int>(i));
    if (nbrs.empty()) continue;
    const double w = 1.0 / static_cast<double>(nbrs.size());
    for (int j : nbrs) entries.emplace_back(static_cast<int>(i), j, w);
  }
  Eigen::SparseMatrix<double> a_tilde(g.n(), g.n());
  a_tilde.setFromTriplets(entries.begin(), entries.end());
  return a_tilde;
}

struct LinearInMeansParams {
  double alpha = -1.0;
  double beta = 0.8;  // peer-outcome weight, |beta| < 1
  double delta = 1.0;
  double xi = 1.0;
  double gamma = 3.0;
};

struct ComplexContagionParams {
  double alpha = -1.0;
  double beta = 1.5;
  double delta = 1.0;
  double xi = 1.0;
  double gamma = 3.0;
  long iteration_cap = 0;  // 0: n + 2 when beta >= 0, otherwise required
};

// Simultaneous linear system solved through its reduced form.
inline Eigen::VectorXd linear_in_means(const Eigen::SparseMatrix<double>& a_tilde,
                                       const Eigen::VectorXd& d, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& eps,
                                       const LinearInMeansParams& params) {
  if (std::abs(params.beta) >= 1.0)
    throw config_error("linear_in_means: |beta| must be below 1");
  const long n = a_tilde.rows();
  Eigen::SparseMatrix<double> system(n, n);
  system.setIdentity();
  system -= (params.beta * a_tilde).eval();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success)
    throw numerical_error("linear_in_means: system factorization failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, params.alpha);
  rhs += params.delta * (a_tilde * d) + params.xi * d + params.gamma * x + eps;
  Eigen::VectorXd y = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw numerical_error("linear_in_means: solve failed");
  return y;
}

struct ContagionResult {
  Eigen::VectorXd y;  // binary
  long iterations = 0;
};

// Threshold dynamics iterated to the first fixed point. Starts from the
// no-peer-term state; with beta >= 0 the iterates are monotone nondecreasing
// and settle within n + 1 steps.
inline ContagionResult complex_contagion(const Eigen::SparseMatrix<double>& a_tilde,
                                         const Eigen::VectorXd& d, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& eps,
                                         const ComplexContagionParams& params) {
  const long n = a_tilde.rows();
  long cap = params.iteration_cap;
  if (cap <= 0) {
    if (params.beta < 0.0)
      throw config_error("complex_contagion: negative beta needs an explicit iteration cap");
    cap = n + 2;
  }
  Eigen::VectorXd base = Eigen::VectorXd::Constant(n, params.alpha);
  base += params.delta * (a_tilde * d) + params.xi * d + params.gamma * x + eps;
  ContagionResult result;
  result.y = (base.array() > 0.0).cast<double>();
  for (long iter = 1; iter <= cap; ++iter) {
    Eigen::VectorXd next = (base.array() + params.beta * (a_tilde * result.y).array() > 0.0)
                               .cast<double>();
    result.iterations = iter;
    if (next == result.y) return result;
    result.y = std::move(next);
  }
  throw numerical_error("complex_contagion: no fixed point within " + std::to_string(cap) +
                        " iterations");
}

// eps_i = nu_i + (first position coordinate - 0.5), nu iid standard normal.
inline Eigen::VectorXd homophily_errors(const Eigen::MatrixXd& positions, RngStream& rng) {
  if (positions.cols() < 1 || positions.rows() < 1)
    throw config_error("homophily_errors: positions required (geometric networks only)");
  Eigen::VectorXd eps(positions.rows());
  for (long i = 0; i < positions.rows(); ++i) eps[i] = rng.normal() + (positions(i, 0) - 0.5);
  return eps;
}

struct LinearCustomParams {
  double intercept = 0.0;
  double neighbor_treated_share = 0.0;  // coefficient on row-normalized A * D
  double direct = 0.0;
  double covariate = 0.0;
  double direct_exp_x = 0.0;   // coefficient on D * exp(x)
  double direct_exp_x2 = 0.0;  // coefficient on D * exp(x^2)
  double neighbor_covariate_share = 0.0;  // coefficient on row-normalized A * x
};

struct OutcomeModel {
  enum class Kind { LinearInMeans, ComplexContagion, LinearCustom };
  Kind kind = Kind::LinearInMeans;
  LinearInMeansParams lim;
  ComplexContagionParams contagion;
  LinearCustomParams custom;
  bool homophily = true;   // position-linked error component (geometric networks)
  double noise_sd = 1.0;   // scale of the iid normal error component
};

// Fixed-population outcome evaluator: (network, covariates, errors) are
// frozen, each call maps one treatment vector to outcomes. Pure and
// thread-safe, so draws can be evaluated concurrently.
class OutcomeContext {
 public:
  OutcomeContext(const Graph& g, const OutcomeModel& model, Eigen::VectorXd x,
                 Eigen::VectorXd eps)
      : model_(model), x_(std::move(x)), eps_(std::move(eps)), a_tilde_(row_normalize(g)) {
    const long n = g.n();
    if (x_.size() != n || eps_.size() != n)
      throw config_error("outcome context: covariate or error length mismatch");
    if (model_.kind == OutcomeModel::Kind::LinearInMeans) {
      if (std::abs(model_.lim.beta) >= 1.0)
        throw config_error("linear_in_means: |beta| must be below 1");
      // reduced form cached densely: y(D) = y0 + M D
      Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - model_.lim.beta * a_tilde_;
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
      Eigen::VectorXd base = Eigen::VectorXd::Constant(n, model_.lim.alpha) +
                             model_.lim.gamma * x_ + eps_;
      lim_y0_ = lu.solve(base);
      Eigen::MatrixXd forcing = model_.lim.delta * Eigen::MatrixXd(a_tilde_);
      forcing.diagonal().array() += model_.lim.xi;
      lim_response_ = lu.solve(forcing);
    } else if (model_.kind == OutcomeModel::Kind::LinearCustom) {
      exp_x_ = x_.array().exp();
      exp_x2_ = (x_.array() * x_.array()).exp();
      a_tilde_x_ = a_tilde_ * x_;
    }
  }

  const Eigen::VectorXd& covariates() const { return x_; }
  const Eigen::VectorXd& errors() const { return eps_; }

  Eigen::VectorXd evaluate(const std::vector<int>& d_int) const {
    const long n = x_.size();
    Eigen::VectorXd d(n);
    for (long i = 0; i < n; ++i) d[i] = static_cast<double>(d_int[static_cast<std::size_t>(i)]);
    switch (model_.kind) {
      case OutcomeModel::Kind::LinearInMeans: {
        Eigen::VectorXd y = lim_y0_;
        for (long i = 0; i < n; ++i)
          if (d[i] != 0.0) y += lim_response_.col(i);
        return y;
      }
      case OutcomeModel::Kind::ComplexContagion:
        return complex_contagion(a_tilde_, d, x_, eps_, model_.contagion).y;
      case OutcomeModel::Kind::LinearCustom: {
        const auto& p = model_.custom;
        Eigen::VectorXd y = Eigen::VectorXd::Constant(n, p.intercept);
        if (p.neighbor_treated_share != 0.0) y += p.neighbor_treated_share * (a_tilde_ * d);
        if (p.direct != 0.0) y += p.direct * d;
        if (p.covariate != 0.0) y += p.covariate * x_;
        if (p.direct_exp_x != 0.0) y.array() += p.direct_exp_x * d.array() * exp_x_.array();
        if (p.direct_exp_x2 != 0.0) y.array() += p.direct_exp_x2 * d.array() * exp_x2_.array();
        if (p.neighbor_covariate_share != 0.0) y += p.neighbor_covariate_share * a_tilde_x_;
        return y + eps_;
      }
    }
    throw config_error("outcome context: unknown model kind");
  }

 private:
  OutcomeModel model_;
  Eigen::VectorXd x_, eps_;
  Eigen::SparseMatrix<double> a_tilde_;
  Eigen::VectorXd lim_y0_;
  Eigen::MatrixXd lim_response_;
  Eigen::VectorXd exp_x_, exp_x2_, a_tilde_x_;
};

struct SimDesignSpec {
  enum class Kind { IidBernoulli, BlockComplete, SequentialNeighbor };
  Kind kind = Kind::IidBernoulli;
  double p = 0.5;
  bool per_unit_uniform_p = false;  // iid: p_i drawn once from U[p_lo, p_hi]
  double p_lo = 0.1, p_hi = 0.9;
  double treat_frac = 0.5;  // block-complete over a single block of all units
  double base_p_lo = 0.4, base_p_hi = 0.8;  // sequential baseline range
  double modifier_factor = 1.0;
};

inline Design build_sim_design(const SimDesignSpec& spec, long n, RngStream& rng) {
  switch (spec.kind) {
    case SimDesignSpec::Kind::IidBernoulli: {
      Eigen::VectorXd p(n);
      for (long i = 0; i < n; ++i)
        p[i] = spec.per_unit_uniform_p ? rng.uniform(spec.p_lo, spec.p_hi) : spec.p;
      return Design::iid_bernoulli(std::move(p));
    }
    case SimDesignSpec::Kind::BlockComplete: {
      std::vector<int> block(static_cast<std::size_t>(n), 0);
      return Design::block_complete_frac(block, spec.treat_frac);
    }
    case SimDesignSpec::Kind::SequentialNeighbor: {
      Eigen::VectorXd p(n);
      for (long i = 0; i < n; ++i) p[i] = rng.uniform(spec.base_p_lo, spec.base_p_hi);
      return Design::sequential_neighbor(std::move(p), spec.modifier_factor);
    }
  }
  throw config_error("unknown design kind");
}

struct SimConfig {
  std::string name = "custom";
  NetworkModel network;
  OutcomeModel outcome;
  SimDesignSpec design;
  ExposureMapping mapping = ExposureMapping::any_treated_neighbor();
  std::vector<FitSpec> specs{FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted};
  Contrast contrast;  // empty: difference (cell 1 vs 0) when two cells, identity otherwise
  long draws_estimand = 10000;
  long draws_estimation = 10000;
  std::uint64_t network_seed = 1;
  std::uint64_t assignment_seed = 2;
  std::uint64_t propensity_seed = 3;
  long mc_propensity_draws = 100000;
  int bandwidth = -1;  // -1: rule-based selection
  int threads = 1;
  double eigen_tol = kDefaultEigenTol;
  long enumeration_bits = 14;  // assignment spaces up to 2^bits use the exact estimand
};

struct SimRow {
  std::string spec;
  std::string contrast;
  double estimand = 0.0;
  double oracle_se = 0.0;
  double mean_estimate = 0.0;
  double mean_se_raw = 0.0;
  double mean_se_plus = 0.0;
  double mean_se_ehw = 0.0;
  double coverage_oracle = 0.0;
  double coverage_raw = 0.0;
  double coverage_plus = 0.0;
  double coverage_ehw = 0.0;
  long negative_variance_draws = 0;
};

struct SimResult {
  std::vector<SimRow> rows;
  long n = 0;
  long effective_n = 0;
  std::vector<double> mean_cell_counts;
  int bandwidth = 0;
  bool kernel_psd = true;
  bool estimand_exact = false;
  long draws_estimand = 0;
  long draws_estimation = 0;
  std::uint64_t network_seed = 0;
  std::uint64_t assignment_seed = 0;
  double apl = 0.0;
  double avg_degree = 0.0;

  const SimRow& row(FitSpec spec, std::size_t contrast_index = 0) const {
    const std::string name = fit_spec_name(spec);
    std::size_t seen = 0;
    for (const auto& r : rows)
      if (r.spec == name && seen++ == contrast_index) return r;
    throw config_error("sim result: no row for spec " + name);
  }
};

namespace detail {

inline double sample_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace detail

// Finite-population Monte Carlo: the network, covariates, errors, and design
// are fixed once from the network seed; only the treatment vector is redrawn.
// Phase 1 draws give the estimand (inverse-probability mean, or the exact
// enumeration when the assignment space is small) and the oracle SEs; phase 2
// draws give mean estimates, mean SEs and CI coverage.
inline SimResult run_monte_carlo(const SimConfig& cfg) {
  if (cfg.draws_estimand < 2 || cfg.draws_estimation < 1)
    throw config_error("run_monte_carlo: need at least 2 estimand and 1 estimation draws");

  RngStream graph_rng(cfg.network_seed, 0);
  GeneratedNetwork net = gen_network(cfg.network, graph_rng);
  const Graph& g = net.graph;
  const long n = g.n();

  RngStream x_rng(cfg.network_seed, 1);
  Eigen::VectorXd x(n);
  for (long i = 0; i < n; ++i) x[i] = x_rng.normal();

  RngStream eps_rng(cfg.network_seed, 2);
  Eigen::VectorXd eps(n);
  for (long i = 0; i < n; ++i) eps[i] = cfg.outcome.noise_sd * eps_rng.normal();
  if (cfg.outcome.homophily) {
    if (net.positions.rows() != n)
      throw config_error("run_monte_carlo: homophily errors need a geometric network");
    eps += net.positions.col(0).array().matrix() - Eigen::VectorXd::Constant(n, 0.5);
  }

  RngStream design_rng(cfg.network_seed, 3);
  Design design = build_sim_design(cfg.design, n, design_rng);

  ExposureEvaluator evaluator(cfg.mapping, g);
  const long cells = cfg.mapping.support_size();
  PropensityTable propensity;
  try {
    propensity = exact_propensity(cfg.mapping, design, g);
  } catch (const config_error&) {
    propensity = mc_propensity(cfg.mapping, design, g, cfg.mc_propensity_draws,
                               cfg.propensity_seed, cfg.threads);
  }
  EffectiveSample sample = effective_sample(propensity);
  const auto& units = sample.units;

  OutcomeContext outcome(g, cfg.outcome, x, eps);

  SimResult result;
  result.n = n;
  result.effective_n = static_cast<long>(units.size());
  result.draws_estimand = cfg.draws_estimand;
  result.draws_estimation = cfg.draws_estimation;
  result.network_seed = cfg.network_seed;
  result.assignment_seed = cfg.assignment_seed;
  const AplResult apl = average_path_length(g);
  result.apl = apl.value;
  result.avg_degree = average_degree(g);
  if (cfg.bandwidth >= 0) {
    result.bandwidth = cfg.bandwidth;
  } else {
    result.bandwidth =
        bandwidth_select(apl.value, n, result.avg_degree, cfg.mapping.locality()).b;
  }

  KernelMatrix kernel = build_kernel(g, units, result.bandwidth, cfg.threads);
  KernelSplit split = psd_split(kernel, cfg.eigen_tol);
  result.kernel_psd = split.kernel_psd;

  Contrast contrast = cfg.contrast;
  if (contrast.g.size() == 0)
    contrast = cells == 2 ? Contrast::difference(2) : Contrast::identity(cells);
  const long n_contrasts = contrast.g.rows();
  const std::size_t n_specs = cfg.specs.size();

  auto make_draw_dataset = [&](long stream_index) {
    RngStream rng(cfg.assignment_seed, static_cast<std::uint64_t>(stream_index));
    auto d = draw_assignment(design, g, rng);
    Eigen::VectorXd y = outcome.evaluate(d);
    auto t = evaluator.exposures(d);
    return make_dataset(units, y, x, t, propensity);
  };

  // ---- phase 1: estimand + oracle SEs ----
  const long r1 = cfg.draws_estimand;
  std::vector<double> phase1(static_cast<std::size_t>(r1) * n_specs * n_contrasts);
  std::vector<double> phase1_ht(static_cast<std::size_t>(r1) * n_contrasts);
  parallel_for(r1, cfg.threads, [&](long r) {
    try {
      Dataset ds = make_draw_dataset(r);
      Eigen::VectorXd ht(cells);
      for (long t = 0; t < cells; ++t) ht[t] = horvitz_thompson(ds, t);
      Eigen::VectorXd ht_contrast = contrast.g * ht;
      for (long c = 0; c < n_contrasts; ++c)
        phase1_ht[static_cast<std::size_t>(r * n_contrasts + c)] = ht_contrast[c];
      for (std::size_t s = 0; s < n_specs; ++s) {
        Eigen::VectorXd est;
        if (cfg.specs[s] == FitSpec::HtTransformed) {
          est = ht_contrast;
        } else {
          WlsFit f = fit_wls(ds, cfg.specs[s]);
          est = contrast.g * f.beta;
        }
        for (long c = 0; c < n_contrasts; ++c)
          phase1[(static_cast<std::size_t>(r) * n_specs + s) * static_cast<std::size_t>(n_contrasts) +
                 static_cast<std::size_t>(c)] = est[c];
      }
    } catch (const std::exception& e) {
      throw numerical_error("estimand draw " + std::to_string(r) + " (assignment seed " +
                            std::to_string(cfg.assignment_seed) + "): " + e.what());
    }
  });

  Eigen::VectorXd estimand = Eigen::VectorXd::Zero(n_contrasts);
  const double space_bits = assignment_space_log2(design);
  if (space_bits >= 0.0 && space_bits <= static_cast<double>(cfg.enumeration_bits)) {
    result.estimand_exact = true;
    Eigen::VectorXd ht_mean = Eigen::VectorXd::Zero(cells);
    for_each_assignment(design, [&](const std::vector<int>& d, double prob) {
      Eigen::VectorXd y = outcome.evaluate(d);
      auto t = evaluator.exposures(d);
      Eigen::VectorXd ht = Eigen::VectorXd::Zero(cells);
      for (int i : units) ht[t[static_cast<std::size_t>(i)]] += y[i] / propensity.pi(i, t[static_cast<std::size_t>(i)]);
      ht_mean += prob / static_cast<double>(units.size()) * ht;
    });
    estimand = contrast.g * ht_mean;
  } else {
    for (long r = 0; r < r1; ++r)
      for (long c = 0; c < n_contrasts; ++c)
        estimand[c] += phase1_ht[static_cast<std::size_t>(r * n_contrasts + c)];
    estimand /= static_cast<double>(r1);
  }

  // ---- phase 2: estimates, SEs, coverage ----
  const long r2 = cfg.draws_estimation;
  const std::size_t stride = n_specs * static_cast<std::size_t>(n_contrasts);
  std::vector<double> est2(static_cast<std::size_t>(r2) * stride);
  std::vector<double> se_raw(static_cast<std::size_t>(r2) * stride);
  std::vector<double> se_plus(static_cast<std::size_t>(r2) * stride);
  std::vector<double> se_ehw(static_cast<std::size_t>(r2) * stride);
  std::vector<double> cell_count_sum(static_cast<std::size_t>(r2) * static_cast<std::size_t>(cells));
  parallel_for(r2, cfg.threads, [&](long r) {
    try {
      Dataset ds = make_draw_dataset(r1 + r);
      const auto counts = ds.counts();
      for (long t = 0; t < cells; ++t)
        cell_count_sum[static_cast<std::size_t>(r * cells + t)] =
            static_cast<double>(counts[static_cast<std::size_t>(t)]);
      for (std::size_t s = 0; s < n_specs; ++s) {
        const std::size_t base = static_cast<std::size_t>(r) * stride +
                                 s * static_cast<std::size_t>(n_contrasts);
        if (cfg.specs[s] == FitSpec::HtTransformed) {
          Eigen::VectorXd ht(cells);
          for (long t = 0; t < cells; ++t) ht[t] = horvitz_thompson(ds, t);
          const double m = static_cast<double>(ds.n());
          for (long c = 0; c < n_contrasts; ++c) {
            const double tau = contrast.g.row(c) * ht;
            Eigen::VectorXd delta = leung_delta(ds, contrast.g.row(c));
            const double v_raw = leung_ht_variance(delta, tau, kernel) / m;
            const double v_plus = leung_ht_variance_plus(delta, tau, split) / m;
            const double v_ehw = (delta.array() - tau).square().sum() / (m * m);
            est2[base + static_cast<std::size_t>(c)] = tau;
            se_raw[base + static_cast<std::size_t>(c)] =
                v_raw < 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(v_raw);
            se_plus[base + static_cast<std::size_t>(c)] =
                v_plus < 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(v_plus);
            se_ehw[base + static_cast<std::size_t>(c)] = std::sqrt(v_ehw);
          }
        } else {
          WlsFit f = fit_wls(ds, cfg.specs[s]);
          Eigen::VectorXd est = contrast.g * f.beta;
          SeResult raw = contrast_se(hac_cov(f, kernel), contrast);
          SeResult plus = contrast_se(hac_cov(f, split.k_plus), contrast);
          SeResult ehw = contrast_se(ehw_cov(f), contrast);
          for (long c = 0; c < n_contrasts; ++c) {
            est2[base + static_cast<std::size_t>(c)] = est[c];
            se_raw[base + static_cast<std::size_t>(c)] = raw.se[c];
            se_plus[base + static_cast<std::size_t>(c)] = plus.se[c];
            se_ehw[base + static_cast<std::size_t>(c)] = ehw.se[c];
          }
        }
      }
    } catch (const std::exception& e) {
      throw numerical_error("estimation draw " + std::to_string(r) + " (assignment seed " +
                            std::to_string(cfg.assignment_seed) + "): " + e.what());
    }
  });

  result.mean_cell_counts.assign(static_cast<std::size_t>(cells), 0.0);
  for (long r = 0; r < r2; ++r)
    for (long t = 0; t < cells; ++t)
      result.mean_cell_counts[static_cast<std::size_t>(t)] +=
          cell_count_sum[static_cast<std::size_t>(r * cells + t)] / static_cast<double>(r2);

  for (std::size_t s = 0; s < n_specs; ++s) {
    for (long c = 0; c < n_contrasts; ++c) {
      SimRow row;
      row.spec = fit_spec_name(cfg.specs[s]);
      row.contrast = contrast.labels[static_cast<std::size_t>(c)];
      row.estimand = estimand[c];

      std::vector<double> phase1_est(static_cast<std::size_t>(r1));
      for (long r = 0; r < r1; ++r)
        phase1_est[static_cast<std::size_t>(r)] =
            phase1[(static_cast<std::size_t>(r) * n_specs + s) * static_cast<std::size_t>(n_contrasts) +
                   static_cast<std::size_t>(c)];
      row.oracle_se = detail::sample_sd(phase1_est);

      double sum_est = 0.0, sum_raw = 0.0, sum_plus = 0.0, sum_ehw = 0.0;
      long n_raw = 0;
      long cover_oracle = 0, cover_raw = 0, cover_plus = 0, cover_ehw = 0;
      for (long r = 0; r < r2; ++r) {
        const std::size_t at = static_cast<std::size_t>(r) * stride +
                               s * static_cast<std::size_t>(n_contrasts) +
                               static_cast<std::size_t>(c);
        const double est = est2[at];
        sum_est += est;
        const double err = std::abs(est - estimand[c]);
        if (err <= kNormal95 * row.oracle_se) ++cover_oracle;
        if (std::isnan(se_raw[at])) {
          ++row.negative_variance_draws;
        } else {
          sum_raw += se_raw[at];
          ++n_raw;
          if (err <= kNormal95 * se_raw[at]) ++cover_raw;
        }
        sum_plus += se_plus[at];
        if (err <= kNormal95 * se_plus[at]) ++cover_plus;
        sum_ehw += se_ehw[at];
        if (err <= kNormal95 * se_ehw[at]) ++cover_ehw;
      }
      row.mean_estimate = sum_est / static_cast<double>(r2);
      row.mean_se_raw = n_raw > 0 ? sum_raw / static_cast<double>(n_raw)
                                  : std::numeric_limits<double>::quiet_NaN();
      row.mean_se_plus = sum_plus / static_cast<double>(r2);
      row.mean_se_ehw = sum_ehw / static_cast<double>(r2);
      row.coverage_oracle = static_cast<double>(cover_oracle) / static_cast<double>(r2);
      row.coverage_raw = static_cast<double>(cover_raw) / static_cast<double>(r2);
      row.coverage_plus = static_cast<double>(cover_plus) / static_cast<double>(r2);
      row.coverage_ehw = static_cast<double>(cover_ehw) / static_cast<double>(r2);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

}  // namespace netexp
