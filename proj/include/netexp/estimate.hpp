#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "netexp/design.hpp"
#include "netexp/exposure.hpp"

namespace netexp {

// Analysis sample: outcomes, centered covariates, realized exposure indices
// and propensities, restricted to the effective sample.
struct Dataset {
  std::vector<int> units;  // ids into the parent graph, ascending
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // covariates centered over this sample; may have 0 columns
  std::vector<int> t;
  Eigen::MatrixXd pi;  // n x n_cells, restricted to this sample
  long n_cells = 0;

  long n() const { return y.size(); }
  long n_covariates() const { return x.cols(); }
  std::vector<long> counts() const {
    std::vector<long> c(static_cast<std::size_t>(n_cells), 0);
    for (int ti : t) ++c[static_cast<std::size_t>(ti)];
    return c;
  }
};

inline Dataset make_dataset(const std::vector<int>& units, const Eigen::VectorXd& y_full,
                            const Eigen::MatrixXd& x_full, const std::vector<int>& exposures,
                            const PropensityTable& table) {
  Dataset ds;
  ds.units = units;
  ds.n_cells = table.pi.cols();
  const long m = static_cast<long>(units.size());
  ds.y.resize(m);
  ds.x.resize(m, x_full.cols());
  ds.t.resize(static_cast<std::size_t>(m));
  ds.pi.resize(m, ds.n_cells);
  for (long r = 0; r < m; ++r) {
    const int i = units[static_cast<std::size_t>(r)];
    ds.y[r] = y_full[i];
    if (x_full.cols() > 0) ds.x.row(r) = x_full.row(i);
    ds.t[static_cast<std::size_t>(r)] = exposures[static_cast<std::size_t>(i)];
    ds.pi.row(r) = table.pi.row(i);
    const double p = ds.pi(r, ds.t[static_cast<std::size_t>(r)]);
    if (!(p > 0.0 && p < 1.0))
      throw data_error("dataset: unit " + std::to_string(i) +
                       " has non-interior propensity for its realized exposure");
  }
  if (ds.x.cols() > 0) ds.x.rowwise() -= ds.x.colwise().mean();
  return ds;
}

// Inverse-probability-weighted ratio mean of Y over the cell T = t.
inline double hajek(const Dataset& ds, long t) {
  double num = 0.0, den = 0.0;
  for (long i = 0; i < ds.n(); ++i)
    if (ds.t[static_cast<std::size_t>(i)] == t) {
      num += ds.y[i] / ds.pi(i, t);
      den += 1.0 / ds.pi(i, t);
    }
  if (den == 0.0)
    throw data_error("hajek: no unit realizes exposure value " + std::to_string(t));
  return num / den;
}

inline double horvitz_thompson(const Dataset& ds, long t) {
  double num = 0.0;
  for (long i = 0; i < ds.n(); ++i)
    if (ds.t[static_cast<std::size_t>(i)] == t) num += ds.y[i] / ds.pi(i, t);
  return num / static_cast<double>(ds.n());
}

// Inverse-probability estimate of the constant outcome 1 in cell t.
inline double one_ht(const Dataset& ds, long t) {
  double num = 0.0;
  for (long i = 0; i < ds.n(); ++i)
    if (ds.t[static_cast<std::size_t>(i)] == t) num += 1.0 / ds.pi(i, t);
  return num / static_cast<double>(ds.n());
}

enum class FitSpec { Unadjusted, Additive, FullyInteracted, HtTransformed };

inline std::string fit_spec_name(FitSpec s) {
  switch (s) {
    case FitSpec::Unadjusted:
      return "unadjusted";
    case FitSpec::Additive:
      return "additive";
    case FitSpec::FullyInteracted:
      return "fully_interacted";
    case FitSpec::HtTransformed:
      return "ht";
  }
  return "?";
}

struct WlsFit {
  FitSpec spec = FitSpec::Unadjusted;
  long n_cells = 0;
  Eigen::VectorXd beta;   // cell coefficients, support order
  Eigen::MatrixXd gamma;  // J x 1 (additive), J x n_cells (fully interacted), else empty
  Eigen::VectorXd residuals;
  Eigen::VectorXd weights;
  Eigen::MatrixXd design;     // kept columns of the regressor matrix
  Eigen::MatrixXd bread_inv;  // (C' W C)^-1 over kept columns
  std::vector<std::string> column_labels;
  std::vector<long> dropped_zero_columns;  // positions in the pre-drop layout
};

namespace detail {

// Weighted least squares on C with rank checking; names the offending column
// when the normal matrix is rank deficient. Exactly-zero columns are dropped
// (their coefficients are zero and nothing else changes).
inline void solve_wls(WlsFit& fit, const Eigen::MatrixXd& c_full, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w, const std::vector<std::string>& labels) {
  const long p_full = c_full.cols();
  std::vector<long> kept;
  for (long k = 0; k < p_full; ++k) {
    if ((c_full.col(k).array() == 0.0).all())
      fit.dropped_zero_columns.push_back(k);
    else
      kept.push_back(k);
  }
  Eigen::MatrixXd c(c_full.rows(), static_cast<long>(kept.size()));
  fit.column_labels.clear();
  for (std::size_t k = 0; k < kept.size(); ++k) {
    c.col(static_cast<long>(k)) = c_full.col(kept[k]);
    fit.column_labels.push_back(labels[static_cast<std::size_t>(kept[k])]);
  }

  const Eigen::MatrixXd cw = c.array().colwise() * w.array();
  const Eigen::MatrixXd a = cw.transpose() * c;
  const Eigen::VectorXd rhs = cw.transpose() * y;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || d_max <= 0.0 ||
      d.minCoeff() <= 1e-10 * d_max) {
    // identify a dependent column for the error message
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    const long rank = qr.rank();
    std::string column = "?";
    if (rank < a.cols())
      column = fit.column_labels[static_cast<std::size_t>(qr.colsPermutation().indices()[rank])];
    throw numerical_error("wls: design matrix is rank deficient (column " + column + ")");
  }
  const Eigen::VectorXd coef = ldlt.solve(rhs);
  Eigen::VectorXd coef_full = Eigen::VectorXd::Zero(p_full);
  for (std::size_t k = 0; k < kept.size(); ++k) coef_full[kept[k]] = coef[static_cast<long>(k)];

  fit.beta = coef_full.head(fit.n_cells);
  fit.residuals = y - c * coef;
  fit.weights = w;
  fit.design = std::move(c);
  fit.bread_inv = ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  const long j = (p_full - fit.n_cells);
  if (fit.spec == FitSpec::Additive && j > 0) {
    fit.gamma = coef_full.segment(fit.n_cells, j);
  } else if (fit.spec == FitSpec::FullyInteracted && j > 0) {
    const long n_cov = j / fit.n_cells;
    fit.gamma.resize(n_cov, fit.n_cells);
    for (long t = 0; t < fit.n_cells; ++t)
      fit.gamma.col(t) = coef_full.segment(fit.n_cells + t * n_cov, n_cov);
  }
}

inline void require_cells(const Dataset& ds, FitSpec spec) {
  const auto counts = ds.counts();
  const long j = ds.n_covariates();
  for (long t = 0; t < ds.n_cells; ++t) {
    if (counts[static_cast<std::size_t>(t)] == 0)
      throw data_error("wls: exposure cell " + std::to_string(t) + " is empty");
    if (spec == FitSpec::FullyInteracted && j >= 1 &&
        counts[static_cast<std::size_t>(t)] < j + 1)
      throw data_error("wls: exposure cell " + std::to_string(t) + " has " +
                       std::to_string(counts[static_cast<std::size_t>(t)]) +
                       " units, too few to identify its covariate slopes");
  }
}

}  // namespace detail

// Weighted regression of Y on the exposure dummies (optionally plus
// covariates or per-cell interactions) with weights 1/pi_i(T_i). The dummy
// coefficients reproduce the per-cell ratio means.
inline WlsFit fit_wls(const Dataset& ds, FitSpec spec) {
  if (spec == FitSpec::HtTransformed)
    throw config_error("fit_wls: use fit_ht_wls for the transformed fit");
  detail::require_cells(ds, spec);
  const long n = ds.n();
  const long cells = ds.n_cells;
  const long j = ds.n_covariates();
  long p = cells;
  if (spec == FitSpec::Additive) p += j;
  if (spec == FitSpec::FullyInteracted) p += cells * j;

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, p);
  std::vector<std::string> labels;
  for (long t = 0; t < cells; ++t) labels.push_back("z" + std::to_string(t));
  for (long i = 0; i < n; ++i) c(i, ds.t[static_cast<std::size_t>(i)]) = 1.0;
  if (spec == FitSpec::Additive) {
    c.block(0, cells, n, j) = ds.x;
    for (long k = 0; k < j; ++k) labels.push_back("x" + std::to_string(k + 1));
  } else if (spec == FitSpec::FullyInteracted) {
    for (long t = 0; t < cells; ++t)
      for (long k = 0; k < j; ++k) {
        const long col = cells + t * j + k;
        for (long i = 0; i < n; ++i)
          if (ds.t[static_cast<std::size_t>(i)] == t) c(i, col) = ds.x(i, k);
        labels.push_back("z" + std::to_string(t) + ":x" + std::to_string(k + 1));
      }
  }

  Eigen::VectorXd w(n);
  for (long i = 0; i < n; ++i) w[i] = 1.0 / ds.pi(i, ds.t[static_cast<std::size_t>(i)]);

  WlsFit fit;
  fit.spec = spec;
  fit.n_cells = cells;
  detail::solve_wls(fit, c, ds.y, w, labels);
  return fit;
}

// Transformed fit whose dummy coefficients reproduce the inverse-probability
// mean: outcome scaled by the cell's estimate of 1, weights divided by it.
inline WlsFit fit_ht_wls(const Dataset& ds) {
  detail::require_cells(ds, FitSpec::HtTransformed);
  const long n = ds.n();
  const long cells = ds.n_cells;
  Eigen::VectorXd ones_ht(cells);
  for (long t = 0; t < cells; ++t) ones_ht[t] = one_ht(ds, t);

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, cells);
  Eigen::VectorXd y_tilde(n), w(n);
  std::vector<std::string> labels;
  for (long t = 0; t < cells; ++t) labels.push_back("z" + std::to_string(t));
  for (long i = 0; i < n; ++i) {
    const long t = ds.t[static_cast<std::size_t>(i)];
    c(i, t) = 1.0;
    y_tilde[i] = ones_ht[t] * ds.y[i];
    w[i] = 1.0 / (ones_ht[t] * ds.pi(i, t));
  }

  WlsFit fit;
  fit.spec = FitSpec::HtTransformed;
  fit.n_cells = cells;
  detail::solve_wls(fit, c, y_tilde, w, labels);
  return fit;
}

inline WlsFit fit(const Dataset& ds, FitSpec spec) {
  return spec == FitSpec::HtTransformed ? fit_ht_wls(ds) : fit_wls(ds, spec);
}

struct Contrast {
  Eigen::MatrixXd g;  // rows are contrasts; columns follow the support order
  std::vector<std::string> labels;

  static Contrast identity(long cells) {
    Contrast c;
    c.g = Eigen::MatrixXd::Identity(cells, cells);
    for (long t = 0; t < cells; ++t) c.labels.push_back("mu" + std::to_string(t));
    return c;
  }
  static Contrast difference(long cells, long t1 = 1, long t0 = 0,
                             std::string label = "tau") {
    Contrast c;
    c.g = Eigen::MatrixXd::Zero(1, cells);
    c.g(0, t1) = 1.0;
    c.g(0, t0) = -1.0;
    c.labels.push_back(std::move(label));
    return c;
  }
};

inline Eigen::VectorXd contrast_estimate(const WlsFit& fit, const Contrast& contrast) {
  if (contrast.g.cols() != fit.n_cells)
    throw config_error("contrast: " + std::to_string(contrast.g.cols()) +
                       " columns for a fit with " + std::to_string(fit.n_cells) + " cells");
  return contrast.g * fit.beta;
}

// Local ratio average of Y over units whose real-valued exposure lands within
// h of t, weighted by the inverse window probability.
inline double continuous_mu_hat(const Eigen::VectorXd& y, const Eigen::VectorXd& exposures,
                                const Eigen::VectorXd& window_prob, double t, double h) {
  if (h <= 0.0) throw config_error("continuous_mu_hat: bandwidth must be positive");
  double num = 0.0, den = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    if (std::abs(exposures[i] - t) > h) continue;
    if (!(window_prob[i] > 0.0 && window_prob[i] <= 1.0))
      throw data_error("continuous_mu_hat: window probability of unit " + std::to_string(i) +
                       " outside (0,1]");
    num += y[i] / window_prob[i];
    den += 1.0 / window_prob[i];
  }
  if (den == 0.0) throw data_error("continuous_mu_hat: no unit falls in the window");
  return num / den;
}

// Slope of Y on the centered real-valued exposure, each unit weighted by the
// inverse of its exposure variance.
inline double continuous_wls_slope(const Eigen::VectorXd& y, const Eigen::VectorXd& exposures,
                                   const Eigen::VectorXd& mean_t, const Eigen::VectorXd& var_t) {
  double num = 0.0, den = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    if (!(var_t[i] > 0.0))
      throw data_error("continuous_wls_slope: unit " + std::to_string(i) +
                       " has non-positive exposure variance");
    const double centered = exposures[i] - mean_t[i];
    num += centered * y[i] / var_t[i];
    den += centered * centered / var_t[i];
  }
  if (den == 0.0) throw numerical_error("continuous_wls_slope: centered exposures are all zero");
  return num / den;
}

}  // namespace netexp
