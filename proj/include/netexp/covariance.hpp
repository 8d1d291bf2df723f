#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "netexp/estimate.hpp"
#include "netexp/graph.hpp"

namespace netexp {

inline constexpr long kDefaultEigenSizeGuard = 20000;
inline constexpr double kDefaultEigenTol = 1e-9;
inline constexpr double kNormal95 = 1.959963984540054;  // two-sided 95% quantile

struct BandwidthResult {
  int b = 0;
  bool log_branch = false;           // average path length below 2*log(n)/log(degree)
  bool degenerate_degree = false;    // avg degree <= 1: fell back to the cube-root rule
};

// Bandwidth from average path length, size, average degree, and the exposure
// locality K: half the path length when it is below 2*log(n)/log(degree),
// otherwise its cube root; floored at 2K and rounded to the nearest integer.
inline BandwidthResult bandwidth_select(double apl, long n, double avg_degree, int locality,
                                        Rounding rounding = Rounding::HalfAwayFromZero) {
  if (n < 2) throw config_error("bandwidth_select: need at least two units");
  if (locality < 0) throw config_error("bandwidth_select: negative locality");
  BandwidthResult result;
  double b_tilde;
  if (avg_degree <= 1.0) {
    result.degenerate_degree = true;
    b_tilde = std::cbrt(apl);
  } else {
    const double threshold = 2.0 * std::log(static_cast<double>(n)) / std::log(avg_degree);
    result.log_branch = apl < threshold;
    b_tilde = result.log_branch ? 0.5 * apl : std::cbrt(apl);
  }
  result.b = static_cast<int>(
      round_to_int(std::max(b_tilde, 2.0 * static_cast<double>(locality)), rounding));
  return result;
}

// Uniform kernel over the given units: K_ij = 1 iff the path distance on the
// full symmetric network is at most b. Stored sparsely by rows (local
// indices, diagonal included).
struct KernelMatrix {
  int b = 0;
  long n = 0;                          // number of sample units
  std::vector<std::vector<int>> rows;  // sorted local column indices with K_ij = 1

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < n; ++i)
      for (int j : rows[static_cast<std::size_t>(i)]) k(i, j) = 1.0;
    return k;
  }
  std::vector<double> row_sums() const {
    std::vector<double> sums(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
      sums[static_cast<std::size_t>(i)] = static_cast<double>(rows[static_cast<std::size_t>(i)].size());
    return sums;
  }
};

inline KernelMatrix build_kernel(const Graph& g, const std::vector<int>& units, int b,
                                 int threads = 1) {
  if (b < 0) throw config_error("build_kernel: negative bandwidth");
  KernelMatrix kernel;
  kernel.b = b;
  kernel.n = static_cast<long>(units.size());
  kernel.rows.assign(units.size(), {});
  std::vector<int> local_of(static_cast<std::size_t>(g.n()), -1);
  for (std::size_t r = 0; r < units.size(); ++r)
    local_of[static_cast<std::size_t>(units[r])] = static_cast<int>(r);
  parallel_for(kernel.n, threads, [&](long r) {
    auto profile = bfs_distances(g, units[static_cast<std::size_t>(r)], static_cast<dist_t>(b));
    auto& row = kernel.rows[static_cast<std::size_t>(r)];
    for (long j = 0; j < g.n(); ++j)
      if (profile.dist[static_cast<std::size_t>(j)] <= static_cast<dist_t>(b) &&
          local_of[static_cast<std::size_t>(j)] >= 0)
        row.push_back(local_of[static_cast<std::size_t>(j)]);
  });
  return kernel;
}

// Eigen-split of the kernel: k_plus collects the nonnegative part of the
// spectrum, k_minus the absolute negative part, so k_plus = K + k_minus.
// Eigenvalues within eigen_tol of zero (relative to the spectral norm) are
// treated as zero.
struct KernelSplit {
  Eigen::MatrixXd k_plus;
  Eigen::MatrixXd k_minus;
  double eigen_tol = kDefaultEigenTol;
  double min_eigenvalue = 0.0;
  bool kernel_psd = true;
};

inline KernelSplit psd_split(const Eigen::MatrixXd& kernel, double eigen_tol = kDefaultEigenTol,
                             long size_guard = kDefaultEigenSizeGuard) {
  if (kernel.rows() != kernel.cols()) throw numerical_error("psd_split: non-square kernel");
  if (kernel.rows() > size_guard)
    throw numerical_error("psd_split: kernel of size " + std::to_string(kernel.rows()) +
                          " exceeds the eigendecomposition guard " + std::to_string(size_guard));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kernel);
  if (solver.info() != Eigen::Success)
    throw numerical_error("psd_split: eigendecomposition failed to converge");
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const Eigen::MatrixXd& q = solver.eigenvectors();
  KernelSplit split;
  split.eigen_tol = eigen_tol;
  const long n = kernel.rows();
  split.min_eigenvalue = n > 0 ? lambda.minCoeff() : 0.0;
  const double norm = n > 0 ? lambda.cwiseAbs().maxCoeff() : 0.0;
  const double cut = eigen_tol * norm;
  Eigen::VectorXd pos = lambda.cwiseMax(0.0);
  Eigen::VectorXd neg = (-lambda).cwiseMax(0.0);
  for (long i = 0; i < n; ++i) {
    if (pos[i] <= cut) pos[i] = 0.0;
    if (neg[i] <= cut) neg[i] = 0.0;
  }
  split.kernel_psd = neg.maxCoeff() == 0.0;
  split.k_plus = q * pos.asDiagonal() * q.transpose();
  split.k_minus = q * neg.asDiagonal() * q.transpose();
  return split;
}

inline KernelSplit psd_split(const KernelMatrix& kernel, double eigen_tol = kDefaultEigenTol,
                             long size_guard = kDefaultEigenSizeGuard) {
  return psd_split(kernel.dense(), eigen_tol, size_guard);
}

namespace detail {

// B = diag(w * e) * C, the residual-scaled weighted design matrix that
// appears on both sides of the sandwich middle.
inline Eigen::MatrixXd scaled_design(const WlsFit& fit) {
  return fit.design.array().colwise() * (fit.weights.array() * fit.residuals.array());
}

}  // namespace detail

// Sandwich covariance over the full regressor block:
// (C'WC)^-1 (C'W e K e W C) (C'WC)^-1.
inline Eigen::MatrixXd hac_cov_full(const WlsFit& fit, const KernelMatrix& kernel) {
  if (kernel.n != fit.design.rows())
    throw numerical_error("hac_cov: kernel and fit cover different unit counts");
  const Eigen::MatrixXd b = detail::scaled_design(fit);
  const long p = b.cols();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (long i = 0; i < kernel.n; ++i)
    for (int j : kernel.rows[static_cast<std::size_t>(i)]) meat += b.row(i).transpose() * b.row(j);
  return fit.bread_inv * meat * fit.bread_inv;
}

inline Eigen::MatrixXd hac_cov_full(const WlsFit& fit, const Eigen::MatrixXd& kernel) {
  if (kernel.rows() != fit.design.rows())
    throw numerical_error("hac_cov: kernel and fit cover different unit counts");
  const Eigen::MatrixXd b = detail::scaled_design(fit);
  const Eigen::MatrixXd meat = b.transpose() * kernel * b;
  return fit.bread_inv * meat * fit.bread_inv;
}

// Cell-coefficient block of the sandwich (the whole matrix for unadjusted
// fits, the upper-left block for covariate-adjusted ones).
template <typename Kernel>
inline Eigen::MatrixXd hac_cov(const WlsFit& fit, const Kernel& kernel) {
  return hac_cov_full(fit, kernel).topLeftCorner(fit.n_cells, fit.n_cells);
}

inline Eigen::MatrixXd hac_cov_plus(const WlsFit& fit, const KernelSplit& split) {
  return hac_cov(fit, split.k_plus);
}

// Sandwich with an identity kernel: the heteroskedasticity-robust covariance
// that ignores any cross-unit dependence.
inline Eigen::MatrixXd ehw_cov(const WlsFit& fit) {
  const Eigen::MatrixXd b = detail::scaled_design(fit);
  const Eigen::MatrixXd meat = b.transpose() * b;
  return (fit.bread_inv * meat * fit.bread_inv).topLeftCorner(fit.n_cells, fit.n_cells);
}

// Quadratic-form variance for an inverse-probability contrast:
// n^-1 * sum_ij (delta_i - tau)(delta_j - tau) K_ij. Estimates the variance
// of sqrt(n) * tau_hat; divide by n for the variance of tau_hat itself.
inline double leung_ht_variance(const Eigen::VectorXd& delta, double tau_hat,
                                const KernelMatrix& kernel) {
  if (kernel.n != delta.size())
    throw numerical_error("leung_ht_variance: kernel and delta sizes differ");
  const Eigen::VectorXd centered = delta.array() - tau_hat;
  double total = 0.0;
  for (long i = 0; i < kernel.n; ++i)
    for (int j : kernel.rows[static_cast<std::size_t>(i)]) total += centered[i] * centered[j];
  return total / static_cast<double>(delta.size());
}

inline double leung_ht_variance(const Eigen::VectorXd& delta, double tau_hat,
                                const Eigen::MatrixXd& kernel) {
  const Eigen::VectorXd centered = delta.array() - tau_hat;
  return centered.dot(kernel * centered) / static_cast<double>(delta.size());
}

inline double leung_ht_variance_plus(const Eigen::VectorXd& delta, double tau_hat,
                                     const KernelSplit& split) {
  return leung_ht_variance(delta, tau_hat, split.k_plus);
}

// Per-unit contrast summand for the inverse-probability estimator:
// delta_i = sum_t G_rt * 1(T_i = t) / pi_i(t) * Y_i.
inline Eigen::VectorXd leung_delta(const Dataset& ds, const Eigen::RowVectorXd& g_row) {
  Eigen::VectorXd delta(ds.n());
  for (long i = 0; i < ds.n(); ++i) {
    const long t = ds.t[static_cast<std::size_t>(i)];
    delta[i] = g_row[t] / ds.pi(i, t) * ds.y[i];
  }
  return delta;
}

struct SeResult {
  Eigen::VectorXd se;                  // NaN where the variance is negative
  std::vector<bool> negative_variance;
};

// Contrast standard errors from a covariance matrix of the cell coefficients.
// A negative diagonal entry of G V G' is flagged and reported as NaN rather
// than truncated.
inline SeResult contrast_se(const Eigen::MatrixXd& v, const Contrast& contrast) {
  if (contrast.g.cols() != v.cols())
    throw config_error("contrast_se: contrast has " + std::to_string(contrast.g.cols()) +
                       " columns, covariance has " + std::to_string(v.cols()));
  const Eigen::MatrixXd gvg = contrast.g * v * contrast.g.transpose();
  SeResult result;
  result.se.resize(gvg.rows());
  result.negative_variance.assign(static_cast<std::size_t>(gvg.rows()), false);
  for (long r = 0; r < gvg.rows(); ++r) {
    if (gvg(r, r) < 0.0) {
      result.se[r] = std::numeric_limits<double>::quiet_NaN();
      result.negative_variance[static_cast<std::size_t>(r)] = true;
    } else {
      result.se[r] = std::sqrt(gvg(r, r));
    }
  }
  return result;
}

}  // namespace netexp
