#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "netexp/covariance.hpp"
#include "netexp/graph.hpp"

namespace netexp {

struct NegativeMoments {
  double m1 = 0.0;        // mean row sum of the kernel itself
  double m1_minus = 0.0;  // mean row sum of |K-|
  double m2_minus = 0.0;  // mean squared row sum of |K-|
  double max_j_minus = 0.0;
  double min_eigenvalue = 0.0;
  bool kernel_psd = true;
};

// Row-sum moments of the negative eigen-part of the bandwidth-b kernel, and
// the largest shell-restricted pair sum. All units participate (no sample
// restriction): these are network-level quantities.
inline NegativeMoments kernel_negative_moments(const Graph& g, int b,
                                               double eigen_tol = kDefaultEigenTol,
                                               long size_guard = kDefaultEigenSizeGuard) {
  std::vector<int> all_units(static_cast<std::size_t>(g.n()));
  for (long i = 0; i < g.n(); ++i) all_units[static_cast<std::size_t>(i)] = static_cast<int>(i);
  KernelMatrix kernel = build_kernel(g, all_units, b);
  KernelSplit split = psd_split(kernel, eigen_tol, size_guard);

  NegativeMoments out;
  out.min_eigenvalue = split.min_eigenvalue;
  out.kernel_psd = split.kernel_psd;
  const double n = static_cast<double>(g.n());
  for (double rs : kernel.row_sums()) out.m1 += rs / n;

  std::vector<double> row_sums_minus(static_cast<std::size_t>(g.n()));
  for (long i = 0; i < g.n(); ++i) {
    const double rs = split.k_minus.row(i).cwiseAbs().sum();
    row_sums_minus[static_cast<std::size_t>(i)] = rs;
    out.m1_minus += rs / n;
    out.m2_minus += rs * rs / n;
  }
  const auto shells = j_count_profile(g, row_sums_minus);
  for (double v : shells) out.max_j_minus = std::max(out.max_j_minus, v);
  return out;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  long points_used = 0;
  bool dropped_zeros = false;
};

// OLS slope of log(value) on log(b) with an intercept; zero values are
// dropped with a flag.
inline SlopeFit loglog_slope(const std::vector<double>& values, const std::vector<int>& grid) {
  if (values.size() != grid.size()) throw config_error("loglog_slope: size mismatch");
  SlopeFit out;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= 0.0) {
      out.dropped_zeros = true;
      continue;
    }
    if (grid[i] <= 0) throw config_error("loglog_slope: bandwidths must be positive");
    lx.push_back(std::log(static_cast<double>(grid[i])));
    ly.push_back(std::log(values[i]));
  }
  out.points_used = static_cast<long>(lx.size());
  if (out.points_used < 2)
    throw data_error("loglog_slope: fewer than 2 positive values on the grid");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw data_error("loglog_slope: degenerate grid");
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  return out;
}

struct DiagnosticsRow {
  int b = 0;
  double m1 = 0.0;
  double m1_minus = 0.0;
  double m2_minus = 0.0;
  double max_j_minus = 0.0;
  double min_eigenvalue = 0.0;
  bool kernel_psd = true;
};

struct DiagnosticsReport {
  std::vector<DiagnosticsRow> rows;
  std::vector<int> grid;
  // growth slopes across the grid; absent when fewer than 2 positive values
  std::optional<SlopeFit> slope_m1;
  std::optional<SlopeFit> slope_m1_minus;
  std::optional<SlopeFit> slope_m2_minus;
  std::optional<SlopeFit> slope_max_j_minus;
};

inline DiagnosticsReport diagnostics_report(const Graph& g, const std::vector<int>& grid,
                                            double eigen_tol = kDefaultEigenTol,
                                            long size_guard = kDefaultEigenSizeGuard) {
  if (grid.empty()) throw config_error("diagnostics: empty bandwidth grid");
  DiagnosticsReport report;
  report.grid = grid;
  std::vector<double> m1, m1m, m2m, jm;
  for (int b : grid) {
    if (b < 0) throw config_error("diagnostics: negative bandwidth in grid");
    NegativeMoments nm = kernel_negative_moments(g, b, eigen_tol, size_guard);
    DiagnosticsRow row;
    row.b = b;
    row.m1 = nm.m1;
    row.m1_minus = nm.m1_minus;
    row.m2_minus = nm.m2_minus;
    row.max_j_minus = nm.max_j_minus;
    row.min_eigenvalue = nm.min_eigenvalue;
    row.kernel_psd = nm.kernel_psd;
    report.rows.push_back(row);
    m1.push_back(nm.m1);
    m1m.push_back(nm.m1_minus);
    m2m.push_back(nm.m2_minus);
    jm.push_back(nm.max_j_minus);
  }
  auto try_slope = [&](const std::vector<double>& v) -> std::optional<SlopeFit> {
    try {
      return loglog_slope(v, grid);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  report.slope_m1 = try_slope(m1);
  report.slope_m1_minus = try_slope(m1m);
  report.slope_m2_minus = try_slope(m2m);
  report.slope_max_j_minus = try_slope(jm);
  return report;
}

}  // namespace netexp
