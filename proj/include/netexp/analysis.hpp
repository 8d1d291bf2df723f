#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "netexp/covariance.hpp"
#include "netexp/design.hpp"
#include "netexp/estimate.hpp"
#include "netexp/exposure.hpp"
#include "netexp/graph.hpp"
#include "netexp/io.hpp"

namespace netexp {

// Inputs for the observed-data workflow: graph + node table + declared
// randomization design and exposure mapping.
struct AnalyzeInputs {
  Graph graph;
  LoadReport load_report;
  NodeTable nodes;
  ExposureMapping mapping;
  Design design;
  Contrast contrast;       // empty: difference for two cells, identity otherwise
  std::vector<FitSpec> specs{FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted};
  std::vector<int> grid;   // empty: 0 .. suggested + 1
  long mc_propensity_draws = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  double eigen_tol = kDefaultEigenTol;
  long size_guard = kDefaultEigenSizeGuard;
};

struct AnalysisBand {
  int b = 0;
  bool kernel_psd = true;
  std::vector<std::vector<double>> se_raw;   // [spec][contrast]
  std::vector<std::vector<double>> se_plus;  // [spec][contrast]
  std::vector<std::vector<bool>> negative_variance;
};

struct AnalysisResult {
  std::vector<std::string> spec_names;
  std::vector<std::string> contrast_labels;
  std::vector<std::vector<double>> estimates;  // [spec][contrast]
  std::vector<std::vector<double>> se_ehw;     // identity-kernel sandwich
  std::vector<AnalysisBand> bands;
  long n = 0;
  long effective_n = 0;
  std::vector<long> cell_sizes;
  std::vector<std::string> cell_labels;
  double apl = 0.0;
  bool apl_singleton = false;
  double avg_degree = 0.0;
  int suggested_b = 0;
  bool bandwidth_degenerate_degree = false;
  PropensityTable::Method propensity_method = PropensityTable::Method::Exact;
  long mc_propensity_draws = 0;
  LoadReport load_report;
  std::vector<std::string> warnings;
};

inline PropensityTable compute_propensity(const ExposureMapping& mapping, const Design& design,
                                          const Graph& g, long mc_draws, std::uint64_t seed,
                                          int threads) {
  try {
    return exact_propensity(mapping, design, g);
  } catch (const config_error&) {
    return mc_propensity(mapping, design, g, mc_draws, seed, threads);
  }
}

inline AnalysisResult run_analysis(const AnalyzeInputs& in) {
  if (!in.nodes.has_d) throw data_error("analysis: node table has no D column");
  if (!in.nodes.has_y) throw data_error("analysis: node table has no Y column");
  const Graph& g = in.graph;
  if (in.nodes.n != g.n())
    throw data_error("analysis: node table has " + std::to_string(in.nodes.n) +
                     " rows, graph has " + std::to_string(g.n()) + " units");

  AnalysisResult out;
  out.n = g.n();
  out.load_report = in.load_report;
  if (in.load_report.duplicates > 0)
    out.warnings.push_back("deduplicated " + std::to_string(in.load_report.duplicates) +
                           " repeated edges");
  if (in.load_report.self_loops > 0)
    out.warnings.push_back("dropped " + std::to_string(in.load_report.self_loops) +
                           " self-links");

  ExposureEvaluator evaluator(in.mapping, g);
  const ExposureSupport support = exposure_support(in.mapping);
  const long cells = in.mapping.support_size();
  for (long t = 0; t < cells; ++t) out.cell_labels.push_back(support.label(t));

  const std::vector<int> exposures = evaluator.exposures(in.nodes.d);
  PropensityTable propensity = compute_propensity(in.mapping, in.design, g,
                                                  in.mc_propensity_draws, in.seed, in.threads);
  out.propensity_method = propensity.method;
  out.mc_propensity_draws = propensity.mc_draws;

  // A zero propensity at the realized exposure value is impossible under the
  // declared design; with exact scores this is a data/design mismatch.
  for (long i = 0; i < g.n(); ++i) {
    const double p = propensity.pi(i, exposures[static_cast<std::size_t>(i)]);
    if (p == 0.0) {
      const std::string msg = "unit " + std::to_string(i) +
                              " realized exposure value " +
                              support.label(exposures[static_cast<std::size_t>(i)]) +
                              " which has zero propensity under the declared design";
      if (propensity.method == PropensityTable::Method::Exact) throw data_error(msg);
      out.warnings.push_back(msg + " (Monte-Carlo propensities; unit excluded)");
    }
  }

  EffectiveSample sample = effective_sample(propensity);
  out.effective_n = static_cast<long>(sample.units.size());
  out.cell_sizes = cell_counts(exposures, sample.units, cells);

  Dataset ds = make_dataset(sample.units, in.nodes.y, in.nodes.x, exposures, propensity);

  Contrast contrast = in.contrast;
  if (contrast.g.size() == 0)
    contrast = cells == 2 ? Contrast::difference(2) : Contrast::identity(cells);
  const long n_contrasts = contrast.g.rows();
  out.contrast_labels = contrast.labels;

  const AplResult apl = average_path_length(g);
  out.apl = apl.value;
  out.apl_singleton = apl.singleton;
  if (apl.singleton)
    out.warnings.push_back("largest component is a single unit; average path length set to 0");
  out.avg_degree = average_degree(g);
  BandwidthResult bw = bandwidth_select(out.apl, g.n(), out.avg_degree, in.mapping.locality());
  out.suggested_b = bw.b;
  out.bandwidth_degenerate_degree = bw.degenerate_degree;
  if (bw.degenerate_degree)
    out.warnings.push_back("average degree <= 1: bandwidth rule fell back to the cube-root "
                           "branch");

  std::vector<int> grid = in.grid;
  if (grid.empty())
    for (int b = 0; b <= out.suggested_b + 1; ++b) grid.push_back(b);

  // fits are bandwidth-free; SEs vary with the kernel
  std::vector<WlsFit> fits;
  std::vector<Eigen::VectorXd> ht_deltas;  // per contrast, for the transformed spec
  Eigen::VectorXd ht_point;
  for (FitSpec spec : in.specs) {
    fits.push_back(fit(ds, spec));
    out.spec_names.push_back(fit_spec_name(spec));
  }
  for (std::size_t s = 0; s < in.specs.size(); ++s) {
    const Eigen::VectorXd est = contrast.g * fits[s].beta;
    std::vector<double> row(static_cast<std::size_t>(n_contrasts));
    for (long c = 0; c < n_contrasts; ++c) row[static_cast<std::size_t>(c)] = est[c];
    out.estimates.push_back(std::move(row));
  }

  const double m = static_cast<double>(ds.n());
  auto spec_ses = [&](std::size_t s, const KernelMatrix& kernel, const KernelSplit* split,
                      std::vector<double>& raw, std::vector<double>& plus,
                      std::vector<bool>& negative) {
    if (in.specs[s] == FitSpec::HtTransformed) {
      // quadratic-form variance built from the inverse-probability summands
      for (long c = 0; c < n_contrasts; ++c) {
        const double tau = out.estimates[s][static_cast<std::size_t>(c)];
        Eigen::VectorXd delta = leung_delta(ds, contrast.g.row(c));
        const double v_raw = leung_ht_variance(delta, tau, kernel) / m;
        raw.push_back(v_raw < 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(v_raw));
        negative.push_back(v_raw < 0.0);
        if (split) {
          const double v_plus = leung_ht_variance_plus(delta, tau, *split) / m;
          plus.push_back(v_plus < 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                      : std::sqrt(v_plus));
        }
      }
      return;
    }
    SeResult se_raw = contrast_se(hac_cov(fits[s], kernel), contrast);
    for (long c = 0; c < n_contrasts; ++c) {
      raw.push_back(se_raw.se[c]);
      negative.push_back(se_raw.negative_variance[static_cast<std::size_t>(c)]);
    }
    if (split) {
      SeResult se_plus = contrast_se(hac_cov(fits[s], split->k_plus), contrast);
      for (long c = 0; c < n_contrasts; ++c) plus.push_back(se_plus.se[c]);
    }
  };

  // identity-kernel (no-interference) standard errors
  {
    KernelMatrix identity = build_kernel(g, sample.units, 0, in.threads);
    for (std::size_t s = 0; s < in.specs.size(); ++s) {
      std::vector<double> raw, plus;
      std::vector<bool> negative;
      spec_ses(s, identity, nullptr, raw, plus, negative);
      out.se_ehw.push_back(std::move(raw));
    }
  }

  for (int b : grid) {
    AnalysisBand band;
    band.b = b;
    KernelMatrix kernel = build_kernel(g, sample.units, b, in.threads);
    KernelSplit split = psd_split(kernel, in.eigen_tol, in.size_guard);
    band.kernel_psd = split.kernel_psd;
    for (std::size_t s = 0; s < in.specs.size(); ++s) {
      std::vector<double> raw, plus;
      std::vector<bool> negative;
      spec_ses(s, kernel, &split, raw, plus, negative);
      band.se_raw.push_back(std::move(raw));
      band.se_plus.push_back(std::move(plus));
      band.negative_variance.push_back(std::move(negative));
    }
    out.bands.push_back(std::move(band));
  }
  return out;
}

// Estimate/SE table in the row layout of the empirical write-ups: one
// "Estimate" row, then per bandwidth a raw-SE row and (for b > 0) an
// adjusted-SE row. Columns are spec x contrast.
inline std::string analysis_csv(const AnalysisResult& r) {
  std::string out = "row";
  for (std::size_t s = 0; s < r.spec_names.size(); ++s)
    for (const auto& label : r.contrast_labels) out += "," + r.spec_names[s] + ":" + label;
  out += "\n";
  out += "Estimate";
  for (const auto& spec_row : r.estimates)
    for (double v : spec_row) out += "," + format_double(v);
  out += "\n";
  for (const auto& band : r.bands) {
    out += "b_n=" + std::to_string(band.b) + " SE";
    for (const auto& spec_row : band.se_raw)
      for (double v : spec_row) out += "," + format_double(v);
    out += "\n";
    if (band.b > 0) {
      out += "b_n=" + std::to_string(band.b) + " WLS+ SE";
      for (const auto& spec_row : band.se_plus)
        for (double v : spec_row) out += "," + format_double(v);
      out += "\n";
    }
  }
  return out;
}

}  // namespace netexp
