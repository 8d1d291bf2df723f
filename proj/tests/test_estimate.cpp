#include <catch2/catch_amalgamated.hpp>

#include "netexp/estimate.hpp"
#include "netexp/simulate.hpp"
#include "oracles.hpp"

using namespace netexp;

namespace {

Dataset three_unit_dataset() {
  // units with T = (1, 1, 0), pi(T=1) = (0.5, 0.25), Y = (1, 3, 5)
  Dataset ds;
  ds.n_cells = 2;
  ds.units = {0, 1, 2};
  ds.y.resize(3);
  ds.y << 1.0, 3.0, 5.0;
  ds.x.resize(3, 0);
  ds.t = {1, 1, 0};
  ds.pi.resize(3, 2);
  ds.pi << 0.5, 0.5, 0.75, 0.25, 0.6, 0.4;
  return ds;
}

}  // namespace

TEST_CASE("ratio and inverse-probability means on a hand dataset") {
  Dataset ds = three_unit_dataset();
  CHECK(hajek(ds, 1) == Catch::Approx((2.0 + 12.0) / (2.0 + 4.0)).epsilon(1e-14));
  CHECK(horvitz_thompson(ds, 1) == Catch::Approx(14.0 / 3.0).epsilon(1e-14));

  Dataset constant = ds;
  constant.y.setConstant(4.2);
  CHECK(hajek(constant, 0) == Catch::Approx(4.2).epsilon(1e-14));
  CHECK(hajek(constant, 1) == Catch::Approx(4.2).epsilon(1e-14));

  // constant Y: the inverse-probability mean scales by the estimate of 1
  CHECK(horvitz_thompson(constant, 1) == Catch::Approx(4.2 * one_ht(constant, 1)).epsilon(1e-14));

  Dataset empty_cell = ds;
  empty_cell.t = {1, 1, 1};
  CHECK_THROWS_AS(hajek(empty_cell, 0), data_error);
}

TEST_CASE("unadjusted fit reproduces the ratio means") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Dataset ds = oracles::random_dataset(15, 3, 0, seed);
    WlsFit f = fit_wls(ds, FitSpec::Unadjusted);
    for (long t = 0; t < 3; ++t)
      CHECK(f.beta[t] == Catch::Approx(hajek(ds, t)).epsilon(1e-10));
  }
}

TEST_CASE("transformed fit reproduces the inverse-probability means") {
  for (std::uint64_t seed : {4, 5, 6}) {
    Dataset ds = oracles::random_dataset(18, 3, 0, seed);
    WlsFit f = fit_ht_wls(ds);
    for (long t = 0; t < 3; ++t)
      CHECK(f.beta[t] == Catch::Approx(horvitz_thompson(ds, t)).epsilon(1e-10));
  }
  // equal propensities and balanced cells: the transformation is the identity
  Dataset ds;
  ds.n_cells = 2;
  ds.units = {0, 1, 2, 3};
  ds.y.resize(4);
  ds.y << 1.0, 2.0, 3.0, 4.0;
  ds.x.resize(4, 0);
  ds.t = {0, 1, 0, 1};
  ds.pi.resize(4, 2);
  ds.pi.setConstant(0.5);
  WlsFit ht = fit_ht_wls(ds);
  WlsFit unadj = fit_wls(ds, FitSpec::Unadjusted);
  CHECK((ht.beta - unadj.beta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fully interacted fit equals the per-cell regressions") {
  for (std::uint64_t seed : {7, 8}) {
    Dataset ds = oracles::random_dataset(40, 3, 2, seed, 4);
    WlsFit f = fit_wls(ds, FitSpec::FullyInteracted);
    for (long t = 0; t < 3; ++t) {
      std::vector<long> members;
      for (long i = 0; i < ds.n(); ++i)
        if (ds.t[static_cast<std::size_t>(i)] == t) members.push_back(i);
      Eigen::VectorXd y(static_cast<long>(members.size()));
      Eigen::MatrixXd x(static_cast<long>(members.size()), 2);
      Eigen::VectorXd w(static_cast<long>(members.size()));
      for (std::size_t r = 0; r < members.size(); ++r) {
        y[static_cast<long>(r)] = ds.y[members[r]];
        x.row(static_cast<long>(r)) = ds.x.row(members[r]);
        w[static_cast<long>(r)] = 1.0 / ds.pi(members[r], t);
      }
      auto cell = oracles::per_cell_wls(y, x, w);
      CHECK(f.beta[t] == Catch::Approx(cell.intercept).epsilon(1e-10));
      for (long k = 0; k < 2; ++k)
        CHECK(f.gamma(k, t) == Catch::Approx(cell.slopes[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("additive fit equals the ratio mean of the adjusted outcome") {
  for (std::uint64_t seed : {9, 10}) {
    Dataset ds = oracles::random_dataset(30, 2, 2, seed, 3);
    WlsFit f = fit_wls(ds, FitSpec::Additive);
    REQUIRE(f.gamma.size() == 2);
    for (long t = 0; t < 2; ++t) {
      // ratio mean of covariates within the cell
      Eigen::VectorXd x_mean = Eigen::VectorXd::Zero(2);
      double den = 0.0;
      for (long i = 0; i < ds.n(); ++i)
        if (ds.t[static_cast<std::size_t>(i)] == t) {
          x_mean += ds.x.row(i).transpose() / ds.pi(i, t);
          den += 1.0 / ds.pi(i, t);
        }
      x_mean /= den;
      const double expected = hajek(ds, t) - x_mean.dot(f.gamma.col(0));
      CHECK(f.beta[t] == Catch::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("weighted normal equations hold at the optimum") {
  Dataset ds = oracles::random_dataset(25, 2, 2, 11, 3);
  for (FitSpec spec : {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted}) {
    WlsFit f = fit_wls(ds, spec);
    Eigen::VectorXd grad = f.design.transpose() * (f.weights.array() * f.residuals.array()).matrix();
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, ds.y.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("location shift moves every cell coefficient by the shift") {
  Dataset ds = oracles::random_dataset(30, 3, 2, 12, 4);
  const double shift = 3.7;
  Dataset shifted = ds;
  shifted.y.array() += shift;
  for (FitSpec spec : {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted}) {
    WlsFit f0 = fit_wls(ds, spec);
    WlsFit f1 = fit_wls(shifted, spec);
    for (long t = 0; t < 3; ++t)
      CHECK(f1.beta[t] - f0.beta[t] == Catch::Approx(shift).epsilon(1e-10));
    // contrasts with G * 1 = 0 are unchanged
    Contrast diff = Contrast::difference(3, 2, 0);
    CHECK(contrast_estimate(f1, diff)[0] ==
          Catch::Approx(contrast_estimate(f0, diff)[0]).margin(1e-10));
  }
}

TEST_CASE("the transformed estimator is not location invariant") {
  // unequal estimates of 1 across cells: a shift moves the contrast
  Dataset ds;
  ds.n_cells = 2;
  ds.units = {0, 1, 2, 3};
  ds.y.resize(4);
  ds.y << 1.0, 2.0, 3.0, 4.0;
  ds.x.resize(4, 0);
  ds.t = {0, 1, 0, 1};
  ds.pi.resize(4, 2);
  ds.pi << 0.3, 0.7, 0.3, 0.7, 0.6, 0.4, 0.6, 0.4;
  REQUIRE(one_ht(ds, 0) != Catch::Approx(one_ht(ds, 1)));
  Contrast diff = Contrast::difference(2);
  WlsFit f0 = fit_ht_wls(ds);
  Dataset shifted = ds;
  shifted.y.array() += 5.0;
  WlsFit f1 = fit_ht_wls(shifted);
  CHECK(std::abs(contrast_estimate(f1, diff)[0] - contrast_estimate(f0, diff)[0]) > 0.1);
}

TEST_CASE("scale equivariance") {
  Dataset ds = oracles::random_dataset(24, 2, 1, 13, 3);
  Dataset scaled = ds;
  scaled.y *= -2.5;
  for (FitSpec spec :
       {FitSpec::Unadjusted, FitSpec::Additive, FitSpec::FullyInteracted, FitSpec::HtTransformed}) {
    WlsFit f0 = fit(ds, spec);
    WlsFit f1 = fit(scaled, spec);
    CHECK((f1.beta + 2.5 * f0.beta).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("inverse-probability estimates are design-unbiased under enumeration") {
  // enumeration-defined expected responses on a small block design
  Graph g = oracles::random_graph(8, 0.3, 73);
  std::vector<std::vector<int>> blocks{{0, 1, 2, 3}, {4, 5, 6, 7}};
  std::vector<long> treat{2, 1};
  Design design = Design::block_complete({0, 0, 0, 0, 1, 1, 1, 1}, treat);
  ExposureEvaluator evaluator(ExposureMapping::any_treated_neighbor(), g);
  auto table = exact_propensity(ExposureMapping::any_treated_neighbor(), design, g);
  auto sample = effective_sample(table);

  // fixed potential outcomes: y depends on the whole assignment
  auto outcome = [&](const std::vector<int>& d) {
    Eigen::VectorXd y(8);
    for (long i = 0; i < 8; ++i) {
      double peers = 0.0;
      for (int j : g.sym_neighbors(static_cast<int>(i)))
        peers += d[static_cast<std::size_t>(j)];
      y[i] = 1.0 + 0.5 * static_cast<double>(i) + 2.0 * d[static_cast<std::size_t>(i)] + peers;
    }
    return y;
  };

  // mu(t) from the defining sum; mean of the estimator over all assignments
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd ht_mean = Eigen::VectorXd::Zero(2);
  const double m = static_cast<double>(sample.units.size());
  oracles::enumerate_block_assignments(
      blocks, treat,
      [&](const std::vector<int>& d, double prob) {
        Eigen::VectorXd y = outcome(d);
        auto t = evaluator.exposures(d);
        Dataset ds = make_dataset(sample.units, y, Eigen::MatrixXd(8, 0), t, table);
        for (long tt = 0; tt < 2; ++tt) ht_mean[tt] += prob * horvitz_thompson(ds, tt);
        for (int i : sample.units)
          mu[t[static_cast<std::size_t>(i)]] +=
              prob * y[i] / table.pi(i, t[static_cast<std::size_t>(i)]) / m;
      },
      8);
  CHECK((ht_mean - mu).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empty or too-small cells are rejected with the cell named") {
  Dataset ds = oracles::random_dataset(12, 2, 1, 14, 2);
  for (auto& t : ds.t) t = 0;  // cell 1 empty
  CHECK_THROWS_WITH(fit_wls(ds, FitSpec::Unadjusted),
                    Catch::Matchers::ContainsSubstring("cell 1"));

  Dataset tiny = oracles::random_dataset(12, 2, 2, 15, 3);
  int moved = 0;  // leave exactly two units in cell 1: too few for 2 slopes
  for (std::size_t i = 0; i < tiny.t.size(); ++i) {
    if (tiny.t[i] == 1 && moved < 10) {
      if (static_cast<long>(i) >= 2) tiny.t[i] = 0;
    }
  }
  long c1 = 0;
  for (int t : tiny.t) c1 += t;
  if (c1 >= 1 && c1 <= 2)
    CHECK_THROWS_AS(fit_wls(tiny, FitSpec::FullyInteracted), data_error);
}

TEST_CASE("single-unit cells are allowed for the unadjusted fit") {
  Dataset ds;
  ds.n_cells = 2;
  ds.units = {0, 1, 2};
  ds.y.resize(3);
  ds.y << 1.0, 2.0, 7.0;
  ds.x.resize(3, 0);
  ds.t = {0, 0, 1};
  ds.pi.resize(3, 2);
  ds.pi << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;
  WlsFit f = fit_wls(ds, FitSpec::Unadjusted);
  CHECK(f.beta[1] == Catch::Approx(7.0));
}

TEST_CASE("a covariate column of zeros changes nothing") {
  Dataset ds = oracles::random_dataset(20, 2, 1, 16, 3);
  Dataset padded = ds;
  padded.x.conservativeResize(20, 2);
  padded.x.col(1).setZero();
  for (FitSpec spec : {FitSpec::Additive, FitSpec::FullyInteracted}) {
    WlsFit f0 = fit_wls(ds, spec);
    WlsFit f1 = fit_wls(padded, spec);
    CHECK(!f1.dropped_zero_columns.empty());
    CHECK((f0.beta - f1.beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f0.residuals - f1.residuals).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("collinear covariates are rejected with a named column") {
  Dataset ds = oracles::random_dataset(20, 2, 2, 17, 3);
  ds.x.col(1) = 2.0 * ds.x.col(0);
  CHECK_THROWS_AS(fit_wls(ds, FitSpec::Additive), numerical_error);
}

TEST_CASE("contrast estimates") {
  Dataset ds = oracles::random_dataset(20, 4, 0, 18, 2);
  WlsFit f = fit_wls(ds, FitSpec::Unadjusted);
  Contrast identity = Contrast::identity(4);
  CHECK((contrast_estimate(f, identity) - f.beta).cwiseAbs().maxCoeff() == 0.0);

  // 2x2 factorial: main effects and interaction rows
  Contrast factorial;
  factorial.g.resize(3, 4);
  factorial.g << -0.5, -0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5;
  factorial.labels = {"direct", "spillover", "interaction"};
  Eigen::VectorXd tau = contrast_estimate(f, factorial);
  CHECK(tau[0] == Catch::Approx(0.5 * (f.beta[2] + f.beta[3] - f.beta[0] - f.beta[1])));
  CHECK(tau[2] == Catch::Approx(0.5 * (f.beta[0] + f.beta[3] - f.beta[1] - f.beta[2])));

  Contrast wrong;
  wrong.g.resize(1, 3);
  wrong.g.setZero();
  wrong.labels = {"bad"};
  CHECK_THROWS_AS(contrast_estimate(f, wrong), config_error);
}

TEST_CASE("local window average") {
  Eigen::VectorXd y(4), t(4), prob(4);
  y << 1.0, 2.0, 3.0, 4.0;
  t << 0.1, 0.2, 0.3, 0.4;
  prob.setConstant(0.5);
  // every unit in the window: plain sample mean
  CHECK(continuous_mu_hat(y, t, prob, 0.25, 0.5) == Catch::Approx(2.5));
  // single unit in the window
  CHECK(continuous_mu_hat(y, t, prob, 0.4, 0.05) == Catch::Approx(4.0));
  CHECK_THROWS_AS(continuous_mu_hat(y, t, prob, 9.0, 0.1), data_error);
  CHECK_THROWS_AS(continuous_mu_hat(y, t, prob, 0.25, -1.0), config_error);
}

TEST_CASE("centered-exposure slope recovers a constant slope in expectation") {
  // exposure: share of treated friends under iid assignment
  Graph g = oracles::random_graph(60, 0.15, 79);
  std::vector<int> units;
  for (int i = 0; i < 60; ++i)
    if (!g.sym_neighbors(i).empty()) units.push_back(i);
  // p = 0.5: flipping the assignment negates the centered exposures, so the
  // slope's Monte-Carlo mean is exactly beta
  const long m = static_cast<long>(units.size());
  const double p = 0.5, beta = 2.0;
  Eigen::VectorXd mean_t(m), var_t(m), y0(m);
  RngStream pop_rng(21, 0);
  for (long r = 0; r < m; ++r) {
    const double deg = static_cast<double>(g.sym_neighbors(units[static_cast<std::size_t>(r)]).size());
    mean_t[r] = p;
    var_t[r] = p * (1.0 - p) / deg;
    y0[r] = pop_rng.normal();
  }
  const long draws = 10000;
  double mean_slope = 0.0, mean_null = 0.0;
  std::vector<double> slopes;
  for (long rep = 0; rep < draws; ++rep) {
    RngStream rng(22, static_cast<std::uint64_t>(rep));
    Eigen::VectorXd share(m);
    std::vector<int> d(60);
    for (auto& v : d) v = rng.bernoulli(p) ? 1 : 0;
    for (long r = 0; r < m; ++r) {
      const auto& nbrs = g.sym_neighbors(units[static_cast<std::size_t>(r)]);
      double s = 0.0;
      for (int j : nbrs) s += d[static_cast<std::size_t>(j)];
      share[r] = s / static_cast<double>(nbrs.size());
    }
    Eigen::VectorXd y = y0 + beta * share;
    const double slope = continuous_wls_slope(y, share, mean_t, var_t);
    slopes.push_back(slope);
    mean_slope += slope / static_cast<double>(draws);
    mean_null += continuous_wls_slope(y0, share, mean_t, var_t) / static_cast<double>(draws);
  }
  double sd = 0.0;
  for (double s : slopes) sd += (s - mean_slope) * (s - mean_slope);
  sd = std::sqrt(sd / static_cast<double>(draws - 1)) / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(mean_slope - beta) <= 3.0 * sd);
  CHECK(std::abs(mean_null) <= 3.0 * sd);

  Eigen::VectorXd bad_var = var_t;
  bad_var[0] = 0.0;
  CHECK_THROWS_AS(continuous_wls_slope(y0, mean_t, mean_t, bad_var), data_error);
}

TEST_CASE("heterogeneous slopes average out") {
  Graph g = oracles::random_graph(50, 0.2, 83);
  std::vector<int> units;
  for (int i = 0; i < 50; ++i)
    if (!g.sym_neighbors(i).empty()) units.push_back(i);
  const long m = static_cast<long>(units.size());
  const double p = 0.5;
  Eigen::VectorXd mean_t(m), var_t(m), beta_i(m);
  RngStream pop_rng(23, 0);
  double beta_bar = 0.0;
  for (long r = 0; r < m; ++r) {
    const double deg = static_cast<double>(g.sym_neighbors(units[static_cast<std::size_t>(r)]).size());
    mean_t[r] = p;
    var_t[r] = p * (1.0 - p) / deg;
    beta_i[r] = pop_rng.uniform(0.5, 1.5);
    beta_bar += beta_i[r] / static_cast<double>(m);
  }
  const long draws = 10000;
  std::vector<double> slopes;
  double mean_slope = 0.0;
  for (long rep = 0; rep < draws; ++rep) {
    RngStream rng(24, static_cast<std::uint64_t>(rep));
    std::vector<int> d(50);
    for (auto& v : d) v = rng.bernoulli(p) ? 1 : 0;
    Eigen::VectorXd share(m);
    for (long r = 0; r < m; ++r) {
      const auto& nbrs = g.sym_neighbors(units[static_cast<std::size_t>(r)]);
      double s = 0.0;
      for (int j : nbrs) s += d[static_cast<std::size_t>(j)];
      share[r] = s / static_cast<double>(nbrs.size());
    }
    Eigen::VectorXd y = beta_i.array() * share.array();
    const double slope = continuous_wls_slope(y, share, mean_t, var_t);
    slopes.push_back(slope);
    mean_slope += slope / static_cast<double>(draws);
  }
  double sd = 0.0;
  for (double s : slopes) sd += (s - mean_slope) * (s - mean_slope);
  sd = std::sqrt(sd / static_cast<double>(draws - 1)) / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(mean_slope - beta_bar) <= 3.0 * std::max(sd, 1e-6));
}

TEST_CASE("dataset construction centers covariates and validates propensities") {
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  Eigen::MatrixXd x(3, 1);
  x << 5.0, 6.0, 10.0;
  PropensityTable table;
  table.pi.resize(3, 2);
  table.pi << 0.4, 0.6, 0.5, 0.5, 0.7, 0.3;
  Dataset ds = make_dataset({0, 1, 2}, y, x, {0, 1, 0}, table);
  CHECK(std::abs(ds.x.col(0).mean()) < 1e-10);

  PropensityTable bad = table;
  bad.pi(1, 1) = 0.0;
  CHECK_THROWS_WITH(make_dataset({0, 1, 2}, y, x, {0, 1, 0}, bad),
                    Catch::Matchers::ContainsSubstring("unit 1"));
}
