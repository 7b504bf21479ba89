#include "opreg/outcome_model.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "opreg/error.hpp"
#include "opreg/propensity.hpp"
#include "opreg/rng.hpp"
#include "opreg/simulation.hpp"
#include "opreg/stats.hpp"
#include "opreg/variance.hpp"
#include "oracles.hpp"

using namespace opreg;

namespace {

OutcomeModelSpec basic_spec(TargetMeasure m, std::vector<std::string> w_terms = {},
                            std::vector<std::string> z_terms = {},
                            NuisanceForm form = NuisanceForm::kLogOddsProduct) {
  OutcomeModelSpec spec;
  spec.measure = m;
  spec.w_design.terms = std::move(w_terms);
  spec.z_design.terms = std::move(z_terms);
  spec.nuisance_form = form;
  return spec;
}

// four-cell dataset over (a, x) with given counts of successes
Dataset cell_data(int per_cell, int ones00, int ones10, int ones01, int ones11) {
  Dataset d;
  Eigen::Index n = 4 * per_cell;
  d.y.resize(n);
  d.a.resize(n);
  Eigen::VectorXd x(n);
  Eigen::Index i = 0;
  auto fill = [&](double a, double xv, int ones) {
    for (int r = 0; r < per_cell; ++r, ++i) {
      d.a[i] = a;
      x[i] = xv;
      d.y[i] = r < ones ? 1.0 : 0.0;
    }
  };
  fill(0.0, 0.0, ones00);
  fill(1.0, 0.0, ones10);
  fill(0.0, 1.0, ones01);
  fill(1.0, 1.0, ones11);
  d.covariates.add_column("x", x);
  return d;
}

}  // namespace

TEST_CASE("log likelihood closed values") {
  Dataset d;
  d.y.resize(1);
  d.a.resize(1);
  d.y << 1.0;
  d.a << 0.0;
  d.covariates.add_column("x", Eigen::VectorXd::Zero(1));

  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk);
  Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  CHECK(log_likelihood(zero1, zero1, d, spec) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));

  Dataset d2;
  d2.y.resize(2);
  d2.a.resize(2);
  d2.y << 1.0, 0.0;
  d2.a << 0.0, 0.0;
  d2.covariates.add_column("x", Eigen::VectorXd::Zero(2));
  CHECK(log_likelihood(zero1, zero1, d2, spec) ==
        doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("log likelihood matches an independent reimplementation") {
  Rng rng(123);
  Dataset d;
  Eigen::Index n = 40;
  d.y.resize(n);
  d.a.resize(n);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = rng.uniform(-1.5, 1.5);
    d.a[i] = rng.bernoulli(0.5);
    d.y[i] = rng.bernoulli(0.5);
  }
  d.covariates.add_column("x", x);

  for (TargetMeasure m : {TargetMeasure::kRelativeRisk, TargetMeasure::kRiskDifference}) {
    OutcomeModelSpec spec = basic_spec(m, {"x"}, {"x"});
    Eigen::VectorXd alpha(2), beta(2);
    alpha << 0.3, -0.6;
    beta << -0.4, 0.8;

    // oracle: probabilities via bisection on the forward map only
    double want = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double theta = alpha[0] + alpha[1] * x[i];
      double phi = beta[0] + beta[1] * x[i];
      ProbabilityPair p = oracles::bisect_inverse(theta, phi, m);
      double pa = d.a[i] == 1.0 ? p.p1 : p.p0;
      want += d.y[i] * std::log(pa) + (1.0 - d.y[i]) * std::log1p(-pa);
    }
    CHECK(log_likelihood(alpha, beta, d, spec) ==
          doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("log likelihood dimension mismatch") {
  Dataset d = cell_data(5, 2, 3, 2, 3);
  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk, {"x"}, {"x"});
  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd ok = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(log_likelihood(wrong, ok, d, spec), Error);
}

TEST_CASE("analytic score matches finite differences at random points") {
  Rng rng(321);
  Dataset d;
  Eigen::Index n = 60;
  d.y.resize(n);
  d.a.resize(n);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = rng.uniform(-1.0, 1.0);
    d.a[i] = rng.bernoulli(0.5);
    d.y[i] = rng.bernoulli(0.4);
  }
  d.covariates.add_column("x", x);

  for (TargetMeasure m : {TargetMeasure::kRelativeRisk, TargetMeasure::kRiskDifference}) {
    OutcomeModelSpec spec = basic_spec(m, {"x"}, {"x"});
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::VectorXd alpha(2), beta(2);
      alpha << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
      beta << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);

      Eigen::VectorXd g = score(alpha, beta, d, spec);
      Eigen::VectorXd params(4);
      params << alpha, beta;
      for (Eigen::Index j = 0; j < 4; ++j) {
        double h = 1e-5 * (1.0 + std::abs(params[j]));
        auto f = [&](double v) {
          Eigen::VectorXd p = params;
          p[j] = v;
          return log_likelihood(p.head(2), p.tail(2), d, spec);
        };
        double fd = oracles::fd_derivative(f, params[j], h);
        CHECK(std::abs(g[j] - fd) < 1e-6 * (1.0 + std::abs(g[j])));
      }
    }
  }
}

TEST_CASE("score vanishes at the saturated empirical parameters") {
  Dataset d = cell_data(20, 8, 12, 10, 5);
  // empirical cell means
  double p00 = 8.0 / 20.0, p10 = 12.0 / 20.0, p01 = 10.0 / 20.0, p11 = 5.0 / 20.0;

  for (TargetMeasure m : {TargetMeasure::kRelativeRisk, TargetMeasure::kRiskDifference}) {
    ThetaPhi c0 = forward_link(p00, p10, m);
    ThetaPhi c1 = forward_link(p01, p11, m);
    Eigen::VectorXd alpha(2), beta(2);
    alpha << c0.theta, c1.theta - c0.theta;
    beta << c0.phi, c1.phi - c0.phi;

    OutcomeModelSpec spec = basic_spec(m, {"x"}, {"x"});
    Eigen::VectorXd g = score(alpha, beta, d, spec);
    CHECK(g.lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("alpha score components vanish on balanced symmetric data") {
  // equal counts of y = 0, 1 within each exposure cell
  Dataset d;
  Eigen::Index n = 40;
  d.y.resize(n);
  d.a.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.a[i] = i < 20 ? 0.0 : 1.0;
    d.y[i] = (i % 2 == 0) ? 1.0 : 0.0;
  }
  d.covariates.add_column("x", Eigen::VectorXd::Zero(n));

  for (TargetMeasure m : {TargetMeasure::kRelativeRisk, TargetMeasure::kRiskDifference}) {
    OutcomeModelSpec spec = basic_spec(m);
    Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd g = score(zero1, zero1, d, spec);
    CHECK(std::abs(g[0]) < 1e-12);
  }
}

TEST_CASE("fit_mle recovers saturated cell probabilities") {
  Dataset d = cell_data(20, 8, 12, 10, 5);
  for (TargetMeasure m : {TargetMeasure::kRelativeRisk, TargetMeasure::kRiskDifference}) {
    OutcomeModelSpec spec = basic_spec(m, {"x"}, {"x"});
    NuisanceFit fit = fit_mle(d, spec);
    REQUIRE(fit.converged);

    const Eigen::VectorXd& x = d.covariates.column("x");
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      double want_p0 = x[i] == 0.0 ? 0.4 : 0.5;
      double want_p1 = x[i] == 0.0 ? 0.6 : 0.25;
      CHECK(fit.p0[i] == doctest::Approx(want_p0).epsilon(1e-8));
      CHECK(fit.p1[i] == doctest::Approx(want_p1).epsilon(1e-8));
    }
    // score essentially zero and log-likelihood trace nondecreasing
    CHECK(score(fit.alpha, fit.beta, d, spec).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(std::is_sorted(fit.loglik_trace.begin(), fit.loglik_trace.end()));
    CHECK(fit.observed_information.isApprox(fit.observed_information.transpose(),
                                            1e-10));
  }
}

TEST_CASE("fit_mle rejects empty data, warns on tiny n") {
  Dataset d;
  d.y.resize(0);
  d.a.resize(0);
  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk);
  CHECK_THROWS_AS(fit_mle(d, spec), Error);

  Dataset tiny = cell_data(1, 0, 1, 1, 0);
  OutcomeModelSpec s2 = basic_spec(TargetMeasure::kRelativeRisk, {"x"}, {"x"});
  NuisanceFit fit = fit_mle(tiny, s2);
  CHECK(!fit.warnings.empty());
}

TEST_CASE("fit_mle is invariant to row permutation") {
  SimDesign design = default_logop_design(TargetMeasure::kRelativeRisk, 200, 31);
  Dataset d = generate(design);

  std::vector<Eigen::Index> rev(static_cast<std::size_t>(d.n()));
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    rev[static_cast<std::size_t>(i)] = d.n() - 1 - i;
  }
  Dataset reversed = resample(d, rev);

  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk, {"v"}, {"v"});
  NuisanceFit f1 = fit_mle(d, spec);
  NuisanceFit f2 = fit_mle(reversed, spec);
  CHECK((f1.alpha - f2.alpha).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK((f1.beta - f2.beta).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("fit_mle consistency on a large simulated draw") {
  SimDesign design = default_logop_design(TargetMeasure::kRelativeRisk, 4000, 2024);
  Dataset d = generate(design);
  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk, {"v"}, {"v"});
  NuisanceFit fit = fit_mle(d, spec);
  Eigen::MatrixXd cov = fisher_covariance(fit);
  for (Eigen::Index j = 0; j < 2; ++j) {
    double se = std::sqrt(cov(j, j));
    CHECK(std::abs(fit.alpha[j] - design.alpha_true[j]) < 3.5 * se);
  }
}

TEST_CASE("predict") {
  CovariateTable newdata;
  Eigen::VectorXd xs(3);
  xs << -1.0, 0.0, 4.0;
  newdata.add_column("x", xs);

  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk);
  NuisanceFit null_fit;
  null_fit.alpha = Eigen::VectorXd::Zero(1);
  null_fit.beta = Eigen::VectorXd::Zero(1);
  auto preds = predict(null_fit, newdata, spec);
  REQUIRE(preds.size() == 3);
  for (const auto& p : preds) {
    CHECK(p.theta == 0.0);
    CHECK(p.p0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.p1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.effect == doctest::Approx(1.0).epsilon(1e-12));
  }

  // fitted model: predictions match the inverse link compositionally and
  // stay interior under extreme extrapolation
  SimDesign design = default_logop_design(TargetMeasure::kRelativeRisk, 500, 9);
  Dataset d = generate(design);
  OutcomeModelSpec spec_v = basic_spec(TargetMeasure::kRelativeRisk, {"v"}, {"v"});
  NuisanceFit fit = fit_mle(d, spec_v);

  CovariateTable far;
  Eigen::VectorXd v(2);
  v << 200.0, -200.0;  // x100 beyond the training range
  far.add_column("v", v);
  auto extreme = predict(fit, far, spec_v);
  for (std::size_t i = 0; i < extreme.size(); ++i) {
    CHECK(extreme[i].p0 > 0.0);
    CHECK(extreme[i].p0 < 1.0);
    CHECK(extreme[i].p1 > 0.0);
    CHECK(extreme[i].p1 < 1.0);
    double theta = fit.alpha[0] + fit.alpha[1] * v[static_cast<Eigen::Index>(i)];
    double phi = fit.beta[0] + fit.beta[1] * v[static_cast<Eigen::Index>(i)];
    ProbabilityPair want = inverse_link(theta, phi, TargetMeasure::kRelativeRisk);
    CHECK(extreme[i].p0 == doctest::Approx(want.p0).epsilon(1e-12));
    CHECK(extreme[i].effect == doctest::Approx(std::exp(theta)).epsilon(1e-12));
  }

  CovariateTable missing;
  missing.add_column("other", Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(predict(fit, missing, spec_v), Error);
}

TEST_CASE("linear-p0 nuisance form") {
  // sentinel: probabilities outside (0,1) give -infinity
  Dataset d = cell_data(10, 4, 6, 5, 3);
  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk, {"x"}, {"x"},
                                     NuisanceForm::kLinearP0);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd beta(2);
  beta << 1.5, 0.0;  // p0 = 1.5 everywhere
  CHECK(log_likelihood(alpha, beta, d, spec) ==
        -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(score(alpha, beta, d, spec), Error);

  // a feasible fit on data generated under a linear baseline
  SimDesign design = default_linearp0_design(TargetMeasure::kRelativeRisk, 600, 4);
  Dataset sim = generate(design);
  OutcomeModelSpec fit_spec = basic_spec(TargetMeasure::kRelativeRisk, {"v"}, {"v"},
                                         NuisanceForm::kLinearP0);
  NuisanceFit fit = fit_mle(sim, fit_spec);
  CHECK(fit.converged);
  for (Eigen::Index i = 0; i < sim.n(); ++i) {
    CHECK(fit.p0[i] > 0.0);
    CHECK(fit.p0[i] < 1.0);
    CHECK(fit.p1[i] > 0.0);
    CHECK(fit.p1[i] < 1.0);
  }
  // score vs finite differences holds for this form too
  Eigen::VectorXd g = score(fit.alpha, fit.beta, sim, fit_spec);
  CHECK(g.lpNorm<Eigen::Infinity>() < 1e-7);

  // infeasible start: no intercept and a zero covariate value
  Dataset zx = cell_data(5, 2, 3, 2, 3);
  OutcomeModelSpec bad = basic_spec(TargetMeasure::kRelativeRisk, {"x"}, {"x"},
                                    NuisanceForm::kLinearP0);
  bad.z_design.intercept = false;
  try {
    fit_mle(zx, bad);
    FAIL("expected infeasible-start error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("log-op") != std::string::npos);
  }
}

TEST_CASE("logistic refit of the agreement indicator recovers beta") {
  // with theta identically zero the agreement indicator AY + (1-A)(1-Y)
  // follows a logistic model with the odds-product coefficients on A*Z
  SimDesign design = default_logop_design(TargetMeasure::kRelativeRisk, 5000, 88);
  design.alpha_true << 0.0, 0.0;
  Dataset d = generate(design);

  OutcomeModelSpec spec = basic_spec(TargetMeasure::kRelativeRisk, {"v"}, {"v"});
  NuisanceFit fit = fit_mle(d, spec);

  DesignMatrix lg;
  lg.values.resize(d.n(), 4);
  lg.values.col(0).setOnes();
  lg.values.col(1) = d.covariates.column("v");
  lg.values.col(2) = d.a;
  lg.values.col(3) = d.a.cwiseProduct(d.covariates.column("v"));
  lg.column_names = {"intercept", "v", "a", "a:v"};

  Eigen::VectorXd ytilde(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    ytilde[i] = d.a[i] * d.y[i] + (1.0 - d.a[i]) * (1.0 - d.y[i]);
  }
  LogisticFit lfit = logistic_fit(ytilde, lg);
  Eigen::MatrixXd cov = lfit.information.inverse();

  CHECK(std::abs(lfit.gamma[2] - fit.beta[0]) < 3.0 * std::sqrt(cov(2, 2)));
  CHECK(std::abs(lfit.gamma[3] - fit.beta[1]) < 3.0 * std::sqrt(cov(3, 3)));
}
