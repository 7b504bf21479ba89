#include "opreg/variance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opreg/error.hpp"
#include "opreg/linalg.hpp"
#include "opreg/parallel.hpp"
#include "opreg/rng.hpp"
#include "opreg/stats.hpp"

namespace opreg {

Eigen::MatrixXd fisher_covariance(const NuisanceFit& fit) {
  if (!fit.converged) throw_spec("fisher_covariance requires a converged fit");
  return guarded_symmetric_inverse(fit.observed_information, &fit.coef_names,
                                   "observed information");
}

namespace {

void assert_psd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
  if (max_ev > 0.0 && es.eigenvalues().minCoeff() < -1e-10 * max_ev) {
    throw_singular(std::string(what) + " is not positive semidefinite");
  }
}

}  // namespace

InfluenceDecomposition sandwich_dr(const DrFit& dr, const NuisanceFit& nuisance,
                                   const PropensityFit& prop, const Dataset& data,
                                   const OutcomeModelSpec& spec) {
  const Eigen::Index n = data.n();
  if (nuisance.p0.size() != n || prop.fitted.size() != n) {
    throw_spec("sandwich requires all three fits on the same dataset");
  }

  DesignMatrix w = build_design(data, spec.w_design);
  DesignMatrix z = build_design(data, spec.z_design);
  const Eigen::Index k = w.k();
  const Eigen::Index m = k + z.k();

  // weights frozen at the plug-in fits, as in the solve
  Eigen::MatrixXd weights = build_weight_matrix(dr.weight_kind, nuisance, prop,
                                                data, spec);
  const Eigen::VectorXd& e_hat = prop.fitted;
  const Eigen::VectorXd& p0_hat = nuisance.p0;

  Eigen::MatrixXd u_rows = dr_u_rows(dr.alpha_dr, weights, w, data.a, data.y,
                                     e_hat, p0_hat, spec.measure);

  // tau = -mean d(U)/d(alpha'), analytic
  Eigen::VectorXd theta = w.values * dr.alpha_dr;
  Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dh;
    if (spec.measure == TargetMeasure::kRelativeRisk) {
      dh = -data.a[i] * data.y[i] * std::exp(-data.a[i] * theta[i]);
    } else {
      double r = std::tanh(theta[i]);
      dh = -data.a[i] * (1.0 - r * r);
    }
    tau -= (data.a[i] - e_hat[i]) * dh * weights.row(i).transpose() * w.values.row(i);
  }
  tau /= double(n);

  // mean of U over rows as a function of the outcome plug-ins (only p0 moves;
  // H is evaluated at the estimating-equation alpha and the weights stay put)
  Eigen::VectorXd h_vals(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h_vals[i] = h_transform(data.y[i], data.a[i], theta[i], spec.measure);
  }
  auto mean_u_at_outcome = [&](const Eigen::VectorXd& ab) {
    ModelPoint pt = evaluate_model(ab.head(k), ab.tail(m - k), w, z, spec.measure,
                                   spec.nuisance_form, false);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      u += weights.row(i).transpose() *
           ((data.a[i] - e_hat[i]) * (h_vals[i] - pt.p0[i]));
    }
    return Eigen::VectorXd(u / double(n));
  };

  Eigen::VectorXd ab(m);
  ab << nuisance.alpha, nuisance.beta;
  Eigen::MatrixXd b_outcome(k, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double step = 1e-6 * (1.0 + std::abs(ab[j]));
    Eigen::VectorXd abp = ab, abm = ab;
    abp[j] += step;
    abm[j] -= step;
    b_outcome.col(j) = (mean_u_at_outcome(abp) - mean_u_at_outcome(abm)) / (2.0 * step);
  }

  // propensity block: only e moves, through gamma
  const DesignMatrix& x = prop.design;
  if (x.n() != n) throw_spec("propensity fit was not computed on this dataset");
  const Eigen::Index q = x.k();

  auto mean_u_at_gamma = [&](const Eigen::VectorXd& gamma) {
    Eigen::VectorXd e = predict_e(gamma, x);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      u += weights.row(i).transpose() * ((data.a[i] - e[i]) * (h_vals[i] - p0_hat[i]));
    }
    return Eigen::VectorXd(u / double(n));
  };

  Eigen::MatrixXd b_gamma(k, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    double step = 1e-6 * (1.0 + std::abs(prop.gamma[j]));
    Eigen::VectorXd gp = prop.gamma, gm = prop.gamma;
    gp[j] += step;
    gm[j] -= step;
    b_gamma.col(j) = (mean_u_at_gamma(gp) - mean_u_at_gamma(gm)) / (2.0 * step);
  }

  // inner inverses: mean d(S)/d(alpha,beta) = -I_obs/n, mean[-X de/dgamma'] = -I_e/n
  Eigen::MatrixXd score_deriv = -nuisance.observed_information / double(n);
  Eigen::MatrixXd score_deriv_inv = guarded_symmetric_inverse(
      score_deriv, &nuisance.coef_names, "outcome score derivative");
  Eigen::MatrixXd prop_deriv = -prop.information / double(n);
  Eigen::MatrixXd prop_deriv_inv = guarded_symmetric_inverse(
      prop_deriv, &prop.coef_names, "propensity score derivative");

  Eigen::MatrixXd s_rows = score_rows(nuisance.alpha, nuisance.beta, data, spec);

  Eigen::MatrixXd correction_outcome = b_outcome * score_deriv_inv;  // k x m
  Eigen::MatrixXd correction_prop = b_gamma * prop_deriv_inv;        // k x q

  InfluenceDecomposition out;
  out.tau = tau;
  out.u_tilde.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd prop_score_i = x.values.row(i).transpose() * (data.a[i] - e_hat[i]);
    out.u_tilde.row(i) = u_rows.row(i) -
                         (correction_outcome * s_rows.row(i).transpose()).transpose() -
                         (correction_prop * prop_score_i).transpose();
  }

  out.sigma_hat = out.u_tilde.transpose() * out.u_tilde / double(n);
  out.sigma_hat = ((out.sigma_hat + out.sigma_hat.transpose()) / 2.0).eval();
  assert_psd(out.sigma_hat, "sandwich middle matrix");

  Eigen::MatrixXd a = guarded_solve(tau, out.sigma_hat, "tau");
  Eigen::MatrixXd cov = guarded_solve(tau, a.transpose(), "tau").transpose() / double(n);
  out.cov_alpha = ((cov + cov.transpose()) / 2.0).eval();
  assert_psd(out.cov_alpha, "sandwich covariance");
  return out;
}

InfluenceDecomposition efficient_sandwich(const DrFit& dr, const NuisanceFit& nuisance,
                                          const PropensityFit& prop,
                                          const Dataset& data,
                                          const OutcomeModelSpec& spec) {
  if (dr.weight_kind != WeightKind::kEfficient) {
    throw_spec("efficient_sandwich requires a fit solved with efficient weights");
  }
  return sandwich_dr(dr, nuisance, prop, data, spec);
}

double percentile(std::vector<double> values, double prob) {
  if (values.empty()) throw_spec("percentile of empty sample");
  std::sort(values.begin(), values.end());
  double idx = prob * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(idx));
  std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
  double frac = idx - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

BootstrapResult bootstrap(const Dataset& data,
                          const std::function<Eigen::VectorXd(const Dataset&)>& estimator,
                          int B, std::uint64_t seed, double level) {
  if (B < 2) throw_spec("bootstrap needs at least 2 replicates");
  const Eigen::Index n = data.n();
  if (n == 0) throw_spec("bootstrap on an empty dataset");

  std::vector<Eigen::VectorXd> estimates(static_cast<std::size_t>(B));
  std::vector<std::string> errors(static_cast<std::size_t>(B));
  std::vector<char> ok(static_cast<std::size_t>(B), 0);

  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    Rng rng(seed, static_cast<std::uint64_t>(b));
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    try {
      estimates[b] = estimator(resample(data, rows));
      ok[b] = 1;
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });

  BootstrapResult out;
  out.requested = B;
  Eigen::Index k = -1;
  std::vector<std::size_t> good;
  for (std::size_t b = 0; b < static_cast<std::size_t>(B); ++b) {
    if (ok[b]) {
      good.push_back(b);
      if (k < 0) k = estimates[b].size();
    } else {
      ++out.failures;
      std::ostringstream msg;
      msg << "replicate " << b << ": " << errors[b];
      out.failure_log.push_back(msg.str());
    }
  }
  if (out.failures > B / 10) {
    std::ostringstream msg;
    msg << "bootstrap failed on " << out.failures << " of " << B
        << " replicates (> 10%):";
    for (const auto& line : out.failure_log) msg << "\n  " << line;
    throw_convergence(msg.str());
  }
  if (k <= 0) throw_convergence("bootstrap produced no successful replicates");

  out.replicates.resize(static_cast<Eigen::Index>(good.size()), k);
  for (std::size_t i = 0; i < good.size(); ++i) {
    out.replicates.row(static_cast<Eigen::Index>(i)) = estimates[good[i]].transpose();
  }

  out.se.resize(k);
  out.ci_low.resize(k);
  out.ci_high.resize(k);
  double tail = (1.0 - level) / 2.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd col = out.replicates.col(j);
    double mean = col.mean();
    double ss = (col.array() - mean).square().sum();
    out.se[j] = std::sqrt(ss / static_cast<double>(col.size() - 1));
    std::vector<double> vals(col.data(), col.data() + col.size());
    out.ci_low[j] = percentile(vals, tail);
    out.ci_high[j] = percentile(vals, 1.0 - tail);
  }
  return out;
}

std::vector<WaldRow> wald_summary(const Eigen::VectorXd& estimates,
                                  const Eigen::MatrixXd& cov, double level) {
  if (!(level > 0.0 && level < 1.0)) throw_spec("confidence level must lie in (0,1)");
  if (cov.rows() != estimates.size() || cov.cols() != estimates.size()) {
    throw_spec("wald_summary: covariance dimension mismatch");
  }
  double zq = normal_quantile(1.0 - (1.0 - level) / 2.0);

  std::vector<WaldRow> rows;
  rows.reserve(static_cast<std::size_t>(estimates.size()));
  for (Eigen::Index j = 0; j < estimates.size(); ++j) {
    double var = cov(j, j);
    if (var < 0.0 && var > -1e-12) var = 0.0;
    double se = std::sqrt(var);
    WaldRow row;
    row.estimate = estimates[j];
    row.se = se;
    row.ci_low = estimates[j] - zq * se;
    row.ci_high = estimates[j] + zq * se;
    if (se == 0.0) {
      row.p_value = estimates[j] == 0.0 ? 1.0 : 0.0;
    } else {
      row.p_value = 2.0 * (1.0 - normal_cdf(std::abs(estimates[j]) / se));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace opreg
