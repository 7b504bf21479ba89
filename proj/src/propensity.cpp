#include "opreg/propensity.hpp"

#include <cmath>
#include <sstream>

#include "opreg/error.hpp"
#include "opreg/linalg.hpp"
#include "opreg/stats.hpp"

namespace opreg {

namespace {

double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ll += y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log1p(-p[i]);
  }
  return ll;
}

}  // namespace

Eigen::VectorXd predict_e(const Eigen::VectorXd& gamma, const DesignMatrix& x) {
  if (gamma.size() != x.k()) {
    throw_spec("coefficient/design dimension mismatch in predict_e");
  }
  Eigen::VectorXd eta = x.values * gamma;
  Eigen::VectorXd e(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) e[i] = expit(eta[i]);
  return e;
}

LogisticFit logistic_fit(const Eigen::VectorXd& response, const DesignMatrix& design) {
  const Eigen::Index n = design.n();
  const Eigen::Index k = design.k();
  if (response.size() != n) throw_spec("response/design row mismatch");
  validate_binary(response, "response", "response");

  const double mean_resp = response.mean();
  if (mean_resp == 0.0 || mean_resp == 1.0) {
    throw_spec("response has a single class; logistic fit is undefined");
  }

  constexpr int kMaxIter = 100;
  constexpr double kScoreTol = 1e-10;   // on mean[X(y - e)]
  constexpr double kSeparation = 50.0;  // coefficient sup-norm

  LogisticFit fit;
  fit.gamma = Eigen::VectorXd::Zero(k);
  fit.coef_names = design.column_names;

  Eigen::VectorXd e = predict_e(fit.gamma, design);
  double ll = bernoulli_loglik(response, e);

  for (int iter = 1; iter <= kMaxIter; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd score = design.values.transpose() * (response - e) / double(n);
    if (score.lpNorm<Eigen::Infinity>() < kScoreTol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd wdiag = e.array() * (1.0 - e.array());
    Eigen::MatrixXd info =
        design.values.transpose() * wdiag.asDiagonal() * design.values / double(n);
    Eigen::VectorXd step =
        guarded_solve(info, score, "logistic information matrix");

    // step-halving on the log-likelihood
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      Eigen::VectorXd cand = fit.gamma + scale * step;
      Eigen::VectorXd ec = predict_e(cand, design);
      double llc = bernoulli_loglik(response, ec);
      if (llc >= ll) {
        fit.gamma = cand;
        e = ec;
        ll = llc;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // stalled; final score check decides

    if (fit.gamma.lpNorm<Eigen::Infinity>() > kSeparation) {
      std::ostringstream msg;
      msg << "logistic fit diverged (|gamma| > " << kSeparation
          << "), likely complete or quasi-complete separation";
      throw_convergence(msg.str());
    }
  }

  Eigen::VectorXd score = design.values.transpose() * (response - e) / double(n);
  if (score.lpNorm<Eigen::Infinity>() < 1e-8) fit.converged = true;
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "logistic fit did not converge after " << fit.iterations
        << " iterations; score max-norm " << score.lpNorm<Eigen::Infinity>();
    throw_convergence(msg.str());
  }

  fit.fitted = e;
  Eigen::VectorXd wdiag = e.array() * (1.0 - e.array());
  fit.information = design.values.transpose() * wdiag.asDiagonal() * design.values;
  fit.design = design;
  return fit;
}

PropensityFit fit_propensity(const Dataset& data, const DesignSpec& x_design) {
  DesignMatrix x = build_design(data, x_design);
  double mean_a = data.a.mean();
  if (mean_a == 0.0 || mean_a == 1.0) {
    throw_spec("exposure has a single class; propensity model is undefined");
  }
  return logistic_fit(data.a, x);
}

}  // namespace opreg
