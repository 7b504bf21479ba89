#include "opreg/outcome_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "opreg/error.hpp"
#include "opreg/linalg.hpp"
#include "opreg/stats.hpp"

namespace opreg {

const char* to_string(NuisanceForm f) {
  return f == NuisanceForm::kLogOddsProduct ? "log-op" : "linear-p0";
}

NuisanceForm nuisance_form_from_string(const std::string& s) {
  if (s == "log-op") return NuisanceForm::kLogOddsProduct;
  if (s == "linear-p0") return NuisanceForm::kLinearP0;
  throw_spec("unknown nuisance form '" + s + "' (expected log-op or linear-p0)");
}

ModelPoint evaluate_model(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                          const DesignMatrix& w, const DesignMatrix& z,
                          TargetMeasure measure, NuisanceForm form,
                          bool want_partials) {
  if (alpha.size() != w.k() || beta.size() != z.k()) {
    throw_spec("coefficient/design dimension mismatch in outcome model");
  }
  const Eigen::Index n = w.n();

  ModelPoint pt;
  pt.theta = w.values * alpha;
  pt.nuis = z.values * beta;
  pt.p0.resize(n);
  pt.p1.resize(n);
  if (want_partials) {
    pt.dp0_dtheta.resize(n);
    pt.dp0_dnuis.resize(n);
    pt.dp1_dtheta.resize(n);
    pt.dp1_dnuis.resize(n);
  }

  if (form == NuisanceForm::kLogOddsProduct) {
    for (Eigen::Index i = 0; i < n; ++i) {
      ProbabilityPair p = inverse_link(pt.theta[i], pt.nuis[i], measure);
      pt.p0[i] = p.p0;
      pt.p1[i] = p.p1;
      if (want_partials) {
        LinkPartials d = inverse_link_partials(pt.theta[i], pt.nuis[i], measure);
        pt.dp0_dtheta[i] = d.dp0_dtheta;
        pt.dp0_dnuis[i] = d.dp0_dphi;
        pt.dp1_dtheta[i] = d.dp1_dtheta;
        pt.dp1_dnuis[i] = d.dp1_dphi;
      }
    }
  } else {
    // linear baseline risk: p0 = beta' Z directly
    for (Eigen::Index i = 0; i < n; ++i) {
      double p0 = pt.nuis[i];
      double p1;
      double dp1_dtheta, dp1_dnuis;
      if (measure == TargetMeasure::kRelativeRisk) {
        double t = std::exp(pt.theta[i]);
        p1 = p0 * t;
        dp1_dtheta = p1;
        dp1_dnuis = t;
      } else {
        double rho = std::tanh(pt.theta[i]);
        p1 = p0 + rho;
        dp1_dtheta = 1.0 - rho * rho;
        dp1_dnuis = 1.0;
      }
      pt.p0[i] = p0;
      pt.p1[i] = p1;
      if (!(p0 > 0.0 && p0 < 1.0 && p1 > 0.0 && p1 < 1.0)) pt.feasible = false;
      if (want_partials) {
        pt.dp0_dtheta[i] = 0.0;
        pt.dp0_dnuis[i] = 1.0;
        pt.dp1_dtheta[i] = dp1_dtheta;
        pt.dp1_dnuis[i] = dp1_dnuis;
      }
    }
  }
  return pt;
}

namespace {

double loglik_from_point(const ModelPoint& pt, const Dataset& data) {
  if (!pt.feasible) return -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    double p = data.a[i] == 1.0 ? pt.p1[i] : pt.p0[i];
    ll += data.y[i] * std::log(p) + (1.0 - data.y[i]) * std::log1p(-p);
  }
  return ll;
}

Eigen::VectorXd score_from_point(const ModelPoint& pt, const Dataset& data,
                                 const DesignMatrix& w, const DesignMatrix& z) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd resid_theta(n), resid_nuis(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bool exposed = data.a[i] == 1.0;
    double p = exposed ? pt.p1[i] : pt.p0[i];
    double r = (data.y[i] - p) / (p * (1.0 - p));
    resid_theta[i] = r * (exposed ? pt.dp1_dtheta[i] : pt.dp0_dtheta[i]);
    resid_nuis[i] = r * (exposed ? pt.dp1_dnuis[i] : pt.dp0_dnuis[i]);
  }
  Eigen::VectorXd g(w.k() + z.k());
  g.head(w.k()) = w.values.transpose() * resid_theta;
  g.tail(z.k()) = z.values.transpose() * resid_nuis;
  return g;
}

struct BoundDesigns {
  DesignMatrix w;
  DesignMatrix z;
};

BoundDesigns bind_designs(const Dataset& data, const OutcomeModelSpec& spec) {
  return {build_design(data, spec.w_design), build_design(data, spec.z_design)};
}

// central finite differences of the analytic score; shrinks the step when a
// linear-p0 perturbation walks out of the feasible region
Eigen::MatrixXd fd_hessian(const Eigen::VectorXd& x, const Dataset& data,
                           const DesignMatrix& w, const DesignMatrix& z,
                           const OutcomeModelSpec& spec) {
  const Eigen::Index kw = w.k();
  const Eigen::Index m = x.size();
  Eigen::MatrixXd h(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double step = 1e-6 * (1.0 + std::abs(x[j]));
    for (int attempt = 0;; ++attempt) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      ModelPoint pp = evaluate_model(xp.head(kw), xp.tail(m - kw), w, z,
                                     spec.measure, spec.nuisance_form, true);
      ModelPoint pm = evaluate_model(xm.head(kw), xm.tail(m - kw), w, z,
                                     spec.measure, spec.nuisance_form, true);
      if (pp.feasible && pm.feasible) {
        h.col(j) = (score_from_point(pp, data, w, z) -
                    score_from_point(pm, data, w, z)) /
                   (2.0 * step);
        break;
      }
      if (attempt >= 4) {
        throw_convergence(
            "cannot compute curvature: linear-p0 model infeasible at "
            "perturbed coefficients");
      }
      step *= 0.1;
    }
  }
  return (h + h.transpose()) / 2.0;
}

}  // namespace

double log_likelihood(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                      const Dataset& data, const OutcomeModelSpec& spec) {
  BoundDesigns d = bind_designs(data, spec);
  ModelPoint pt = evaluate_model(alpha, beta, d.w, d.z, spec.measure,
                                 spec.nuisance_form, false);
  return loglik_from_point(pt, data);
}

Eigen::VectorXd score(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                      const Dataset& data, const OutcomeModelSpec& spec) {
  BoundDesigns d = bind_designs(data, spec);
  ModelPoint pt = evaluate_model(alpha, beta, d.w, d.z, spec.measure,
                                 spec.nuisance_form, true);
  if (!pt.feasible) {
    throw_domain("score undefined: linear-p0 model gives probabilities outside (0,1)");
  }
  return score_from_point(pt, data, d.w, d.z);
}

Eigen::MatrixXd score_rows(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                           const Dataset& data, const OutcomeModelSpec& spec) {
  BoundDesigns d = bind_designs(data, spec);
  ModelPoint pt = evaluate_model(alpha, beta, d.w, d.z, spec.measure,
                                 spec.nuisance_form, true);
  if (!pt.feasible) {
    throw_domain("score undefined: linear-p0 model gives probabilities outside (0,1)");
  }
  const Eigen::Index n = data.n();
  Eigen::MatrixXd rows(n, d.w.k() + d.z.k());
  for (Eigen::Index i = 0; i < n; ++i) {
    bool exposed = data.a[i] == 1.0;
    double p = exposed ? pt.p1[i] : pt.p0[i];
    double r = (data.y[i] - p) / (p * (1.0 - p));
    double dt = exposed ? pt.dp1_dtheta[i] : pt.dp0_dtheta[i];
    double dn = exposed ? pt.dp1_dnuis[i] : pt.dp0_dnuis[i];
    rows.row(i).head(d.w.k()) = r * dt * d.w.values.row(i);
    rows.row(i).tail(d.z.k()) = r * dn * d.z.values.row(i);
  }
  return rows;
}

NuisanceFit fit_mle(const Dataset& data, const OutcomeModelSpec& spec,
                    const FitOptions& opts) {
  if (data.n() == 0) throw_spec("cannot fit outcome model on an empty dataset");

  BoundDesigns d = bind_designs(data, spec);
  const Eigen::Index kw = d.w.k();
  const Eigen::Index kz = d.z.k();
  const Eigen::Index m = kw + kz;

  NuisanceFit fit;
  for (const auto& name : d.w.column_names) fit.coef_names.push_back("alpha." + name);
  for (const auto& name : d.z.column_names) fit.coef_names.push_back("beta." + name);
  if (data.n() <= m) {
    std::ostringstream msg;
    msg << "n = " << data.n() << " does not exceed the parameter count " << m
        << "; estimates may be unstable";
    fit.warnings.push_back(msg.str());
  }

  // starting values: zero works for log-OP (all probabilities 0.5); the
  // linear-p0 model starts from a clipped empirical mean on the intercept
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  if (spec.nuisance_form == NuisanceForm::kLinearP0) {
    double pbar = std::min(0.95, std::max(0.05, data.y.mean()));
    bool placed = false;
    for (Eigen::Index j = 0; j < kz; ++j) {
      if (d.z.column_names[static_cast<std::size_t>(j)] == "intercept") {
        x[kw + j] = pbar;
        placed = true;
        break;
      }
    }
    if (!placed) x[kw] = pbar;  // no intercept column; seed the first term
  }

  auto eval_ll = [&](const Eigen::VectorXd& v) {
    ModelPoint pt = evaluate_model(v.head(kw), v.tail(kz), d.w, d.z, spec.measure,
                                   spec.nuisance_form, false);
    return loglik_from_point(pt, data);
  };

  double ll = eval_ll(x);
  if (!std::isfinite(ll)) {
    throw_spec(
        "linear-p0 starting values are infeasible for this data; consider the "
        "log-op nuisance form");
  }
  fit.loglik_trace.push_back(ll);

  Eigen::VectorXd g(m);
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    ModelPoint pt = evaluate_model(x.head(kw), x.tail(kz), d.w, d.z, spec.measure,
                                   spec.nuisance_form, true);
    g = score_from_point(pt, data, d.w, d.z);
    if (g.lpNorm<Eigen::Infinity>() < opts.score_tol) {
      converged = true;
      break;
    }

    Eigen::MatrixXd hess = fd_hessian(x, data, d.w, d.z, spec);
    Eigen::VectorXd direction;
    bool have_newton = false;
    try {
      direction = guarded_solve(-hess, g, "outcome model Hessian");
      have_newton = true;
    } catch (const Error&) {
      direction = g;  // singular curvature: fall back to gradient ascent
    }
    if (have_newton && g.dot(direction) <= 0.0) direction = g;

    // backtracking line search (Armijo)
    double slope = g.dot(direction);
    double scale = 1.0;
    bool accepted = false;
    double ll_new = ll;
    for (int h = 0; h < 60; ++h) {
      Eigen::VectorXd cand = x + scale * direction;
      double cand_ll = eval_ll(cand);
      if (std::isfinite(cand_ll) && cand_ll >= ll + 1e-4 * scale * slope) {
        x = cand;
        ll_new = cand_ll;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // stalled; loop exit handles diagnostics

    fit.loglik_trace.push_back(ll_new);
    if (std::abs(ll_new - ll) <= opts.loglik_tol * (1.0 + std::abs(ll))) {
      ll = ll_new;
      ++iter;
      converged = true;
      break;
    }
    ll = ll_new;
  }

  {
    ModelPoint pt = evaluate_model(x.head(kw), x.tail(kz), d.w, d.z, spec.measure,
                                   spec.nuisance_form, true);
    g = score_from_point(pt, data, d.w, d.z);
    if (!converged && g.lpNorm<Eigen::Infinity>() < opts.score_tol) converged = true;
    if (!converged) {
      std::ostringstream msg;
      msg << "maximum likelihood did not converge after " << iter
          << " iterations; score max-norm " << g.lpNorm<Eigen::Infinity>()
          << "; last iterate (";
      for (Eigen::Index j = 0; j < m; ++j) msg << (j ? ", " : "") << x[j];
      msg << ")";
      throw_convergence(msg.str());
    }
    fit.alpha = x.head(kw);
    fit.beta = x.tail(kz);
    fit.loglik = ll;
    fit.theta = pt.theta;
    fit.nuis = pt.nuis;
    fit.p0 = pt.p0;
    fit.p1 = pt.p1;
    fit.converged = true;
    fit.iterations = iter;
    fit.observed_information = -fd_hessian(x, data, d.w, d.z, spec);
  }
  return fit;
}

std::vector<Prediction> predict(const NuisanceFit& fit,
                                const CovariateTable& new_covariates,
                                const OutcomeModelSpec& spec) {
  DesignMatrix w = build_design(new_covariates, spec.w_design);
  DesignMatrix z = build_design(new_covariates, spec.z_design);
  ModelPoint pt = evaluate_model(fit.alpha, fit.beta, w, z, spec.measure,
                                 spec.nuisance_form, false);

  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(w.n()));
  for (Eigen::Index i = 0; i < w.n(); ++i) {
    double effect = spec.measure == TargetMeasure::kRelativeRisk
                        ? std::exp(pt.theta[i])
                        : std::tanh(pt.theta[i]);
    out.push_back({pt.theta[i], pt.p0[i], pt.p1[i], effect});
  }
  return out;
}

}  // namespace opreg
