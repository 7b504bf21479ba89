#include "opreg/dr.hpp"

#include <cmath>
#include <sstream>

#include "opreg/error.hpp"
#include "opreg/linalg.hpp"
#include "opreg/link.hpp"

namespace opreg {

const char* to_string(WeightKind k) {
  return k == WeightKind::kNaive ? "naive" : "efficient";
}

namespace {

constexpr double kPluginFloor = 1e-6;

double clip_plugin(double p) {
  if (p < kPluginFloor) return kPluginFloor;
  if (p > 1.0 - kPluginFloor) return 1.0 - kPluginFloor;
  return p;
}

void require_positivity(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    std::ostringstream msg;
    msg << name << " = " << v
        << " violates positivity: probabilities must lie strictly inside "
           "(0,1) for the efficient weights";
    throw_domain(msg.str());
  }
}

}  // namespace

Eigen::MatrixXd efficient_weights(const Eigen::VectorXd& p0, const Eigen::VectorXd& p1,
                                  const Eigen::VectorXd& e, const DesignMatrix& w,
                                  TargetMeasure measure) {
  const Eigen::Index n = w.n();
  if (p0.size() != n || p1.size() != n || e.size() != n) {
    throw_spec("efficient_weights: input length mismatch");
  }
  Eigen::MatrixXd weights(n, w.k());
  for (Eigen::Index i = 0; i < n; ++i) {
    require_positivity(p0[i], "p0");
    require_positivity(p1[i], "p1");
    require_positivity(e[i], "e");
    double q0 = 1.0 - p0[i], q1 = 1.0 - p1[i];
    double factor;
    if (measure == TargetMeasure::kRelativeRisk) {
      double numer = e[i] * p1[i] / q1;
      double denom = (1.0 - e[i]) * p0[i] / q0 + numer;
      factor = numer / denom / (e[i] * q0);
    } else {
      double rho = p1[i] - p0[i];
      double numer = e[i] * (1.0 - rho * rho) / (p1[i] * q1);
      double denom = (1.0 - e[i]) / (p0[i] * q0) + e[i] / (p1[i] * q1);
      factor = numer / denom / (e[i] * p0[i] * q0);
    }
    weights.row(i) = factor * w.values.row(i);
  }
  return weights;
}

Eigen::MatrixXd build_weight_matrix(WeightKind kind, const NuisanceFit& nuisance,
                                    const PropensityFit& prop, const Dataset& data,
                                    const OutcomeModelSpec& spec) {
  DesignMatrix w = build_design(data, spec.w_design);
  if (kind == WeightKind::kNaive) return w.values;

  const Eigen::Index n = w.n();
  Eigen::VectorXd p0(n), p1(n), e(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p0[i] = clip_plugin(nuisance.p0[i]);
    p1[i] = clip_plugin(nuisance.p1[i]);
    e[i] = clip_plugin(prop.fitted[i]);
  }
  return efficient_weights(p0, p1, e, w, spec.measure);
}

Eigen::MatrixXd dr_u_rows(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& weights,
                          const DesignMatrix& w, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& e_hat,
                          const Eigen::VectorXd& p0_hat, TargetMeasure measure) {
  const Eigen::Index n = w.n();
  if (alpha.size() != w.k() || weights.rows() != n) {
    throw_spec("dr_u_rows: dimension mismatch");
  }
  Eigen::VectorXd theta = w.values * alpha;
  Eigen::MatrixXd u(n, weights.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    double h = h_transform(y[i], a[i], theta[i], measure);
    u.row(i) = weights.row(i) * ((a[i] - e_hat[i]) * (h - p0_hat[i]));
  }
  return u;
}

Eigen::VectorXd dr_estimating_function(const Eigen::VectorXd& alpha,
                                       const Eigen::MatrixXd& weights,
                                       const DesignMatrix& w,
                                       const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& e_hat,
                                       const Eigen::VectorXd& p0_hat,
                                       TargetMeasure measure) {
  Eigen::MatrixXd u = dr_u_rows(alpha, weights, w, a, y, e_hat, p0_hat, measure);
  return u.colwise().mean();
}

namespace {

// mean of the analytic derivative of the per-row estimating function in alpha
Eigen::MatrixXd dr_jacobian(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& weights,
                            const DesignMatrix& w, const Eigen::VectorXd& a,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& e_hat,
                            TargetMeasure measure) {
  const Eigen::Index n = w.n();
  Eigen::VectorXd theta = w.values * alpha;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(weights.cols(), w.k());
  for (Eigen::Index i = 0; i < n; ++i) {
    double dh;
    if (measure == TargetMeasure::kRelativeRisk) {
      dh = -a[i] * y[i] * std::exp(-a[i] * theta[i]);
    } else {
      double r = std::tanh(theta[i]);
      dh = -a[i] * (1.0 - r * r);
    }
    jac += (a[i] - e_hat[i]) * dh * weights.row(i).transpose() * w.values.row(i);
  }
  return jac / double(n);
}

}  // namespace

DrFit solve_dr_weighted(const Dataset& data, const OutcomeModelSpec& spec,
                        const Eigen::MatrixXd& weights, const Eigen::VectorXd& e_hat,
                        const Eigen::VectorXd& p0_hat, const Eigen::VectorXd& start) {
  DesignMatrix w = build_design(data, spec.w_design);
  if (weights.rows() != data.n() || e_hat.size() != data.n() ||
      p0_hat.size() != data.n()) {
    throw_spec("solve_dr: plug-in vectors do not match the dataset");
  }

  DrFit fit;
  for (const auto& name : w.column_names) fit.coef_names.push_back("alpha." + name);

  Eigen::VectorXd alpha = start;
  if (alpha.size() != w.k()) throw_spec("solve_dr: starting alpha has wrong dimension");

  constexpr int kMaxIter = 100;
  constexpr double kTol = 1e-10;

  Eigen::VectorXd g = dr_estimating_function(alpha, weights, w, data.a, data.y,
                                             e_hat, p0_hat, spec.measure);
  double gnorm = g.norm();
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    fit.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() < kTol) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd jac =
        dr_jacobian(alpha, weights, w, data.a, data.y, e_hat, spec.measure);
    Eigen::VectorXd step;
    try {
      step = guarded_solve(jac, -g, "doubly-robust equation Jacobian");
    } catch (const Error& err) {
      throw Error(ErrorCategory::kSingular,
                  std::string(err.what()) +
                      "; consider naive weights or check the W design for "
                      "collinearity");
    }

    // backtrack on the equation norm
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      Eigen::VectorXd cand = alpha + scale * step;
      Eigen::VectorXd gc = dr_estimating_function(cand, weights, w, data.a, data.y,
                                                  e_hat, p0_hat, spec.measure);
      if (gc.norm() < gnorm) {
        alpha = cand;
        g = gc;
        gnorm = gc.norm();
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }

  fit.final_equation_norm = g.lpNorm<Eigen::Infinity>();
  if (fit.final_equation_norm < 1e-8) fit.converged = true;
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "doubly-robust solve did not converge after " << fit.iterations
        << " iterations; equation sup-norm " << fit.final_equation_norm;
    throw_convergence(msg.str());
  }
  fit.alpha_dr = alpha;
  return fit;
}

DrFit solve_dr(const Dataset& data, const OutcomeModelSpec& spec,
               const NuisanceFit& nuisance, const PropensityFit& prop,
               WeightKind kind, const std::optional<Eigen::VectorXd>& start) {
  if (!nuisance.converged || !prop.converged) {
    throw_spec("doubly-robust solve requires converged plug-in fits");
  }
  if (nuisance.p0.size() != data.n() || prop.fitted.size() != data.n()) {
    throw_spec("plug-in fits were not computed on this dataset");
  }
  Eigen::MatrixXd weights = build_weight_matrix(kind, nuisance, prop, data, spec);
  DrFit fit = solve_dr_weighted(data, spec, weights, prop.fitted, nuisance.p0,
                                start.has_value() ? *start : nuisance.alpha);
  fit.weight_kind = kind;
  return fit;
}

}  // namespace opreg
