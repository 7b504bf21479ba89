#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "opreg/dataset.hpp"
#include "opreg/design.hpp"
#include "opreg/link.hpp"

namespace opreg {

// Functional form of the baseline nuisance model: linear log odds-product
// (unconstrained) or linear baseline risk (constrained; kept for
// comparison fits).
enum class NuisanceForm { kLogOddsProduct, kLinearP0 };

const char* to_string(NuisanceForm f);
NuisanceForm nuisance_form_from_string(const std::string& s);

struct OutcomeModelSpec {
  TargetMeasure measure = TargetMeasure::kRelativeRisk;
  DesignSpec w_design;  // target model theta(V) = alpha' W
  DesignSpec z_design;  // nuisance model phi(V) = beta' Z (or p0 = beta' Z)
  NuisanceForm nuisance_form = NuisanceForm::kLogOddsProduct;
};

// Per-row model state at given coefficients.
struct ModelPoint {
  Eigen::VectorXd theta;  // W alpha
  Eigen::VectorXd nuis;   // Z beta: phi under log-OP, p0 under linear-p0
  Eigen::VectorXd p0;
  Eigen::VectorXd p1;
  Eigen::VectorXd dp0_dtheta, dp0_dnuis, dp1_dtheta, dp1_dnuis;
  bool feasible = true;  // all probabilities interior (can fail for linear-p0)
};

ModelPoint evaluate_model(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                          const DesignMatrix& w, const DesignMatrix& z,
                          TargetMeasure measure, NuisanceForm form,
                          bool want_partials);

// Sum over rows of y log p_A + (1-y) log(1-p_A). Returns -infinity when a
// linear-p0 model produces a probability outside (0,1).
double log_likelihood(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                      const Dataset& data, const OutcomeModelSpec& spec);

// Gradient of log_likelihood in (alpha, beta), analytic via the chain rule
// through the inverse link partials.
Eigen::VectorXd score(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                      const Dataset& data, const OutcomeModelSpec& spec);

// Per-observation score contributions, one row per observation (n x m with
// m = dim alpha + dim beta); score() equals the column sums.
Eigen::MatrixXd score_rows(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta,
                           const Dataset& data, const OutcomeModelSpec& spec);

struct FitOptions {
  int max_iterations = 200;
  double score_tol = 1e-8;    // sup-norm of the score
  double loglik_tol = 1e-12;  // relative log-likelihood change
};

struct NuisanceFit {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double loglik = 0.0;
  Eigen::VectorXd theta, nuis, p0, p1;   // fitted per row
  Eigen::MatrixXd observed_information;  // negative Hessian at the optimum
  bool converged = false;
  int iterations = 0;
  std::vector<double> loglik_trace;  // accepted-step values, nondecreasing
  std::vector<std::string> warnings;
  std::vector<std::string> coef_names;  // alpha.* then beta.*
};

// Maximum-likelihood fit by Newton ascent on the analytic score with
// backtracking line search; gradient-ascent fallback when the Newton step
// is not an ascent direction.
NuisanceFit fit_mle(const Dataset& data, const OutcomeModelSpec& spec,
                    const FitOptions& opts = {});

struct Prediction {
  double theta;
  double p0;
  double p1;
  double effect;  // RR = exp(theta) or RD = tanh(theta)
};

std::vector<Prediction> predict(const NuisanceFit& fit,
                                const CovariateTable& new_covariates,
                                const OutcomeModelSpec& spec);

}  // namespace opreg
