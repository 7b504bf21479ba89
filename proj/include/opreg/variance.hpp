#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "opreg/dataset.hpp"
#include "opreg/dr.hpp"
#include "opreg/outcome_model.hpp"
#include "opreg/propensity.hpp"

namespace opreg {

// Covariance of the maximum-likelihood (alpha, beta): inverse of the
// observed information, with a singularity guard that names near-dependent
// columns.
Eigen::MatrixXd fisher_covariance(const NuisanceFit& fit);

// Influence-function decomposition of a doubly-robust fit:
//   influence_i = tau^{-1} u_tilde_i,
//   u_tilde_i   = U_i - B_ab I_S^{-1} S_i - B_g I_e^{-1} X_i (A_i - e_i),
// where the two correction blocks are sample averages of the derivative of
// the per-row estimating function in the outcome-model and propensity
// plug-in parameters (central finite differences, weights frozen).
struct InfluenceDecomposition {
  Eigen::MatrixXd tau;        // k x k, -mean d(U)/d(alpha) at the root
  Eigen::MatrixXd u_tilde;    // n x k corrected contributions
  Eigen::MatrixXd sigma_hat;  // k x k, mean of u_tilde outer products
  Eigen::MatrixXd cov_alpha;  // tau^{-1} sigma tau^{-T} / n
};

InfluenceDecomposition sandwich_dr(const DrFit& dr, const NuisanceFit& nuisance,
                                   const PropensityFit& prop, const Dataset& data,
                                   const OutcomeModelSpec& spec);

// Same pipeline with the efficient weighting function plugged in everywhere;
// the weight-derivative terms are omitted (they vanish under the union
// model). Requires a fit solved with efficient weights.
InfluenceDecomposition efficient_sandwich(const DrFit& dr, const NuisanceFit& nuisance,
                                          const PropensityFit& prop,
                                          const Dataset& data,
                                          const OutcomeModelSpec& spec);

struct BootstrapResult {
  Eigen::VectorXd se;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  Eigen::MatrixXd replicates;  // successful replicates, in replicate order
  int requested = 0;
  int failures = 0;
  std::vector<std::string> failure_log;
};

// Nonparametric bootstrap: B row-resamples with replacement, the estimator
// re-run on each. Failed replicates are excluded and logged; more than 10%
// failures is an error. Fully deterministic given (seed, B).
BootstrapResult bootstrap(const Dataset& data,
                          const std::function<Eigen::VectorXd(const Dataset&)>& estimator,
                          int B, std::uint64_t seed, double level = 0.95);

struct WaldRow {
  double estimate;
  double se;
  double ci_low;
  double ci_high;
  double p_value;
};

// Wald summaries from a point estimate and covariance, normal reference.
std::vector<WaldRow> wald_summary(const Eigen::VectorXd& estimates,
                                  const Eigen::MatrixXd& cov, double level);

// Quantile with linear interpolation on sorted data (bootstrap percentile).
double percentile(std::vector<double> values, double prob);

}  // namespace opreg
