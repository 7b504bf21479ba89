#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "opreg/dataset.hpp"
#include "opreg/design.hpp"
#include "opreg/outcome_model.hpp"
#include "opreg/propensity.hpp"

namespace opreg {

// Weighting function for the doubly-robust estimating equation: the W design
// row itself (naive) or the efficient weighting function.
enum class WeightKind { kNaive, kEfficient };

const char* to_string(WeightKind k);

// Efficient weights, one row per observation, expanded over A in {0,1} with
// propensity weights (1-e, e):
//   RR: w / (e (1-p0)) * [e p1/(1-p1)] / [(1-e) p0/(1-p0) + e p1/(1-p1)]
//   RD: w * [e (1-rho^2)/(p1 q1)] / [(1-e)/(p0 q0) + e/(p1 q1)] / (e p0 q0)
// All probability inputs must lie strictly in (0,1).
Eigen::MatrixXd efficient_weights(const Eigen::VectorXd& p0, const Eigen::VectorXd& p1,
                                  const Eigen::VectorXd& e, const DesignMatrix& w,
                                  TargetMeasure measure);

// Weight matrix for the given kind, with plug-in probabilities clipped to
// [1e-6, 1-1e-6] inside the weights.
Eigen::MatrixXd build_weight_matrix(WeightKind kind, const NuisanceFit& nuisance,
                                    const PropensityFit& prop, const Dataset& data,
                                    const OutcomeModelSpec& spec);

// mean over rows of  weights_i * (a_i - e_i) * (H(theta_i) - p0_i)  with
// theta_i = alpha' w_i.
Eigen::VectorXd dr_estimating_function(const Eigen::VectorXd& alpha,
                                       const Eigen::MatrixXd& weights,
                                       const DesignMatrix& w,
                                       const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& e_hat,
                                       const Eigen::VectorXd& p0_hat,
                                       TargetMeasure measure);

// Per-row terms of the estimating function (n x dim alpha), for influence
// computations.
Eigen::MatrixXd dr_u_rows(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& weights,
                          const DesignMatrix& w, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& e_hat,
                          const Eigen::VectorXd& p0_hat, TargetMeasure measure);

struct DrFit {
  Eigen::VectorXd alpha_dr;
  WeightKind weight_kind = WeightKind::kNaive;
  bool converged = false;
  int iterations = 0;
  double final_equation_norm = 0.0;  // sup-norm of the empirical equation
  std::vector<std::string> coef_names;
};

// Solves the doubly-robust estimating equation by Newton iteration with
// backtracking, starting from the plug-in MLE alpha (or a supplied start).
// The weights are frozen at the plug-in fits throughout the solve.
DrFit solve_dr(const Dataset& data, const OutcomeModelSpec& spec,
               const NuisanceFit& nuisance, const PropensityFit& prop,
               WeightKind kind,
               const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Core solver against an explicit weight matrix and plug-in vectors.
DrFit solve_dr_weighted(const Dataset& data, const OutcomeModelSpec& spec,
                        const Eigen::MatrixXd& weights, const Eigen::VectorXd& e_hat,
                        const Eigen::VectorXd& p0_hat, const Eigen::VectorXd& start);

}  // namespace opreg
