#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "opreg/dataset.hpp"
#include "opreg/design.hpp"

namespace opreg {

// Logistic regression fit of a binary response on a design matrix, solved
// by IRLS with step-halving on the log-likelihood.
struct LogisticFit {
  Eigen::VectorXd gamma;
  Eigen::VectorXd fitted;            // expit(X gamma), strictly in (0,1)
  Eigen::MatrixXd information;       // X' diag(e(1-e)) X at the solution
  DesignMatrix design;               // the fitted design, kept for influence blocks
  std::vector<std::string> coef_names;
  bool converged = false;
  int iterations = 0;
};

LogisticFit logistic_fit(const Eigen::VectorXd& response, const DesignMatrix& design);

using PropensityFit = LogisticFit;

// Fits the propensity model e(V) = expit(gamma' X) by solving the score
// equation mean[X (A - e)] = 0. Requires both exposure classes present;
// detects complete separation via a diverging coefficient norm.
PropensityFit fit_propensity(const Dataset& data, const DesignSpec& x_design);

// expit applied rowwise to the linear predictor; strictly in (0,1).
Eigen::VectorXd predict_e(const Eigen::VectorXd& gamma, const DesignMatrix& x);

}  // namespace opreg
