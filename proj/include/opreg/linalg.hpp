#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace opreg {

// Inverse of a symmetric matrix via eigendecomposition with a reciprocal
// condition number guard (< 1e-12 raises a singularity error). When column
// names are supplied the error lists the columns loading on the smallest
// eigenvector (the near-dependency).
Eigen::MatrixXd guarded_symmetric_inverse(const Eigen::MatrixXd& m,
                                          const std::vector<std::string>* names,
                                          const std::string& context);

// Solves a (possibly non-symmetric) square system via SVD, with the same
// reciprocal condition number guard.
Eigen::MatrixXd guarded_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const std::string& context);

}  // namespace opreg
