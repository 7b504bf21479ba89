#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "opreg/dataset.hpp"

namespace opreg {

// Design specification: an ordered list of terms plus an intercept flag.
// A term is a column name or a ':'-joined product of column names
// (interaction). Term order fixes matrix column order.
struct DesignSpec {
  std::vector<std::string> terms;
  bool intercept = true;
};

struct DesignMatrix {
  Eigen::MatrixXd values;                 // n x k
  std::vector<std::string> column_names;  // length k

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index k() const { return values.cols(); }
};

// Builds the design matrix. The first column is all ones iff the intercept
// flag is on; interaction columns are elementwise products of their factors.
DesignMatrix build_design(const CovariateTable& covariates, const DesignSpec& spec);

inline DesignMatrix build_design(const Dataset& data, const DesignSpec& spec) {
  return build_design(data.covariates, spec);
}

}  // namespace opreg
