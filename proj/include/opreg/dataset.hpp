#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace opreg {

// Ordered named columns of reals; rows align across columns.
struct CovariateTable {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;

  Eigen::Index n() const { return columns.empty() ? 0 : columns.front().size(); }
  bool has_column(const std::string& name) const;
  const Eigen::VectorXd& column(const std::string& name) const;
  void add_column(const std::string& name, Eigen::VectorXd values);
};

// Binary outcome y, binary exposure a, and covariates. Values are validated
// at construction/load and immutable afterwards.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd a;
  CovariateTable covariates;

  Eigen::Index n() const { return y.size(); }
};

// Validates that every entry of v is exactly 0 or 1; `what` names the
// variable in error messages ("outcome" or "exposure").
void validate_binary(const Eigen::VectorXd& v, const std::string& what,
                     const std::string& column_name);

// Loads a comma-separated file with a header row. y_col and a_col must be
// binary; all remaining columns are loaded as covariates. Lines starting
// with '#' are skipped. Errors identify the offending row (1-based, data
// rows) and column.
Dataset load_csv(const std::string& path, const std::string& y_col,
                 const std::string& a_col);

// Loads all columns of a CSV file as covariates (for prediction inputs).
CovariateTable load_covariate_csv(const std::string& path);

// Row-resample with replacement given explicit indices.
Dataset resample(const Dataset& data, const std::vector<Eigen::Index>& rows);

}  // namespace opreg
