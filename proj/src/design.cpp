#include "opreg/design.hpp"

#include <sstream>

#include "opreg/error.hpp"

namespace opreg {

namespace {

std::vector<std::string> split_factors(const std::string& term) {
  std::vector<std::string> factors;
  std::string factor;
  std::istringstream ss(term);
  while (std::getline(ss, factor, ':')) {
    if (factor.empty()) throw_spec("malformed design term '" + term + "'");
    factors.push_back(factor);
  }
  if (factors.empty()) throw_spec("empty design term");
  return factors;
}

}  // namespace

DesignMatrix build_design(const CovariateTable& covariates, const DesignSpec& spec) {
  Eigen::Index n = covariates.n();
  Eigen::Index k = static_cast<Eigen::Index>(spec.terms.size()) + (spec.intercept ? 1 : 0);
  if (k == 0) throw_spec("design has no columns (no terms and no intercept)");

  DesignMatrix out;
  out.values.resize(n, k);
  out.column_names.reserve(static_cast<std::size_t>(k));

  Eigen::Index j = 0;
  if (spec.intercept) {
    out.values.col(j).setOnes();
    out.column_names.push_back("intercept");
    ++j;
  }
  for (const std::string& term : spec.terms) {
    Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
    for (const std::string& factor : split_factors(term)) {
      if (!covariates.has_column(factor)) {
        throw_spec("unknown column '" + factor + "' in design term '" + term + "'");
      }
      col = col.cwiseProduct(covariates.column(factor));
    }
    out.values.col(j) = col;
    out.column_names.push_back(term);
    ++j;
  }
  return out;
}

}  // namespace opreg
