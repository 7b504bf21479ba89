#include "opreg/linalg.hpp"

#include <cmath>
#include <sstream>

#include "opreg/error.hpp"

namespace opreg {

namespace {
constexpr double kRcondFloor = 1e-12;
}

Eigen::MatrixXd guarded_symmetric_inverse(const Eigen::MatrixXd& m,
                                          const std::vector<std::string>* names,
                                          const std::string& context) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw_singular(context + ": eigendecomposition failed");
  }
  const Eigen::VectorXd& ev = es.eigenvalues();
  double max_abs = ev.cwiseAbs().maxCoeff();
  double min_abs = ev.cwiseAbs().minCoeff();
  if (max_abs <= 0.0 || min_abs / max_abs < kRcondFloor) {
    std::ostringstream msg;
    msg << context << ": matrix is singular or near-singular (rcond "
        << (max_abs > 0.0 ? min_abs / max_abs : 0.0) << ")";
    if (names != nullptr) {
      Eigen::Index which;
      ev.cwiseAbs().minCoeff(&which);
      Eigen::VectorXd null_dir = es.eigenvectors().col(which);
      msg << "; near-dependent columns:";
      for (Eigen::Index i = 0; i < null_dir.size(); ++i) {
        if (std::abs(null_dir[i]) > 0.3 &&
            i < static_cast<Eigen::Index>(names->size())) {
          msg << " " << (*names)[static_cast<std::size_t>(i)];
        }
      }
    }
    throw_singular(msg.str());
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd guarded_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const std::string& context) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  double smax = sv.maxCoeff();
  double smin = sv.minCoeff();
  if (smax <= 0.0 || smin / smax < kRcondFloor) {
    std::ostringstream msg;
    msg << context << ": matrix is singular or near-singular (rcond "
        << (smax > 0.0 ? smin / smax : 0.0) << ")";
    throw_singular(msg.str());
  }
  return svd.solve(b);
}

}  // namespace opreg
