#include "lo3d/normalization.hpp"

#include <limits>

#include "lo3d/errors.hpp"

namespace lo3d {

Eigen::VectorXd MinMax::half_range() const { return 0.5 * (max - min); }

Eigen::MatrixXd MinMax::normalize_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != dim()) throw ParameterError("normalize: dimension mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double range = max[j] - min[j];
    if (range > 0.0)
      out.col(j) = (2.0 * (x.col(j).array() - min[j]) / range - 1.0).matrix();
    else
      out.col(j).setZero();
  }
  return out;
}

Eigen::MatrixXd MinMax::unnormalize_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != dim()) throw ParameterError("unnormalize: dimension mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double range = max[j] - min[j];
    out.col(j) = ((x.col(j).array() + 1.0) * (0.5 * range) + min[j]).matrix();
  }
  return out;
}

Eigen::VectorXd MinMax::normalize(const Eigen::VectorXd& x) const {
  return normalize_rows(x.transpose()).transpose();
}

Eigen::VectorXd MinMax::unnormalize(const Eigen::VectorXd& x) const {
  return unnormalize_rows(x.transpose()).transpose();
}

MinMax MinMax::fit_rows(const Eigen::MatrixXd& x) {
  MinMax m;
  m.min = Eigen::VectorXd::Constant(x.cols(), std::numeric_limits<double>::infinity());
  m.max = Eigen::VectorXd::Constant(x.cols(), -std::numeric_limits<double>::infinity());
  m.include_rows(x);
  return m;
}

void MinMax::include_rows(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) return;
  if (x.cols() != dim()) throw ParameterError("include_rows: dimension mismatch");
  min = min.cwiseMin(x.colwise().minCoeff().transpose());
  max = max.cwiseMax(x.colwise().maxCoeff().transpose());
}

bool operator==(const MinMax& a, const MinMax& b) { return a.min == b.min && a.max == b.max; }

bool operator==(const NormalizationStats& a, const NormalizationStats& b) {
  return a.action == b.action && a.state == b.state && a.cloud == b.cloud;
}

}  // namespace lo3d
