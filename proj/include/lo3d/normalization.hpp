#pragma once

#include <Eigen/Dense>

namespace lo3d {

/// Per-dimension min-max map onto [-1, 1]. Degenerate dimensions
/// (max == min) normalize to a constant 0 and un-normalize to min.
struct MinMax {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  Eigen::Index dim() const { return min.size(); }
  // d(world)/d(normalized) per dimension; 0 on degenerate dimensions.
  Eigen::VectorXd half_range() const;

  // Rows of `x` are points, columns are dimensions.
  Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd unnormalize_rows(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  Eigen::VectorXd unnormalize(const Eigen::VectorXd& x) const;

  static MinMax fit_rows(const Eigen::MatrixXd& x);
  void include_rows(const Eigen::MatrixXd& x);
};

struct NormalizationStats {
  MinMax action;  // action_dim
  MinMax state;   // state_dim
  MinMax cloud;   // point dim d
};

bool operator==(const MinMax& a, const MinMax& b);
bool operator==(const NormalizationStats& a, const NormalizationStats& b);

}  // namespace lo3d
