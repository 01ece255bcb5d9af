#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gridse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numeric rank: singular values below rtol * sigma_max count as zero.
int numeric_rank(const Matrix& m, double rtol = 1e-8);

/// Orthonormal basis of the column space (thin, rank-revealing).
Matrix orthonormal_range(const Matrix& m, double rtol = 1e-8);

/// Right singular vector for the smallest singular value, plus the two
/// smallest singular values (sigma_min, sigma_next).
struct SmallestSingular {
  Vector v;
  double sigma_min = 0.0;
  double sigma_next = 0.0;
  double sigma_max = 0.0;
};
SmallestSingular smallest_right_singular(const Matrix& m);

/// Largest principal angle (radians) between the column spaces of two
/// matrices with orthonormal columns.
double largest_principal_angle(const Matrix& a, const Matrix& b);

/// Rows of `m` not listed in `drop` (indices into rows, preserving order).
Matrix drop_rows(const Matrix& m, const std::vector<int>& drop);

}  // namespace gridse
