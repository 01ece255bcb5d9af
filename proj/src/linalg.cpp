#include "gridse/linalg.hpp"

#include <algorithm>
#include <stdexcept>

namespace gridse {

int numeric_rank(const Matrix& m, double rtol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cut = rtol * sv(0);
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++r;
  return r;
}

Matrix orthonormal_range(const Matrix& m, double rtol) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int r = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double cut = rtol * sv(0);
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > cut) ++r;
  }
  return svd.matrixU().leftCols(r);
}

SmallestSingular smallest_right_singular(const Matrix& m) {
  if (m.cols() == 0) throw std::invalid_argument("smallest_right_singular: empty matrix");
  // Rows may be fewer than columns (rank-deficient by shape); SVD handles it,
  // but Jacobi needs rows >= cols, so pad with zero rows when necessary.
  Matrix work = m;
  if (work.rows() < work.cols()) {
    Matrix padded = Matrix::Zero(work.cols(), work.cols());
    padded.topRows(work.rows()) = work;
    work = padded;
  }
  Eigen::JacobiSVD<Matrix> svd(work, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  SmallestSingular out;
  const int k = static_cast<int>(sv.size());
  out.v = svd.matrixV().col(k - 1);
  out.sigma_min = sv(k - 1);
  out.sigma_next = k >= 2 ? sv(k - 2) : sv(k - 1);
  out.sigma_max = sv(0);
  return out;
}

double largest_principal_angle(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("principal angle: dimension mismatch");
  // sine formulation; the cosine one loses small angles to cancellation
  const Matrix residual = a - b * (b.transpose() * a);
  Eigen::JacobiSVD<Matrix> svd(residual);
  const double s = std::clamp(svd.singularValues().maxCoeff(), 0.0, 1.0);
  return std::asin(s);
}

Matrix drop_rows(const Matrix& m, const std::vector<int>& drop) {
  std::vector<char> gone(m.rows(), 0);
  for (int i : drop) gone.at(static_cast<size_t>(i)) = 1;
  const long kept = m.rows() - std::count(gone.begin(), gone.end(), 1);
  Matrix out(kept, m.cols());
  long r = 0;
  for (long i = 0; i < m.rows(); ++i)
    if (!gone[static_cast<size_t>(i)]) out.row(r++) = m.row(i);
  return out;
}

}  // namespace gridse
