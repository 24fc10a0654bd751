#include "pforge/numeric.hpp"

#include <limits>

namespace pforge {

int numeric_rank(const Mat& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > rel_tol * s(0)) ++r;
  return r;
}

Mat nullspace(const Mat& m, double rel_tol) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  double top = s.size() ? s(0) : 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (top > 0 && s(k) > rel_tol * top) ++r;
  return svd.matrixV().rightCols(m.cols() - r);
}

Vec least_squares(const Mat& a, const Vec& b) {
  return a.completeOrthogonalDecomposition().solve(b);
}

double condition_number(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0.0;
  double lo = s(s.size() - 1);
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / lo;
}

Eigen::MatrixXd realify_matrix(const Mat& m) {
  Eigen::MatrixXd r(2 * m.rows(), 2 * m.cols());
  r.topLeftCorner(m.rows(), m.cols()) = m.real();
  r.topRightCorner(m.rows(), m.cols()) = -m.imag();
  r.bottomLeftCorner(m.rows(), m.cols()) = m.imag();
  r.bottomRightCorner(m.rows(), m.cols()) = m.real();
  return r;
}

double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace pforge
