#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pforge/symexpr.hpp"

namespace pforge {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Vec to_vec(const std::vector<cplx>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) out(static_cast<Eigen::Index>(k)) = v[k];
  return out;
}

inline std::vector<cplx> to_std(const Vec& v) { return std::vector<cplx>(v.data(), v.data() + v.size()); }

// Rank from singular values, relative to the largest one.
int numeric_rank(const Mat& m, double rel_tol = 1e-9);

// Orthonormal basis of the (numerical) kernel, as columns.
Mat nullspace(const Mat& m, double rel_tol = 1e-9);

// Minimum-norm least-squares solution of a x = b.
Vec least_squares(const Mat& a, const Vec& b);

// Ratio of extreme singular values (inf when singular).
double condition_number(const Mat& m);

// Realified view of a complex matrix acting on C^n = R^{2n}; used for ranks of
// holomorphic maps in real dimension.
Eigen::MatrixXd realify_matrix(const Mat& m);

double max_abs(const Mat& m);

}  // namespace pforge
