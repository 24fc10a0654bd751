#pragma once

#include <string>
#include <vector>

#include "pforge/liealg.hpp"
#include "pforge/numeric.hpp"
#include "pforge/symexpr.hpp"

namespace pforge {

// Square matrix of expressions, row-major.
using ExprMatrix = std::vector<std::vector<Expr>>;

ExprMatrix expr_identity(int n);
ExprMatrix expr_zero(int n);
ExprMatrix to_expr(const QMatrix& m);
// n x n block of chart variables starting at `first` (row-major).
ExprMatrix matrix_of_vars(const VarTable& vars, int first, int n);
// Names "<prefix>ij" with 1-based indices, row-major.
std::vector<std::string> matrix_names(const std::string& prefix, int n, const std::string& suffix = "");

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator*(const Expr& s, const ExprMatrix& a);

Expr expr_trace(const ExprMatrix& a);
Expr expr_det(const ExprMatrix& a);
ExprMatrix expr_adjugate(const ExprMatrix& a);
// adj(a) / det(a)
ExprMatrix expr_inverse(const ExprMatrix& a);
ExprMatrix expr_commutator(const ExprMatrix& a, const ExprMatrix& b);

std::vector<Expr> flatten(const ExprMatrix& a);
ExprMatrix unflatten(const std::vector<Expr>& v, int n);
ExprMatrix substitute(const ExprMatrix& a, const std::vector<Expr>& repl);

Mat eval_matrix(const ExprMatrix& a, const Point& p);
// Row-major entries of a numeric matrix.
std::vector<cplx> flatten(const Mat& m);
Mat unflatten(const std::vector<cplx>& v, int n, std::size_t offset = 0);

}  // namespace pforge
