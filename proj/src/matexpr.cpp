#include "pforge/matexpr.hpp"

#include <stdexcept>

namespace pforge {

namespace {
int size_of(const ExprMatrix& a) { return static_cast<int>(a.size()); }
}  // namespace

ExprMatrix expr_zero(int n) { return ExprMatrix(static_cast<std::size_t>(n), std::vector<Expr>(static_cast<std::size_t>(n), Expr(0))); }

ExprMatrix expr_identity(int n) {
  ExprMatrix m = expr_zero(n);
  for (int i = 0; i < n; ++i) m[i][i] = Expr(1);
  return m;
}

ExprMatrix to_expr(const QMatrix& q) {
  ExprMatrix m = expr_zero(q.rows());
  for (int i = 0; i < q.rows(); ++i)
    for (int j = 0; j < q.cols(); ++j) m[i][j] = Expr(q(i, j));
  return m;
}

ExprMatrix matrix_of_vars(const VarTable& vars, int first, int n) {
  ExprMatrix m = expr_zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = var(vars, first + i * n + j);
  return m;
}

std::vector<std::string> matrix_names(const std::string& prefix, int n, const std::string& suffix) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) out.push_back(prefix + std::to_string(i) + std::to_string(j) + suffix);
  return out;
}

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b) {
  const int n = size_of(a);
  ExprMatrix r = expr_zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::vector<Expr> terms;
      for (int k = 0; k < n; ++k)
        if (!a[i][k].is_zero_const() && !b[k][j].is_zero_const()) terms.push_back(a[i][k] * b[k][j]);
      r[i][j] = Expr::add(terms);
    }
  return r;
}

ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b) {
  ExprMatrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) r[i][j] = a[i][j] + b[i][j];
  return r;
}

ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b) {
  ExprMatrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) r[i][j] = a[i][j] - b[i][j];
  return r;
}

ExprMatrix operator*(const Expr& s, const ExprMatrix& a) {
  ExprMatrix r = a;
  for (auto& row : r)
    for (auto& e : row) e = s * e;
  return r;
}

Expr expr_trace(const ExprMatrix& a) {
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < a.size(); ++i) terms.push_back(a[i][i]);
  return Expr::add(terms);
}

namespace {

ExprMatrix minor_of(const ExprMatrix& a, int row, int col) {
  const int n = size_of(a);
  ExprMatrix m;
  for (int i = 0; i < n; ++i) {
    if (i == row) continue;
    std::vector<Expr> r;
    for (int j = 0; j < n; ++j)
      if (j != col) r.push_back(a[i][j]);
    m.push_back(std::move(r));
  }
  return m;
}

}  // namespace

Expr expr_det(const ExprMatrix& a) {
  const int n = size_of(a);
  if (n == 0) return Expr(1);
  if (n == 1) return a[0][0];
  if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  std::vector<Expr> terms;
  for (int j = 0; j < n; ++j) {
    if (a[0][j].is_zero_const()) continue;
    Expr t = a[0][j] * expr_det(minor_of(a, 0, j));
    terms.push_back(j % 2 ? -t : t);
  }
  return Expr::add(terms);
}

ExprMatrix expr_adjugate(const ExprMatrix& a) {
  const int n = size_of(a);
  ExprMatrix r = expr_zero(n);
  if (n == 1) {
    r[0][0] = Expr(1);
    return r;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr c = expr_det(minor_of(a, j, i));
      r[i][j] = (i + j) % 2 ? -c : c;
    }
  return r;
}

ExprMatrix expr_inverse(const ExprMatrix& a) { return Expr::recip(expr_det(a)) * expr_adjugate(a); }

ExprMatrix expr_commutator(const ExprMatrix& a, const ExprMatrix& b) { return a * b - b * a; }

std::vector<Expr> flatten(const ExprMatrix& a) {
  std::vector<Expr> out;
  for (const auto& row : a) out.insert(out.end(), row.begin(), row.end());
  return out;
}

ExprMatrix unflatten(const std::vector<Expr>& v, int n) {
  if (static_cast<int>(v.size()) < n * n) throw std::invalid_argument("unflatten: too few entries");
  ExprMatrix m = expr_zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] = v[static_cast<std::size_t>(i * n + j)];
  return m;
}

ExprMatrix substitute(const ExprMatrix& a, const std::vector<Expr>& repl) {
  ExprMatrix r = a;
  for (auto& row : r)
    for (auto& e : row) e = substitute(e, repl);
  return r;
}

Mat eval_matrix(const ExprMatrix& a, const Point& p) {
  const int n = size_of(a);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = eval(a[i][j], p);
  return m;
}

std::vector<cplx> flatten(const Mat& m) {
  std::vector<cplx> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Mat unflatten(const std::vector<cplx>& v, int n, std::size_t offset) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = v.at(offset + static_cast<std::size_t>(i * n + j));
  return m;
}

}  // namespace pforge
