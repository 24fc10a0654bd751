#pragma once

#include <string>
#include <vector>

#include "pforge/numeric.hpp"
#include "pforge/rational.hpp"
#include "pforge/report.hpp"
#include "pforge/rng.hpp"

namespace pforge {

// Dense exact matrix.
class QMatrix {
 public:
  QMatrix() = default;
  QMatrix(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows * cols)) {}
  static QMatrix identity(int n);
  static QMatrix unit(int n, int i, int j);  // E_ij, 0-based

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Rational& operator()(int i, int j) { return a_[static_cast<std::size_t>(i * cols_ + j)]; }
  const Rational& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i * cols_ + j)]; }

  bool is_zero() const;
  Rational trace() const;
  QMatrix transpose() const;
  Mat to_complex() const;
  std::string to_string() const;

  friend QMatrix operator+(const QMatrix& a, const QMatrix& b);
  friend QMatrix operator-(const QMatrix& a, const QMatrix& b);
  friend QMatrix operator*(const QMatrix& a, const QMatrix& b);
  friend QMatrix operator*(const Rational& s, const QMatrix& a);
  friend bool operator==(const QMatrix& a, const QMatrix& b) = default;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<Rational> a_;
};

QMatrix bracket(const QMatrix& a, const QMatrix& b);

// Rank by fraction-free (Bareiss) elimination after clearing row denominators.
int exact_rank(const QMatrix& m);
// Basis of the right kernel.
std::vector<std::vector<Rational>> exact_kernel(const QMatrix& m);

// sl_n with basis E_ij (i != j, lexicographic) followed by h_i = E_ii - E_{i+1,i+1}.
class LieAlgebraSL {
 public:
  explicit LieAlgebraSL(int n);  // 2 <= n <= 4

  int n() const { return n_; }
  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<QMatrix>& basis() const { return basis_; }
  const std::vector<std::string>& names() const { return names_; }
  int index_of(const std::string& name) const;

  // [b_i, b_j] = sum_k c(i,j,k) b_k
  const Rational& c(int i, int j, int k) const {
    return structure_[static_cast<std::size_t>((i * dim() + j) * dim() + k)];
  }
  const QMatrix& killing() const { return killing_; }

  std::vector<Rational> coords(const QMatrix& x) const;  // throws unless traceless
  QMatrix element(const std::vector<Rational>& coords) const;
  QMatrix ad(const QMatrix& x) const;  // in the basis
  Rational killing_form(const QMatrix& x, const QMatrix& y) const;

  // Antisymmetry and Jacobi over every basis triple.
  bool structure_constants_valid() const;

 private:
  int n_;
  std::vector<QMatrix> basis_;
  std::vector<std::string> names_;
  std::vector<Rational> structure_;
  QMatrix killing_;
};

// Killing matrix of sl_n in the basis above.
QMatrix killing(int n);

struct ParabolicData {
  int n = 0;
  std::vector<int> levi_roots;  // simple roots (1-based) whose root spaces lie in the Levi factor
  std::vector<int> block;       // block index of each row
  std::vector<QMatrix> p, nil, nil_minus;
};

// Block upper-triangular parabolic. The empty subset gives the Borel subalgebra.
ParabolicData parabolic(int n, const std::vector<int>& levi_roots);
// Exact closure checks [p,p] in p, [p,n] in n, [n,n] in n and the dimension count.
bool parabolic_valid(const ParabolicData& p);
// Whether x lies in the span of a matrix list (exact).
bool in_span(const std::vector<QMatrix>& span, const QMatrix& x);

struct NilpotentRep {
  QMatrix x;
  std::vector<int> jordan;  // block sizes, decreasing
};
NilpotentRep make_nilpotent(const QMatrix& x);  // throws when x is not nilpotent

Report richardson_certificate(const ParabolicData& p, const NilpotentRep& x);
Report lagrangian_pairing_certificate(const ParabolicData& p, const NilpotentRep& x, int trials,
                                      std::uint64_t seed = 1);

// Product of elementary unipotents exp(t E_ij) = I + t E_ij with t = k/4, k in [-4, 4].
QMatrix random_unipotent_product(int n, CounterRng& rng, int factors);
// Ad_g x for exact random g, converted to doubles.
std::vector<Mat> adjoint_orbit_sample(const NilpotentRep& x, int count, std::uint64_t seed);
// Random SL_n element as a product of unipotents with real t in [-1, 1].
Mat random_sl(int n, CounterRng& rng, int factors = 0);

}  // namespace pforge
