#include "pforge/liealg.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace pforge {

// ---------------------------------------------------------------- QMatrix

QMatrix QMatrix::identity(int n) {
  QMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

QMatrix QMatrix::unit(int n, int i, int j) {
  QMatrix m(n, n);
  m(i, j) = 1;
  return m;
}

bool QMatrix::is_zero() const {
  return std::all_of(a_.begin(), a_.end(), [](const Rational& r) { return r.is_zero(); });
}

Rational QMatrix::trace() const {
  Rational t;
  for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

QMatrix QMatrix::transpose() const {
  QMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Mat QMatrix::to_complex() const {
  Mat m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).to_double();
  return m;
}

std::string QMatrix::to_string() const {
  std::ostringstream os;
  os << "[";
  for (int i = 0; i < rows_; ++i) {
    os << (i ? ", [" : "[");
    for (int j = 0; j < cols_; ++j) os << (j ? ", " : "") << (*this)(i, j).to_string();
    os << "]";
  }
  os << "]";
  return os.str();
}

QMatrix operator+(const QMatrix& a, const QMatrix& b) {
  QMatrix r = a;
  for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] += b.a_[k];
  return r;
}

QMatrix operator-(const QMatrix& a, const QMatrix& b) {
  QMatrix r = a;
  for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] -= b.a_[k];
  return r;
}

QMatrix operator*(const QMatrix& a, const QMatrix& b) {
  if (a.cols_ != b.rows_) throw std::invalid_argument("matrix shape mismatch");
  QMatrix r(a.rows_, b.cols_);
  for (int i = 0; i < a.rows_; ++i)
    for (int k = 0; k < a.cols_; ++k) {
      const Rational& x = a(i, k);
      if (x.is_zero()) continue;
      for (int j = 0; j < b.cols_; ++j)
        if (!b(k, j).is_zero()) r(i, j) += x * b(k, j);
    }
  return r;
}

QMatrix operator*(const Rational& s, const QMatrix& a) {
  QMatrix r = a;
  for (auto& v : r.a_) v *= s;
  return r;
}

QMatrix bracket(const QMatrix& a, const QMatrix& b) { return a * b - b * a; }

// ---------------------------------------------------------------- exact linear algebra

int exact_rank(const QMatrix& m) {
  using boost::multiprecision::cpp_int;
  const int rows = m.rows(), cols = m.cols();
  // Clear denominators row by row, then run Bareiss on big integers: every
  // intermediate entry is a minor of the integer matrix.
  std::vector<std::vector<cpp_int>> a(static_cast<std::size_t>(rows), std::vector<cpp_int>(static_cast<std::size_t>(cols)));
  for (int i = 0; i < rows; ++i) {
    cpp_int l = 1;
    for (int j = 0; j < cols; ++j) l = boost::multiprecision::lcm(l, cpp_int(m(i, j).den()));
    for (int j = 0; j < cols; ++j) a[i][j] = cpp_int(m(i, j).num()) * (l / m(i, j).den());
  }
  int rank = 0;
  cpp_int prev = 1;
  for (int col = 0; col < cols && rank < rows; ++col) {
    int piv = -1;
    for (int r = rank; r < rows; ++r)
      if (a[r][col] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    std::swap(a[piv], a[rank]);
    for (int r = rank + 1; r < rows; ++r) {
      for (int j = col + 1; j < cols; ++j) a[r][j] = (a[rank][col] * a[r][j] - a[r][col] * a[rank][j]) / prev;
      a[r][col] = 0;
    }
    prev = a[rank][col];
    ++rank;
  }
  return rank;
}

std::vector<std::vector<Rational>> exact_kernel(const QMatrix& m) {
  const int rows = m.rows(), cols = m.cols();
  QMatrix a = m;
  std::vector<int> pivot_col;
  int r = 0;
  for (int col = 0; col < cols && r < rows; ++col) {
    int piv = -1;
    for (int k = r; k < rows; ++k)
      if (!a(k, col).is_zero()) {
        piv = k;
        break;
      }
    if (piv < 0) continue;
    for (int j = 0; j < cols; ++j) std::swap(a(piv, j), a(r, j));
    Rational inv = Rational(1) / a(r, col);
    for (int j = 0; j < cols; ++j) a(r, j) *= inv;
    for (int k = 0; k < rows; ++k) {
      if (k == r || a(k, col).is_zero()) continue;
      Rational f = a(k, col);
      for (int j = 0; j < cols; ++j) a(k, j) -= f * a(r, j);
    }
    pivot_col.push_back(col);
    ++r;
  }
  std::vector<std::vector<Rational>> out;
  for (int free = 0; free < cols; ++free) {
    if (std::find(pivot_col.begin(), pivot_col.end(), free) != pivot_col.end()) continue;
    std::vector<Rational> v(static_cast<std::size_t>(cols));
    v[static_cast<std::size_t>(free)] = 1;
    for (std::size_t k = 0; k < pivot_col.size(); ++k)
      v[static_cast<std::size_t>(pivot_col[k])] = -a(static_cast<int>(k), free);
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------- sl_n

LieAlgebraSL::LieAlgebraSL(int n) : n_(n) {
  if (n < 2 || n > 4) throw std::out_of_range("sl_n is supported for 2 <= n <= 4, got n = " + std::to_string(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        basis_.push_back(QMatrix::unit(n, i, j));
        names_.push_back("E" + std::to_string(i + 1) + std::to_string(j + 1));
      }
  for (int i = 0; i + 1 < n; ++i) {
    basis_.push_back(QMatrix::unit(n, i, i) - QMatrix::unit(n, i + 1, i + 1));
    names_.push_back("h" + std::to_string(i + 1));
  }
  const int d = dim();
  structure_.assign(static_cast<std::size_t>(d * d * d), Rational(0));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto c = coords(bracket(basis_[static_cast<std::size_t>(i)], basis_[static_cast<std::size_t>(j)]));
      for (int k = 0; k < d; ++k) structure_[static_cast<std::size_t>((i * d + j) * d + k)] = c[static_cast<std::size_t>(k)];
    }
  std::vector<QMatrix> ads;
  for (const auto& b : basis_) ads.push_back(ad(b));
  killing_ = QMatrix(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) killing_(i, j) = (ads[static_cast<std::size_t>(i)] * ads[static_cast<std::size_t>(j)]).trace();
}

int LieAlgebraSL::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::invalid_argument("no basis element '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

std::vector<Rational> LieAlgebraSL::coords(const QMatrix& x) const {
  if (x.rows() != n_ || x.cols() != n_) throw std::invalid_argument("matrix size does not match sl_n");
  if (!x.trace().is_zero()) throw std::invalid_argument("matrix is not traceless");
  std::vector<Rational> c;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      if (i != j) c.push_back(x(i, j));
  Rational acc;
  for (int i = 0; i + 1 < n_; ++i) {
    acc += x(i, i);
    c.push_back(acc);
  }
  return c;
}

QMatrix LieAlgebraSL::element(const std::vector<Rational>& c) const {
  if (static_cast<int>(c.size()) != dim()) throw std::invalid_argument("coordinate vector has the wrong length");
  QMatrix x(n_, n_);
  for (int k = 0; k < dim(); ++k)
    if (!c[static_cast<std::size_t>(k)].is_zero()) x = x + c[static_cast<std::size_t>(k)] * basis_[static_cast<std::size_t>(k)];
  return x;
}

QMatrix LieAlgebraSL::ad(const QMatrix& x) const {
  const int d = dim();
  QMatrix m(d, d);
  for (int k = 0; k < d; ++k) {
    auto c = coords(bracket(x, basis_[static_cast<std::size_t>(k)]));
    for (int l = 0; l < d; ++l) m(l, k) = c[static_cast<std::size_t>(l)];
  }
  return m;
}

Rational LieAlgebraSL::killing_form(const QMatrix& x, const QMatrix& y) const {
  auto a = coords(x), b = coords(y);
  Rational s;
  for (int i = 0; i < dim(); ++i) {
    if (a[static_cast<std::size_t>(i)].is_zero()) continue;
    for (int j = 0; j < dim(); ++j)
      if (!b[static_cast<std::size_t>(j)].is_zero())
        s += a[static_cast<std::size_t>(i)] * killing_(i, j) * b[static_cast<std::size_t>(j)];
  }
  return s;
}

bool LieAlgebraSL::structure_constants_valid() const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        if (c(i, j, k) != -c(j, i, k)) return false;
  // sum_m c(j,k,m) c(i,m,l) + c(k,i,m) c(j,m,l) + c(i,j,m) c(k,m,l) = 0
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      for (int k = j + 1; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          Rational s;
          for (int m = 0; m < d; ++m) {
            if (!c(j, k, m).is_zero()) s += c(j, k, m) * c(i, m, l);
            if (!c(k, i, m).is_zero()) s += c(k, i, m) * c(j, m, l);
            if (!c(i, j, m).is_zero()) s += c(i, j, m) * c(k, m, l);
          }
          if (!s.is_zero()) return false;
        }
  return true;
}

QMatrix killing(int n) { return LieAlgebraSL(n).killing(); }

// ---------------------------------------------------------------- parabolics

ParabolicData parabolic(int n, const std::vector<int>& levi_roots) {
  if (n < 2 || n > 4) throw std::out_of_range("parabolic: unsupported n = " + std::to_string(n));
  for (int r : levi_roots)
    if (r < 1 || r > n - 1) throw std::invalid_argument("simple root index " + std::to_string(r) + " out of range");
  ParabolicData p;
  p.n = n;
  p.levi_roots = levi_roots;
  std::sort(p.levi_roots.begin(), p.levi_roots.end());
  p.levi_roots.erase(std::unique(p.levi_roots.begin(), p.levi_roots.end()), p.levi_roots.end());
  p.block.assign(static_cast<std::size_t>(n), 0);
  for (int k = 1; k < n; ++k) {
    bool joined = std::find(p.levi_roots.begin(), p.levi_roots.end(), k) != p.levi_roots.end();
    p.block[static_cast<std::size_t>(k)] = p.block[static_cast<std::size_t>(k - 1)] + (joined ? 0 : 1);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      int bi = p.block[static_cast<std::size_t>(i)], bj = p.block[static_cast<std::size_t>(j)];
      QMatrix e = QMatrix::unit(n, i, j);
      if (bi <= bj) p.p.push_back(e);
      if (bi < bj) p.nil.push_back(e);
      if (bi > bj) p.nil_minus.push_back(e);
    }
  for (int i = 0; i + 1 < n; ++i) p.p.push_back(QMatrix::unit(n, i, i) - QMatrix::unit(n, i + 1, i + 1));
  return p;
}

namespace {

QMatrix stack_rows(const std::vector<QMatrix>& mats, const QMatrix* extra = nullptr) {
  if (mats.empty() && !extra) return QMatrix(0, 0);
  const QMatrix& first = mats.empty() ? *extra : mats.front();
  const int w = first.rows() * first.cols();
  QMatrix out(static_cast<int>(mats.size()) + (extra ? 1 : 0), w);
  auto put = [&](int r, const QMatrix& m) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) out(r, i * m.cols() + j) = m(i, j);
  };
  for (std::size_t k = 0; k < mats.size(); ++k) put(static_cast<int>(k), mats[k]);
  if (extra) put(static_cast<int>(mats.size()), *extra);
  return out;
}

}  // namespace

bool in_span(const std::vector<QMatrix>& span, const QMatrix& x) {
  if (x.is_zero()) return true;
  if (span.empty()) return false;
  return exact_rank(stack_rows(span)) == exact_rank(stack_rows(span, &x));
}

bool parabolic_valid(const ParabolicData& p) {
  const int dim = p.n * p.n - 1;
  if (static_cast<int>(p.p.size() + p.nil.size()) != dim) return false;
  for (const auto& a : p.p)
    for (const auto& b : p.p)
      if (!in_span(p.p, bracket(a, b))) return false;
  for (const auto& a : p.p)
    for (const auto& b : p.nil)
      if (!in_span(p.nil, bracket(a, b))) return false;
  for (const auto& a : p.nil)
    for (const auto& b : p.nil)
      if (!in_span(p.nil, bracket(a, b))) return false;
  return true;
}

NilpotentRep make_nilpotent(const QMatrix& x) {
  const int n = x.rows();
  if (x.cols() != n) throw std::invalid_argument("nilpotent representative must be square");
  std::vector<int> ranks{n};
  QMatrix pw = QMatrix::identity(n);
  for (int k = 1; k <= n; ++k) {
    pw = pw * x;
    ranks.push_back(exact_rank(pw));
  }
  if (ranks.back() != 0) throw std::invalid_argument("matrix is not nilpotent");
  // number of blocks of size >= k is rank(x^(k-1)) - rank(x^k)
  NilpotentRep rep;
  rep.x = x;
  for (int k = n; k >= 1; --k) {
    int at_least_k = ranks[static_cast<std::size_t>(k - 1)] - ranks[static_cast<std::size_t>(k)];
    int at_least_k1 = k < n ? ranks[static_cast<std::size_t>(k)] - ranks[static_cast<std::size_t>(k + 1)] : 0;
    for (int c = 0; c < at_least_k - at_least_k1; ++c) rep.jordan.push_back(k);
  }
  return rep;
}

Report richardson_certificate(const ParabolicData& p, const NilpotentRep& x) {
  if (!in_span(p.nil, x.x)) throw std::invalid_argument("richardson_certificate: x is not in the nilradical");
  std::vector<QMatrix> images;
  for (const auto& b : p.p) images.push_back(bracket(b, x.x));
  int rank = images.empty() ? 0 : exact_rank(stack_rows(images));
  const int dn = static_cast<int>(p.nil.size());
  Report r;
  r.target = "richardson";
  CheckRecord c;
  c.name = "richardson_rank";
  c.status = rank == dn ? Status::Proven : Status::Fail;
  c.max_residual = dn - rank;
  c.notes = "exact rank of p -> [p,x] is " + std::to_string(rank) + ", dim n = " + std::to_string(dn);
  r.add(c);
  r.metadata["rank"] = std::to_string(rank);
  r.metadata["dim_nilradical"] = std::to_string(dn);
  return r;
}

Report lagrangian_pairing_certificate(const ParabolicData& p, const NilpotentRep& x, int trials, std::uint64_t seed) {
  LieAlgebraSL g(p.n);
  Report r;
  r.target = "lagrangian_pairing";
  r.seed = seed;
  CheckRecord pair;
  pair.name = "pairing_vanishes";
  pair.samples_used = trials;
  int nonzero = 0;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(t));
    QMatrix p1(p.n, p.n), p2(p.n, p.n);
    for (const auto& b : p.p) {
      p1 = p1 + Rational(rng.integer(-9, 9), rng.integer(1, 5)) * b;
      p2 = p2 + Rational(rng.integer(-9, 9), rng.integer(1, 5)) * b;
    }
    Rational v = g.killing_form(x.x, bracket(p1, p2));
    if (!v.is_zero()) {
      ++nonzero;
      pair.max_residual = std::max(pair.max_residual, std::abs(v.to_double()));
      if (pair.witnesses.size() < 3) {
        Witness w;
        w.sample = t;
        w.residual = std::abs(v.to_double());
        w.note = "K(x,[p1,p2]) = " + v.to_string();
        pair.witnesses.push_back(w);
      }
    }
  }
  pair.status = nonzero == 0 ? Status::Proven : Status::Fail;
  pair.notes = "exact K(x,[p1,p2]) over " + std::to_string(trials) + " rational pairs";
  r.add(pair);

  // n-perp = p: K restricted to n x g has full rank dim n and p is orthogonal to n.
  CheckRecord perp;
  perp.name = "nilradical_perp_is_parabolic";
  bool orth = true;
  for (const auto& a : p.nil)
    for (const auto& b : p.p)
      if (!g.killing_form(a, b).is_zero()) orth = false;
  QMatrix kn(static_cast<int>(p.nil.size()), g.dim());
  for (std::size_t i = 0; i < p.nil.size(); ++i)
    for (int j = 0; j < g.dim(); ++j)
      kn(static_cast<int>(i), j) = g.killing_form(p.nil[i], g.basis()[static_cast<std::size_t>(j)]);
  auto kernel = exact_kernel(kn);
  bool dims = static_cast<int>(kernel.size()) == static_cast<int>(p.p.size());
  bool contained = true;
  for (const auto& v : kernel)
    if (!in_span(p.p, g.element(v))) contained = false;
  perp.status = orth && dims && contained ? Status::Proven : Status::Fail;
  perp.notes = "dim n-perp = " + std::to_string(kernel.size()) + ", dim p = " + std::to_string(p.p.size());
  r.add(perp);
  return r;
}

QMatrix random_unipotent_product(int n, CounterRng& rng, int factors) {
  QMatrix g = QMatrix::identity(n);
  for (int f = 0; f < factors; ++f) {
    int i = rng.integer(0, n - 1), j = rng.integer(0, n - 2);
    if (j >= i) ++j;
    QMatrix u = QMatrix::identity(n);
    u(i, j) = Rational(rng.integer(-4, 4), 4);
    g = g * u;
  }
  return g;
}

std::vector<Mat> adjoint_orbit_sample(const NilpotentRep& x, int count, std::uint64_t seed) {
  const int n = x.x.rows();
  std::vector<Mat> out;
  for (int k = 0; k < count; ++k) {
    CounterRng rng(seed, static_cast<std::uint64_t>(k));
    // exact inverse: reverse the factors with negated t
    QMatrix g = QMatrix::identity(n), ginv = QMatrix::identity(n);
    for (int f = 0; f < 2 * n; ++f) {
      int i = rng.integer(0, n - 1), j = rng.integer(0, n - 2);
      if (j >= i) ++j;
      Rational t(rng.integer(-4, 4), 4);
      QMatrix u = QMatrix::identity(n), ui = QMatrix::identity(n);
      u(i, j) = t;
      ui(i, j) = -t;
      g = g * u;
      ginv = ui * ginv;
    }
    out.push_back((g * x.x * ginv).to_complex());
  }
  return out;
}

Mat random_sl(int n, CounterRng& rng, int factors) {
  if (factors <= 0) factors = n * (n - 1) + 1;
  Mat g = Mat::Identity(n, n);
  for (int f = 0; f < factors; ++f) {
    int i = rng.integer(0, n - 1), j = rng.integer(0, n - 2);
    if (j >= i) ++j;
    Mat u = Mat::Identity(n, n);
    u(i, j) = rng.uniform(-1, 1);
    g = g * u;
  }
  return g;
}

}  // namespace pforge
