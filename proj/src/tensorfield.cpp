#include "pforge/tensorfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pforge {

namespace {

std::vector<MultiIndex> combinations(int n, int k) {
  std::vector<MultiIndex> out;
  if (k < 0 || k > n) return out;
  MultiIndex idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  for (;;) {
    out.push_back(idx);
    int j = k - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - k + j) --j;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
    for (int q = j + 1; q < k; ++q) idx[static_cast<std::size_t>(q)] = idx[static_cast<std::size_t>(q - 1)] + 1;
  }
  return out;
}

// Sign of the concatenation a ++ b after sorting; 0 when they overlap.
int merge_sign(const MultiIndex& a, const MultiIndex& b, MultiIndex& merged) {
  int inversions = 0;
  for (int x : a)
    for (int y : b) {
      if (x == y) return 0;
      if (x > y) ++inversions;
    }
  merged = a;
  merged.insert(merged.end(), b.begin(), b.end());
  std::sort(merged.begin(), merged.end());
  return inversions % 2 ? -1 : 1;
}

Expr symbolic_det(const std::vector<std::vector<Expr>>& m) {
  const int k = static_cast<int>(m.size());
  if (k == 0) return Expr(1);
  if (k == 1) return m[0][0];
  if (k == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  std::vector<Expr> terms;
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    MultiIndex p(perm.begin(), perm.end());
    int sign = sort_with_sign(p);
    std::vector<Expr> factors{Expr(sign)};
    bool zero = false;
    for (int r = 0; r < k; ++r) {
      const Expr& e = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(perm[static_cast<std::size_t>(r)])];
      if (e.is_zero_const()) zero = true;
      factors.push_back(e);
    }
    if (!zero) terms.push_back(Expr::mul(factors));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return Expr::add(terms);
}

cplx numeric_det(const Mat& m) {
  if (m.rows() == 0) return 1.0;
  if (m.rows() == 1) return m(0, 0);
  if (m.rows() == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m.determinant();
}

void check_chart(const ChartPtr& a, const ChartPtr& b) {
  if (a.get() != b.get() && (!a || !b || a->names() != b->names()))
    throw std::invalid_argument("chart mismatch: '" + (a ? a->name : "?") + "' vs '" + (b ? b->name : "?") + "'");
}

template <class Table>
void table_add(Table& t, MultiIndex idx, const Expr& value) {
  int s = sort_with_sign(idx);
  if (s == 0 || value.is_zero_const()) return;
  Expr v = s > 0 ? value : -value;
  auto it = t.coeff.find(idx);
  if (it == t.coeff.end()) {
    t.coeff.emplace(std::move(idx), v);
  } else {
    it->second = it->second + v;
    if (it->second.is_zero_const()) t.coeff.erase(it);
  }
}

template <class Table>
Expr table_get(const Table& t, MultiIndex idx) {
  int s = sort_with_sign(idx);
  if (s == 0) return Expr(0);
  auto it = t.coeff.find(idx);
  if (it == t.coeff.end()) return Expr(0);
  return s > 0 ? it->second : -it->second;
}

template <class Table>
void table_set(Table& t, MultiIndex idx, const Expr& value) {
  int s = sort_with_sign(idx);
  if (s == 0) {
    if (!value.is_zero_const()) throw std::invalid_argument("nonzero coefficient on a repeated index");
    return;
  }
  if (value.is_zero_const())
    t.coeff.erase(idx);
  else
    t.coeff[idx] = s > 0 ? value : -value;
}

template <class Table>
Table table_wedge(const Table& a, const Table& b) {
  check_chart(a.chart, b.chart);
  Table out = Table::zero(a.chart, a.degree + b.degree);
  for (const auto& [ia, ca] : a.coeff)
    for (const auto& [ib, cb] : b.coeff) {
      MultiIndex m;
      int s = merge_sign(ia, ib, m);
      if (s != 0) table_add(out, m, s > 0 ? ca * cb : -(ca * cb));
    }
  return out;
}

MultivectorValue evaluate_table(const std::map<MultiIndex, Expr>& coeff, int dim, int degree, const Point& p) {
  MultivectorValue v;
  v.dim = dim;
  v.degree = degree;
  for (const auto& [idx, e] : coeff) v.coeff[idx] = eval(e, p);
  return v;
}

Vec random_vec(CounterRng& rng, int n, bool complex) {
  Vec v(n);
  for (int k = 0; k < n; ++k) v(k) = complex ? cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)) : cplx(rng.uniform(-1, 1), 0);
  return v;
}

double vec_max(const std::vector<cplx>& v) {
  double m = 0;
  for (auto x : v) m = std::max(m, std::abs(x));
  return m;
}

// Compiled generators of a submanifold.
struct GenTapes {
  int dim = 0;
  int m = 0;
  Tape g;
  Tape jac;  // row-major m x dim

  explicit GenTapes(const Submanifold& n) : dim(n.ambient->dim()), m(static_cast<int>(n.generators.size())) {
    std::vector<Expr> j;
    for (const auto& f : n.generators)
      for (int v = 0; v < dim; ++v) j.push_back(diff(f, v));
    g = Tape(n.generators);
    jac = Tape(j);
  }

  Mat jacobian(const Point& x) const {
    auto vals = jac.eval(x);
    Mat out(m, dim);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < dim; ++c) out(r, c) = vals[static_cast<std::size_t>(r * dim + c)];
    return out;
  }
};

int dim_factor(const ChartPtr& c) { return c->vars.any_complex() ? 2 : 1; }

// Sampler sharing compiled tapes across a campaign.
struct NSampler {
  const Submanifold& n;
  std::optional<GenTapes> tapes;

  explicit NSampler(const Submanifold& sub) : n(sub) {
    if (!n.generators.empty()) tapes.emplace(n);
  }

  std::optional<Point> operator()(CounterRng& rng, double box = 1.0) const {
    if (n.sampler) return n.sampler(rng);
    if (n.param) {
      const auto& src = n.param->source();
      for (int attempt = 0; attempt < 30; ++attempt) {
        Point u(static_cast<std::size_t>(src->dim()));
        for (int k = 0; k < src->dim(); ++k)
          u[static_cast<std::size_t>(k)] =
              src->vars[k].kind == VarKind::Complex ? cplx(rng.uniform(-box, box), rng.uniform(-box, box))
                                                    : cplx(rng.uniform(-box, box), 0);
        if (!src->in_domain(u)) continue;
        try {
          Point x = (*n.param)(u);
          if (n.ambient->in_domain(x)) return x;
        } catch (const EvalError&) {
        }
      }
      return std::nullopt;
    }
    const auto& amb = n.ambient;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Point x(static_cast<std::size_t>(amb->dim()));
      for (int k = 0; k < amb->dim(); ++k)
        x[static_cast<std::size_t>(k)] = amb->vars[k].kind == VarKind::Complex
                                             ? cplx(rng.uniform(-box, box), rng.uniform(-box, box))
                                             : cplx(rng.uniform(-box, box), 0);
      if (!tapes) {
        if (amb->in_domain(x)) return x;
        continue;
      }
      std::optional<Point> y;
      try {
        y = newton_project(n.generators, tapes->g, tapes->jac, amb->dim(), x);
      } catch (const EvalError&) {
        continue;
      }
      if (!y || !amb->in_domain(*y)) continue;
      if (n.expected_dim > 0) {
        Mat t = nullspace(tapes->jacobian(*y));
        if (t.cols() * dim_factor(amb) != n.expected_dim) continue;
      }
      return y;
    }
    return std::nullopt;
  }
};

}  // namespace

// ---------------------------------------------------------------- charts

std::vector<std::string> Chart::names() const {
  std::vector<std::string> out;
  for (const auto& v : vars.vars()) out.push_back(v.name);
  return out;
}

bool Chart::in_domain(const Point& p, double eps) const {
  for (const auto& e : nonzero) {
    try {
      if (std::abs(eval(e, p)) <= eps) return false;
    } catch (const EvalError&) {
      return false;
    }
  }
  return true;
}

ChartPtr make_chart(std::string name, VarTable vars, std::vector<Expr> nonzero) {
  auto c = std::make_shared<Chart>();
  c->name = std::move(name);
  c->vars = std::move(vars);
  c->nonzero = std::move(nonzero);
  return c;
}

ChartPtr real_chart(std::string name, const std::vector<std::string>& coords) {
  VarTable t;
  for (const auto& c : coords) t.add(c, VarKind::Real);
  return make_chart(std::move(name), std::move(t));
}

ChartPtr realified_chart(const ChartPtr& complex_chart) {
  Realification r = realify(complex_chart->vars);
  std::vector<Expr> nonzero;
  for (const auto& e : complex_chart->nonzero) {
    auto [re, im] = to_real(e, r);
    nonzero.push_back(re * re + im * im);
  }
  return make_chart(complex_chart->name + "_re", r.real, nonzero);
}

struct ChartMap::Impl {
  ChartPtr source, target;
  std::vector<Expr> comps;
  std::vector<std::vector<Expr>> jac;
  Tape comp_tape;
  Tape jac_tape;
};

ChartMap::ChartMap(ChartPtr source, ChartPtr target, std::vector<Expr> comps) {
  if (static_cast<int>(comps.size()) != target->dim())
    throw std::invalid_argument("chart map into '" + target->name + "' needs " + std::to_string(target->dim()) +
                                " components, got " + std::to_string(comps.size()));
  for (const auto& c : comps)
    for (int v : free_variables(c))
      if (v >= source->dim()) throw std::invalid_argument("component uses a variable outside '" + source->name + "'");
  auto impl = std::make_shared<Impl>();
  impl->source = std::move(source);
  impl->target = std::move(target);
  impl->comps = std::move(comps);
  std::vector<Expr> flat;
  for (const auto& c : impl->comps) {
    std::vector<Expr> row;
    for (int v = 0; v < impl->source->dim(); ++v) {
      row.push_back(diff(c, v));
      flat.push_back(row.back());
    }
    impl->jac.push_back(std::move(row));
  }
  impl->comp_tape = Tape(impl->comps);
  impl->jac_tape = Tape(flat);
  impl_ = std::move(impl);
}

const ChartPtr& ChartMap::source() const { return impl_->source; }
const ChartPtr& ChartMap::target() const { return impl_->target; }
const std::vector<Expr>& ChartMap::comps() const { return impl_->comps; }
const std::vector<std::vector<Expr>>& ChartMap::jacobian() const { return impl_->jac; }

std::vector<cplx> ChartMap::operator()(const Point& p) const { return impl_->comp_tape.eval(p); }

Mat ChartMap::jacobian_at(const Point& p) const {
  auto vals = impl_->jac_tape.eval(p);
  const int rows = impl_->target->dim(), cols = impl_->source->dim();
  Mat out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = vals[static_cast<std::size_t>(r * cols + c)];
  return out;
}

ChartMap ChartMap::compose(const ChartMap& inner) const {
  check_chart(inner.target(), source());
  std::vector<Expr> out;
  for (const auto& c : comps()) out.push_back(substitute(c, inner.comps()));
  return ChartMap(inner.source(), target(), out);
}

// ---------------------------------------------------------------- tables

int sort_with_sign(MultiIndex& idx) {
  int sign = 1;
  for (std::size_t i = 1; i < idx.size(); ++i)
    for (std::size_t j = i; j > 0 && idx[j - 1] >= idx[j]; --j) {
      if (idx[j - 1] == idx[j]) return 0;
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
    }
  return sign;
}

MultiVectorField MultiVectorField::zero(ChartPtr c, int degree) {
  MultiVectorField f;
  f.chart = std::move(c);
  f.degree = degree;
  return f;
}

MultiVectorField MultiVectorField::function(ChartPtr c, const Expr& e) {
  MultiVectorField f = zero(std::move(c), 0);
  if (!e.is_zero_const()) f.coeff[{}] = e;
  return f;
}

Expr MultiVectorField::get(MultiIndex idx) const { return table_get(*this, std::move(idx)); }
void MultiVectorField::set(MultiIndex idx, const Expr& value) { table_set(*this, std::move(idx), value); }
void MultiVectorField::add(MultiIndex idx, const Expr& value) { table_add(*this, std::move(idx), value); }

DifferentialForm DifferentialForm::zero(ChartPtr c, int degree) {
  DifferentialForm f;
  f.chart = std::move(c);
  f.degree = degree;
  return f;
}

Expr DifferentialForm::get(MultiIndex idx) const { return table_get(*this, std::move(idx)); }
void DifferentialForm::set(MultiIndex idx, const Expr& value) { table_set(*this, std::move(idx), value); }
void DifferentialForm::add(MultiIndex idx, const Expr& value) { table_add(*this, std::move(idx), value); }

MultiVectorField operator+(const MultiVectorField& a, const MultiVectorField& b) {
  check_chart(a.chart, b.chart);
  if (b.coeff.empty()) return a;
  if (a.coeff.empty()) return b;
  if (a.degree != b.degree) throw std::invalid_argument("degree mismatch in sum");
  MultiVectorField out = a;
  for (const auto& [i, c] : b.coeff) out.add(i, c);
  return out;
}

MultiVectorField operator-(const MultiVectorField& a, const MultiVectorField& b) { return a + Expr(-1) * b; }

MultiVectorField operator*(const Expr& f, const MultiVectorField& a) {
  MultiVectorField out = MultiVectorField::zero(a.chart, a.degree);
  for (const auto& [i, c] : a.coeff) out.add(i, f * c);
  return out;
}

DifferentialForm operator+(const DifferentialForm& a, const DifferentialForm& b) {
  check_chart(a.chart, b.chart);
  if (b.coeff.empty()) return a;
  if (a.coeff.empty()) return b;
  if (a.degree != b.degree) throw std::invalid_argument("degree mismatch in sum");
  DifferentialForm out = a;
  for (const auto& [i, c] : b.coeff) out.add(i, c);
  return out;
}

DifferentialForm operator*(const Expr& f, const DifferentialForm& a) {
  DifferentialForm out = DifferentialForm::zero(a.chart, a.degree);
  for (const auto& [i, c] : a.coeff) out.add(i, f * c);
  return out;
}

MultiVectorField wedge(const MultiVectorField& a, const MultiVectorField& b) { return table_wedge(a, b); }
DifferentialForm wedge(const DifferentialForm& a, const DifferentialForm& b) { return table_wedge(a, b); }

// ---------------------------------------------------------------- values

cplx MultivectorValue::contract(const std::vector<Vec>& covectors) const {
  if (static_cast<int>(covectors.size()) != degree)
    throw std::invalid_argument("contraction needs " + std::to_string(degree) + " covectors");
  for (const auto& c : covectors)
    if (c.size() != dim) throw std::invalid_argument("covector dimension mismatch");
  cplx sum = 0;
  Mat m(degree, degree);
  for (const auto& [idx, v] : coeff) {
    for (int a = 0; a < degree; ++a)
      for (int b = 0; b < degree; ++b)
        m(a, b) = covectors[static_cast<std::size_t>(a)](idx[static_cast<std::size_t>(b)]);
    sum += v * numeric_det(m);
  }
  return sum;
}

Mat MultivectorValue::matrix() const {
  if (degree != 2) throw std::invalid_argument("matrix() needs a degree-2 value");
  Mat m = Mat::Zero(dim, dim);
  for (const auto& [idx, v] : coeff) {
    m(idx[0], idx[1]) = v;
    m(idx[1], idx[0]) = -v;
  }
  return m;
}

MultivectorValue MultivectorValue::from_matrix(const Mat& m, double drop) {
  MultivectorValue v;
  v.dim = static_cast<int>(m.rows());
  v.degree = 2;
  for (int i = 0; i < v.dim; ++i)
    for (int j = i + 1; j < v.dim; ++j) {
      cplx c = 0.5 * (m(i, j) - m(j, i));
      if (std::abs(c) > drop) v.coeff[{i, j}] = c;
    }
  return v;
}

MultivectorValue MultivectorValue::push(const Mat& j) const {
  if (j.cols() != dim) throw std::invalid_argument("pushforward dimension mismatch");
  MultivectorValue out;
  out.dim = static_cast<int>(j.rows());
  out.degree = degree;
  for (const auto& idx : combinations(out.dim, degree)) {
    std::vector<Vec> cov;
    for (int r : idx) cov.push_back(j.row(r).transpose());
    cplx v = contract(cov);
    if (v != 0.0) out.coeff[idx] = v;
  }
  return out;
}

double MultivectorValue::max_abs() const {
  double m = 0;
  for (const auto& [i, v] : coeff) m = std::max(m, std::abs(v));
  return m;
}

MultivectorValue evaluate(const MultiVectorField& f, const Point& p) {
  return evaluate_table(f.coeff, f.chart->dim(), f.degree, p);
}

MultivectorValue evaluate(const DifferentialForm& f, const Point& p) {
  return evaluate_table(f.coeff, f.chart->dim(), f.degree, p);
}

PointwiseField pointwise(const MultiVectorField& f) {
  std::vector<MultiIndex> keys;
  std::vector<Expr> vals;
  for (const auto& [i, e] : f.coeff) {
    keys.push_back(i);
    vals.push_back(e);
  }
  auto tape = std::make_shared<Tape>(vals);
  int dim = f.chart->dim(), degree = f.degree;
  return [keys, tape, dim, degree](const Point& p) {
    auto out = tape->eval(p);
    MultivectorValue v;
    v.dim = dim;
    v.degree = degree;
    for (std::size_t k = 0; k < keys.size(); ++k) v.coeff[keys[k]] = out[k];
    return v;
  };
}

// ---------------------------------------------------------------- calculus

namespace {

// Right derivative in the odd variable theta_i: removes i with sign (-1)^(k-1-j).
std::vector<std::pair<MultiIndex, Expr>> right_derivative(const MultiVectorField& p, int i) {
  std::vector<std::pair<MultiIndex, Expr>> out;
  for (const auto& [idx, c] : p.coeff) {
    auto it = std::find(idx.begin(), idx.end(), i);
    if (it == idx.end()) continue;
    int j = static_cast<int>(it - idx.begin());
    int k = static_cast<int>(idx.size());
    MultiIndex rest = idx;
    rest.erase(rest.begin() + j);
    out.emplace_back(rest, (k - 1 - j) % 2 ? -c : c);
  }
  return out;
}

void schouten_half(const MultiVectorField& a, const MultiVectorField& b, int sign, MultiVectorField& out) {
  const int n = a.chart->dim();
  for (int i = 0; i < n; ++i) {
    auto ra = right_derivative(a, i);
    if (ra.empty()) continue;
    for (const auto& [ib, cb] : b.coeff) {
      Expr db = diff(cb, i);
      if (db.is_zero_const()) continue;
      for (const auto& [ia, ca] : ra) {
        MultiIndex m;
        int s = merge_sign(ia, ib, m) * sign;
        if (s != 0) out.add(m, s > 0 ? ca * db : -(ca * db));
      }
    }
  }
}

}  // namespace

MultiVectorField schouten(const MultiVectorField& p, const MultiVectorField& q) {
  check_chart(p.chart, q.chart);
  MultiVectorField out = MultiVectorField::zero(p.chart, std::max(0, p.degree + q.degree - 1));
  if (p.degree + q.degree == 0) return out;
  schouten_half(p, q, 1, out);
  int e = (p.degree - 1) * (q.degree - 1);
  schouten_half(q, p, e % 2 ? 1 : -1, out);
  return out;
}

Expr apply(const MultiVectorField& pi, const std::vector<Expr>& fs) {
  if (static_cast<int>(fs.size()) != pi.degree)
    throw std::invalid_argument("apply: " + std::to_string(pi.degree) + "-vector needs " + std::to_string(pi.degree) +
                                " functions, got " + std::to_string(fs.size()));
  const int k = pi.degree;
  std::vector<std::vector<Expr>> grads;
  for (const auto& f : fs) {
    std::vector<Expr> g;
    for (int v = 0; v < pi.chart->dim(); ++v) g.push_back(diff(f, v));
    grads.push_back(std::move(g));
  }
  std::vector<Expr> terms;
  for (const auto& [idx, c] : pi.coeff) {
    std::vector<std::vector<Expr>> m(static_cast<std::size_t>(k));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        m[static_cast<std::size_t>(a)].push_back(
            grads[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])]);
    Expr d = symbolic_det(m);
    if (!d.is_zero_const()) terms.push_back(c * d);
  }
  return Expr::add(terms);
}

std::vector<cplx> sharp(const MultivectorValue& pi, const std::vector<cplx>& alpha) {
  if (pi.degree != 2) throw std::invalid_argument("sharp needs a bivector");
  if (static_cast<int>(alpha.size()) != pi.dim)
    throw std::invalid_argument("sharp: covector has " + std::to_string(alpha.size()) + " components, expected " +
                                std::to_string(pi.dim));
  Vec v = pi.matrix().transpose() * to_vec(alpha);
  return to_std(v);
}

std::vector<cplx> sharp(const MultiVectorField& pi, const std::vector<cplx>& alpha, const Point& p) {
  return sharp(evaluate(pi, p), alpha);
}

DifferentialForm exterior_derivative(const DifferentialForm& w) {
  DifferentialForm out = DifferentialForm::zero(w.chart, w.degree + 1);
  for (const auto& [idx, c] : w.coeff)
    for (int j = 0; j < w.chart->dim(); ++j) {
      if (std::find(idx.begin(), idx.end(), j) != idx.end()) continue;
      Expr d = diff(c, j);
      if (d.is_zero_const()) continue;
      int below = static_cast<int>(std::count_if(idx.begin(), idx.end(), [j](int i) { return i < j; }));
      MultiIndex m = idx;
      m.insert(std::lower_bound(m.begin(), m.end(), j), j);
      out.add(m, below % 2 ? -d : d);
    }
  return out;
}

DifferentialForm pullback(const DifferentialForm& w, const ChartMap& f) {
  check_chart(w.chart, f.target());
  DifferentialForm out = DifferentialForm::zero(f.source(), w.degree);
  const auto& jac = f.jacobian();
  for (const auto& [idx, c] : w.coeff) {
    Expr cf = substitute(c, f.comps());
    for (const auto& jdx : combinations(f.source()->dim(), w.degree)) {
      std::vector<std::vector<Expr>> m;
      for (int a : idx) {
        std::vector<Expr> row;
        for (int b : jdx) row.push_back(jac[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
        m.push_back(std::move(row));
      }
      Expr d = symbolic_det(m);
      if (!d.is_zero_const()) out.add(jdx, cf * d);
    }
  }
  return out;
}

DifferentialForm realify_form(const ChartPtr& complex_chart, int degree,
                              const std::map<MultiIndex, Expr>& wirtinger_coeff, const ChartPtr& real_chart,
                              DifferentialForm* imaginary) {
  const int n = complex_chart->dim();
  for (const auto& v : complex_chart->vars.vars())
    if (v.kind != VarKind::Complex) throw std::invalid_argument("realify_form needs an all-complex chart");
  if (real_chart->dim() != 2 * n) throw std::invalid_argument("realified chart has the wrong dimension");
  // dz = dx + i dy, dconj(z) = dx - i dy
  std::vector<std::vector<Expr>> lmat(static_cast<std::size_t>(2 * n), std::vector<Expr>(2 * n, Expr(0)));
  for (int k = 0; k < n; ++k) {
    lmat[2 * k][2 * k] = Expr(1);
    lmat[2 * k][2 * k + 1] = Expr::imag_unit();
    lmat[2 * k + 1][2 * k] = Expr(1);
    lmat[2 * k + 1][2 * k + 1] = -Expr::imag_unit();
  }
  Realification r = realify(complex_chart->vars);
  DifferentialForm re = DifferentialForm::zero(real_chart, degree);
  DifferentialForm im = DifferentialForm::zero(real_chart, degree);
  for (const auto& jdx : combinations(2 * n, degree)) {
    std::vector<Expr> terms;
    for (const auto& [idx, c] : wirtinger_coeff) {
      std::vector<std::vector<Expr>> m;
      for (int a : idx) {
        std::vector<Expr> row;
        for (int b : jdx) row.push_back(lmat[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
        m.push_back(std::move(row));
      }
      Expr d = symbolic_det(m);
      if (!d.is_zero_const()) terms.push_back(c * d);
    }
    if (terms.empty()) continue;
    auto [pr, pi] = to_real(Expr::add(terms), r);
    re.add(jdx, pr);
    im.add(jdx, pi);
  }
  if (imaginary) *imaginary = im;
  return re;
}

SingularFormError::SingularFormError(double cond)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "2-form is degenerate (condition number " << cond << ")";
        return os.str();
      }()),
      condition(cond) {}

MultivectorValue invert_form_value(const MultivectorValue& w) {
  Mat wm = w.matrix();
  double cond = condition_number(wm);
  if (!std::isfinite(cond) || cond > 1e12) throw SingularFormError(cond);
  Mat pi = -wm.inverse();
  return MultivectorValue::from_matrix(pi);
}

MultivectorValue invert_form_at(const DifferentialForm& w, const Point& p) {
  if (w.degree != 2) throw std::invalid_argument("invert_form_at needs a 2-form");
  return invert_form_value(evaluate(w, p));
}

// ---------------------------------------------------------------- submanifolds

Submanifold cut_out(ChartPtr ambient, std::vector<Expr> generators, int expected_dim) {
  Submanifold n;
  n.ambient = std::move(ambient);
  n.generators = std::move(generators);
  n.expected_dim = expected_dim;
  return n;
}

std::optional<Point> newton_project(const std::vector<Expr>& gens, const Tape& g, const Tape& jac, int dim, Point x,
                                    double tol, int max_iter) {
  const int m = static_cast<int>(gens.size());
  auto residual = [&](const Point& p) { return vec_max(g.eval(p)); };
  double r = residual(x);
  for (int it = 0; it < max_iter && r > tol; ++it) {
    auto jv = jac.eval(x);
    Mat j(m, dim);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < dim; ++b) j(a, b) = jv[static_cast<std::size_t>(a * dim + b)];
    Vec step = least_squares(j, to_vec(g.eval(x)));
    double lambda = 1.0;
    bool moved = false;
    for (int half = 0; half < 20; ++half) {
      Point y = x;
      for (int b = 0; b < dim; ++b) y[static_cast<std::size_t>(b)] -= lambda * step(b);
      double ry;
      try {
        ry = residual(y);
      } catch (const EvalError&) {
        ry = INFINITY;
      }
      if (std::isfinite(ry) && ry < r) {
        x = std::move(y);
        r = ry;
        moved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) break;
  }
  if (r <= 1e-10) return x;
  return std::nullopt;
}

std::optional<Point> sample_on(const Submanifold& n, CounterRng& rng, double box) {
  return NSampler(n)(rng, box);
}

LocalFrame local_frame(const Submanifold& n, const Point& x) {
  LocalFrame f;
  const int dim = n.ambient->dim();
  if (n.generators.empty()) {
    f.tangent = Mat::Identity(dim, dim);
    f.conormal = Mat(dim, 0);
    return f;
  }
  GenTapes t(n);
  f.tangent = nullspace(t.jacobian(x));
  f.conormal = nullspace(f.tangent.transpose());
  return f;
}

namespace {

std::vector<std::string> coord_names(const Submanifold& n) { return n.ambient->names(); }

CheckRecord vacuous(const std::string& name, double tol) {
  CheckRecord c;
  c.name = name;
  c.tol = tol;
  c.notes = "vacuous: no generators";
  return c;
}

}  // namespace

CheckRecord is_tangent(const MultiVectorField& pi, const Submanifold& n, std::int64_t samples, double tol,
                       std::uint64_t seed) {
  check_chart(pi.chart, n.ambient);
  if (n.generators.empty()) return vacuous("tangent", tol);
  if (pi.degree < 1) throw std::invalid_argument("is_tangent needs degree >= 1");
  PointwiseField field = pointwise(pi);
  NSampler sampler(n);
  const GenTapes& tapes = *sampler.tapes;
  const bool complex = n.ambient->vars.any_complex();
  return run_samples("tangent", samples, tol, seed, coord_names(n), [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    auto x = sampler(rng);
    if (!x) {
      res.ok = false;
      res.note = "no point on N";
      return res;
    }
    res.point = *x;
    MultivectorValue v = field(*x);
    Mat g = tapes.jacobian(*x);
    for (int gen = 0; gen < tapes.m; ++gen)
      for (int draw = 0; draw < 3; ++draw) {
        std::vector<Vec> cov{g.row(gen).transpose()};
        for (int s = 1; s < pi.degree; ++s) cov.push_back(random_vec(rng, tapes.dim, complex));
        double r = std::abs(v.contract(cov));
        if (r > res.residual) {
          res.residual = r;
          res.note = "generator " + std::to_string(gen);
        }
      }
    return res;
  });
}

CheckRecord is_coisotropic(const PointwiseField& pi, int degree, const Submanifold& n, std::int64_t samples,
                           double tol, std::uint64_t seed, const std::string& name) {
  if (n.generators.empty()) return vacuous(name, tol);
  if (degree < 1) throw std::invalid_argument("is_coisotropic needs degree >= 1");
  NSampler sampler(n);
  const GenTapes& tapes = *sampler.tapes;
  const bool complex = n.ambient->vars.any_complex();
  auto tuples = combinations(tapes.m, degree);
  return run_samples(name, samples, tol, seed, coord_names(n), [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    auto x = sampler(rng);
    if (!x) {
      res.ok = false;
      res.note = "no point on N";
      return res;
    }
    res.point = *x;
    MultivectorValue v = pi(*x);
    Mat g = tapes.jacobian(*x);
    auto check = [&](const std::vector<Vec>& cov, const std::string& what) {
      double r = std::abs(v.contract(cov));
      if (r > res.residual) {
        res.residual = r;
        res.note = what;
      }
    };
    for (const auto& t : tuples) {
      std::vector<Vec> cov;
      for (int gi : t) cov.push_back(g.row(gi).transpose());
      std::string what = "generators";
      for (int gi : t) what += " " + std::to_string(gi);
      check(cov, what);
    }
    // Differentials of ideal elements sum h_j g_j restrict to sum h_j(x) dg_j on N.
    for (int draw = 0; draw < 20; ++draw) {
      std::vector<Vec> cov;
      for (int s = 0; s < degree; ++s) cov.push_back(g.transpose() * random_vec(rng, tapes.m, complex));
      check(cov, "ideal combination " + std::to_string(draw));
    }
    return res;
  });
}

CheckRecord is_coisotropic(const MultiVectorField& pi, const Submanifold& n, std::int64_t samples, double tol,
                           std::uint64_t seed) {
  check_chart(pi.chart, n.ambient);
  return is_coisotropic(pointwise(pi), pi.degree, n, samples, tol, seed);
}

// ---------------------------------------------------------------- reduction

ReductionHypothesisViolated::ReductionHypothesisViolated(const std::string& what, double r)
    : std::runtime_error(what), residual(r) {}

ReductionResult reduce_at(const PointwiseField& pi_q, int degree, const Submanifold& n, const ChartMap& phi,
                          const Point& x, const std::vector<Vec>& alphas, ReductionSign sign, std::uint64_t seed,
                          double tol) {
  check_chart(phi.source(), n.ambient);
  if (static_cast<int>(alphas.size()) != degree)
    throw std::invalid_argument("reduce_at needs " + std::to_string(degree) + " covectors");
  const int dim = n.ambient->dim();
  const int pdim = phi.target()->dim();
  for (const auto& a : alphas)
    if (a.size() != pdim) throw std::invalid_argument("reduced covector has the wrong dimension");
  if (!n.generators.empty()) {
    double off = vec_max(Tape(n.generators).eval(x));
    if (off > tol) throw std::invalid_argument("reduce_at: point is not on N (|g| = " + std::to_string(off) + ")");
  }
  const bool complex = n.ambient->vars.any_complex();
  LocalFrame frame = local_frame(n, x);
  const Mat& t = frame.tangent;
  const Mat& c = frame.conormal;
  Mat jphi = phi.jacobian_at(x);
  Mat tt = t.transpose();

  auto base_lift = [&](const Vec& alpha) {
    Vec rhs = tt * (jphi.transpose() * alpha);
    Vec beta = least_squares(tt, rhs);
    double gap = (tt * beta - rhs).cwiseAbs().maxCoeff();
    if (gap > tol) throw ReductionHypothesisViolated("lift system is inconsistent", gap);
    return beta;
  };
  CounterRng rng(seed, 0);
  auto random_lift = [&](const Vec& base) -> Vec {
    if (c.cols() == 0) return base;
    return base + c * random_vec(rng, static_cast<int>(c.cols()), complex);
  };

  std::vector<Vec> bases;
  for (const auto& a : alphas) bases.push_back(base_lift(a));
  MultivectorValue v = pi_q(x);
  if (v.dim != dim || v.degree != degree) throw std::invalid_argument("reduce_at: field does not match N");

  // The value is well defined when pi(nu, beta_2, ...) vanishes for every
  // conormal nu and all lifts beta: nu is then mapped into ker dPhi on TN.
  double hyp = 0;
  std::vector<Vec> probes;
  for (int j = 0; j < pdim; ++j) probes.push_back(base_lift(Vec::Unit(pdim, j)));
  for (Eigen::Index q = 0; q < c.cols(); ++q) probes.push_back(c.col(q));
  for (Eigen::Index q = 0; q < c.cols() && degree >= 1; ++q) {
    for (const auto& pr : probes) {
      for (int draw = 0; draw < 2; ++draw) {
        std::vector<Vec> cov{c.col(q)};
        if (degree >= 2) cov.push_back(random_lift(pr));
        for (int s = 2; s < degree; ++s) cov.push_back(random_lift(base_lift(random_vec(rng, pdim, complex))));
        hyp = std::max(hyp, std::abs(v.contract(cov)));
      }
      if (degree < 2) break;
    }
  }
  if (hyp > tol)
    throw ReductionHypothesisViolated("N is not coisotropic with fibers of Phi as characteristic leaves at this point",
                                      hyp);

  auto value = [&] {
    std::vector<Vec> lifts;
    for (const auto& b : bases) lifts.push_back(random_lift(b));
    cplx val = v.contract(lifts);
    if (sign == ReductionSign::Alternating && degree % 2 == 0) val = -val;
    return val;
  };
  ReductionResult r;
  r.value = value();
  r.value_alt = value();
  r.lift_gap = std::abs(r.value - r.value_alt);
  r.hypothesis_residual = hyp;
  return r;
}

}  // namespace pforge
