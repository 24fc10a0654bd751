#include "pforge/groupoid.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <regex>
#include <stdexcept>

#include "pforge/liealg.hpp"
#include "pforge/matexpr.hpp"

namespace pforge {

namespace {

Point concat(const Point& a, const Point& b) {
  Point out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Point concat(const Point& a, const Point& b, const Point& c) { return concat(concat(a, b), c); }

double rel_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rel_diff: size mismatch");
  double r = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    r = std::max(r, std::abs(a[i] - b[i]) / scale);
  }
  return r;
}

std::vector<std::string> suffixed(const std::vector<std::string>& names, const std::string& suffix) {
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(n + suffix);
  return out;
}

std::vector<Expr> vars_of(const ChartPtr& c) {
  std::vector<Expr> out;
  for (int k = 0; k < c->dim(); ++k) out.push_back(c->coord(k));
  return out;
}

std::vector<Expr> slice(const std::vector<Expr>& v, std::size_t first, std::size_t count) {
  return {v.begin() + static_cast<std::ptrdiff_t>(first), v.begin() + static_cast<std::ptrdiff_t>(first + count)};
}

std::vector<Expr> subst_all(const std::vector<Expr>& es, const std::vector<Expr>& repl) {
  std::vector<Expr> out;
  for (const auto& e : es) out.push_back(substitute(e, repl));
  return out;
}

// Merges per-component zero tests: Fail wins, then sampled Pass, then Proven.
CheckRecord symbolic_all(const std::string& name, const std::vector<Expr>& es, double tol) {
  CheckRecord out;
  out.name = name;
  out.tol = tol;
  out.status = Status::Proven;
  out.notes = "every component has a literally zero normal form";
  for (const auto& e : es) {
    CheckRecord c = symbolic_record(name, e, tol);
    out.max_residual = std::max(out.max_residual, c.max_residual);
    out.samples_used = std::max(out.samples_used, c.samples_used);
    if (c.status == Status::Fail) {
      out.status = Status::Fail;
      out.notes = c.notes;
      out.witnesses = c.witnesses;
      return out;
    }
    if (c.status == Status::Pass && out.status == Status::Proven) {
      out.status = Status::Pass;
      out.notes = c.notes;
    }
  }
  return out;
}

Vec column_of(const std::vector<cplx>& v) { return to_vec(v); }

// ---------------------------------------------------------------- Dazord

GroupoidPtr build_dazord() {
  auto g = std::make_shared<GroupoidEntry>();
  g->name = "dazord";
  VarTable cv;
  cv.add("Z", VarKind::Complex);
  cv.add("z", VarKind::Complex);
  Realification r = realify(cv);
  g->total = make_chart("dazord", r.real);
  g->base = real_chart("dazord_base", {"x", "y"});

  VarTable pv;
  pv.add("Z1", VarKind::Complex);
  pv.add("z1", VarKind::Complex);
  pv.add("Z2", VarKind::Complex);
  pv.add("z2", VarKind::Complex);
  Realification pr = realify(pv);
  g->pair = make_chart("dazord_pair", pr.real);

  Expr Z = var(cv, 0), z = var(cv, 1);
  auto real_pair = [](const std::pair<Expr, Expr>& p) { return std::vector<Expr>{p.first, p.second}; };
  auto realc = [&](const Expr& e) { return real_pair(to_real(e, r)); };

  const auto& T = *g->total;
  g->s = ChartMap(g->total, g->base, {T.coord(2), T.coord(3)});
  g->t = ChartMap(g->total, g->base, realc(Expr::exp(Z * conj(z)) * z));
  const auto& B = *g->base;
  g->unit = ChartMap(g->base, g->total, {Expr(0), Expr(0), B.coord(0), B.coord(1)});

  std::vector<Expr> inv = realc(-Z * Expr::exp(-conj(Z) * z));
  for (auto& e : realc(Expr::exp(Z * conj(z)) * z)) inv.push_back(e);
  g->inverse = ChartMap(g->total, g->total, inv);

  Expr Z1 = var(pv, 0), z1 = var(pv, 1), Z2 = var(pv, 2);
  std::vector<Expr> prod = real_pair(to_real(Z1 + Expr::exp(conj(Z1) * z1) * Z2, pr));
  for (auto& e : real_pair(to_real(z1, pr))) prod.push_back(e);
  g->product = ChartMap(g->pair, g->total, prod);

  Expr X = T.coord(0), Y = T.coord(1), x = T.coord(2), y = T.coord(3);
  DifferentialForm w = DifferentialForm::zero(g->total, 2);
  w.set({0, 1}, -(x * x + y * y));
  w.set({2, 3}, X * X + Y * Y);
  w.set({0, 2}, -(X * y + Y * x));
  w.set({0, 3}, X * x - Y * y - Expr(1));
  w.set({1, 2}, X * x - Y * y + Expr(1));
  w.set({1, 3}, X * y + Y * x);
  g->omega = w;

  MultiVectorField pm = MultiVectorField::zero(g->base, 2);
  pm.set({0, 1}, B.coord(0) * B.coord(0) + B.coord(1) * B.coord(1));
  g->base_pi = pm;

  g->sample_arrow = [](CounterRng& rng) {
    Point p(4);
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
    return p;
  };
  g->metadata["coordinates"] = "Z = Z_re + i Z_im, z = z_re + i z_im";
  g->metadata["omega"] = "real closed form with s_* pi = (x^2+y^2) dx^dy";
  return g;
}

// ---------------------------------------------------------------- matrix groups

Point random_traceless(int n, CounterRng& rng) {
  Mat u(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) u(i, j) = rng.uniform(-1.0, 1.0);
  cplx tr = u.trace() / static_cast<double>(n);
  for (int i = 0; i < n; ++i) u(i, i) -= tr;
  return flatten(u);
}

struct MatrixGroupoidCharts {
  ChartPtr base, total, pair;
};

MatrixGroupoidCharts matrix_charts(const std::string& name, const std::string& fiber, int n) {
  MatrixGroupoidCharts c;
  c.base = real_chart(name + "_base", matrix_names(fiber, n));
  auto tn = matrix_names("g", n);
  for (auto& s : matrix_names(fiber, n)) tn.push_back(s);
  VarTable tv;
  for (const auto& s : tn) tv.add(s);
  Expr det = expr_det(matrix_of_vars(tv, 0, n));
  c.total = make_chart(name, tv, {det});
  VarTable pv;
  for (const auto& s : suffixed(tn, "_1")) pv.add(s);
  for (const auto& s : suffixed(tn, "_2")) pv.add(s);
  Expr d1 = expr_det(matrix_of_vars(pv, 0, n));
  Expr d2 = expr_det(matrix_of_vars(pv, 2 * n * n, n));
  c.pair = make_chart(name + "_pair", pv, {d1, d2});
  return c;
}

// Shared structure maps of the action groupoids G x V => V with t(g, v) = g^{-1} v g.
void fill_conjugation_maps(GroupoidEntry& g, int n) {
  const int nn = n * n;
  ExprMatrix G = matrix_of_vars(g.total->vars, 0, n);
  ExprMatrix V = matrix_of_vars(g.total->vars, nn, n);
  ExprMatrix Gi = expr_inverse(G);
  g.s = ChartMap(g.total, g.base, flatten(V));
  g.t = ChartMap(g.total, g.base, flatten(Gi * V * G));

  std::vector<Expr> unit = flatten(expr_identity(n));
  for (auto& e : vars_of(g.base)) unit.push_back(e);
  g.unit = ChartMap(g.base, g.total, unit);

  std::vector<Expr> inv = flatten(Gi);
  for (auto& e : flatten(Gi * V * G)) inv.push_back(e);
  g.inverse = ChartMap(g.total, g.total, inv);

  ExprMatrix G1 = matrix_of_vars(g.pair->vars, 0, n);
  ExprMatrix V1 = matrix_of_vars(g.pair->vars, nn, n);
  ExprMatrix G2 = matrix_of_vars(g.pair->vars, 2 * nn, n);
  std::vector<Expr> prod = flatten(G1 * G2);
  for (auto& e : flatten(V1)) prod.push_back(e);
  g.product = ChartMap(g.pair, g.total, prod);
}

// Lie-Poisson structure of gl_n identified with its dual by K(a, b) = 2n tr(ab):
// {u_ij, u_kl} = (delta_jk u_il - delta_li u_kj) / (2n).
MultiVectorField lie_poisson(const ChartPtr& base, int n) {
  MultiVectorField pm = MultiVectorField::zero(base, 2);
  const Rational scale(1, 2 * n);
  auto idx = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          int a = idx(i, j), b = idx(k, l);
          if (a >= b) continue;
          std::vector<Expr> terms;
          if (j == k) terms.push_back(base->coord(idx(i, l)));
          if (l == i) terms.push_back(-base->coord(idx(k, j)));
          if (terms.empty()) continue;
          pm.add({a, b}, Expr(scale) * Expr::add(terms));
        }
  return pm;
}

GroupoidPtr build_cotangent(int n) {
  auto g = std::make_shared<GroupoidEntry>();
  g->name = "cotangent-sl" + std::to_string(n);
  auto charts = matrix_charts(g->name, "u", n);
  g->base = charts.base;
  g->total = charts.total;
  g->pair = charts.pair;
  fill_conjugation_maps(*g, n);

  // Tautological form of the right trivialization: theta = 2n tr(g^{-1} u dg).
  const int nn = n * n;
  ExprMatrix G = matrix_of_vars(g->total->vars, 0, n);
  ExprMatrix U = matrix_of_vars(g->total->vars, nn, n);
  ExprMatrix A = Expr(2 * n) * (expr_inverse(G) * U);
  DifferentialForm theta = DifferentialForm::zero(g->total, 1);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) theta.add({j * n + k}, A[k][j]);
  g->omega = exterior_derivative(theta);
  g->base_pi = lie_poisson(g->base, n);

  g->sample_arrow = [n](CounterRng& rng) {
    Point p = flatten(random_sl(n, rng));
    for (auto& v : random_traceless(n, rng)) p.push_back(v);
    return p;
  };
  g->metadata["trivialization"] = "right, via K(a,b) = 2n tr(ab)";
  g->metadata["ambient"] = "T*GL_n; arrows sampled with det g = 1 and tr u = 0";
  return g;
}

MultiVectorField evens_lu_on(const ChartPtr& base, int n) {
  ExprMatrix H = matrix_of_vars(base->vars, 0, n);
  // (X, Y)_S at h, flattened
  auto field = [&](const QMatrix& x, const QMatrix& y) { return flatten(H * to_expr(x) - to_expr(y) * H); };
  MultiVectorField pi = MultiVectorField::zero(base, 2);
  auto add_wedge = [&](const Rational& c, const std::vector<Expr>& v, const std::vector<Expr>& w) {
    for (int a = 0; a < n * n; ++a)
      for (int b = a + 1; b < n * n; ++b) {
        Expr t = v[a] * w[b] - v[b] * w[a];
        if (!t.is_zero_const()) pi.add({a, b}, Expr(-c) * t);
      }
  };
  const QMatrix zero(n, n);
  // Cartan part: sum_i y_i (x) y_i with 2K(y_i, y_j) = delta_ij equals
  // (1/4n) sum_k E_kk (x) E_kk modulo I (x) I, whose contribution vanishes.
  for (int k = 0; k < n; ++k) {
    QMatrix e = QMatrix::unit(n, k, k);
    add_wedge(Rational(1, 4 * n), field(e, Rational(-1) * e), field(e, e));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      QMatrix ea = QMatrix::unit(n, i, j);
      QMatrix fa = Rational(1, 2 * n) * QMatrix::unit(n, j, i);  // K(E_a, E_-a) = 1
      add_wedge(Rational(1), field(zero, Rational(-1) * fa), field(ea, ea));
      add_wedge(Rational(1), field(ea, zero), field(fa, fa));
    }
  return pi;
}

GroupoidPtr build_conjugation(int n) {
  auto g = std::make_shared<GroupoidEntry>();
  g->name = "conjugation-sl" + std::to_string(n);
  auto charts = matrix_charts(g->name, "h", n);
  g->base = charts.base;
  g->total = charts.total;
  g->pair = charts.pair;
  fill_conjugation_maps(*g, n);
  g->base_pi = evens_lu_on(g->base, n);
  g->sample_arrow = [n](CounterRng& rng) {
    Point p = flatten(random_sl(n, rng));
    for (auto& v : flatten(random_sl(n, rng))) p.push_back(v);
    return p;
  };
  g->metadata["base_structure"] = "-sum (e_i)_S ^ (eps_i)_S";
  g->metadata["total_space_structure"] = "not implemented";
  return g;
}

}  // namespace

// ---------------------------------------------------------------- entries

PointwiseField GroupoidEntry::poisson() const {
  if (pi) return pointwise(*pi);
  if (omega) {
    MultiVectorField w;
    w.chart = omega->chart;
    w.degree = 2;
    w.coeff = omega->coeff;
    PointwiseField wv = pointwise(w);
    return [wv](const Point& p) { return invert_form_value(wv(p)); };
  }
  return {};
}

CatalogKey CatalogKey::parse(const std::string& text) {
  static const std::regex re(R"(^(dazord|cotangent|conjugation)(?:[-_]sl\(?([0-9]+)\)?)?$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw std::invalid_argument("unknown catalog key '" + text + "'");
  CatalogKey k;
  if (m[1] == "dazord") {
    if (m[2].matched) throw std::invalid_argument("dazord takes no parameter");
    return k;
  }
  if (!m[2].matched) throw std::invalid_argument("catalog key '" + text + "' needs a rank, e.g. " + m[1].str() + "-sl2");
  k.family = m[1] == "cotangent" ? CatalogFamily::CotangentSL : CatalogFamily::ConjugationSL;
  k.n = std::stoi(m[2]);
  return k;
}

std::string CatalogKey::str() const {
  switch (family) {
    case CatalogFamily::Dazord:
      return "dazord";
    case CatalogFamily::CotangentSL:
      return "cotangent-sl" + std::to_string(n);
    case CatalogFamily::ConjugationSL:
      return "conjugation-sl" + std::to_string(n);
  }
  return "?";
}

std::vector<std::string> catalog_keys() {
  return {"dazord", "cotangent-sl2", "cotangent-sl3", "conjugation-sl2", "conjugation-sl3"};
}

GroupoidPtr catalog(const CatalogKey& key) {
  if (key.family != CatalogFamily::Dazord && (key.n < 2 || key.n > 3))
    throw std::invalid_argument("unsupported rank n = " + std::to_string(key.n) + " (supported: 2, 3)");
  static std::mutex mu;
  static std::map<std::string, GroupoidPtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key.str());
  if (it != cache.end()) return it->second;
  GroupoidPtr g;
  switch (key.family) {
    case CatalogFamily::Dazord:
      g = build_dazord();
      break;
    case CatalogFamily::CotangentSL:
      g = build_cotangent(key.n);
      break;
    case CatalogFamily::ConjugationSL:
      g = build_conjugation(key.n);
      break;
  }
  cache[key.str()] = g;
  return g;
}

VerbatimForm dazord_verbatim_omega() {
  VarTable cv;
  cv.add("Z", VarKind::Complex);
  cv.add("z", VarKind::Complex);
  ChartPtr cc = make_chart("dazord_complex", cv);
  ChartPtr rc = catalog(CatalogKey{}).get()->total;
  Expr Z = var(cv, 0), z = var(cv, 1);
  // indices: 0 = dZ, 1 = dZbar, 2 = dz, 3 = dzbar
  std::map<MultiIndex, Expr> w;
  w[{0, 1}] = z * conj(z);
  w[{0, 2}] = conj(z) * conj(Z);
  w[{1, 3}] = z * Z;
  w[{2, 3}] = -(Z * conj(Z));  // Z Zbar dzbar ^ dz
  w[{0, 3}] = Expr(1);
  w[{1, 2}] = Expr(1);
  VerbatimForm out;
  out.real_part = realify_form(cc, 2, w, rc, &out.imag_part);
  return out;
}

GroupoidPtr corrupt_product_sign(const GroupoidEntry& g) {
  auto m = std::make_shared<GroupoidEntry>(g);
  auto comps = g.product.comps();
  comps[0] = -comps[0];
  m->product = ChartMap(g.pair, g.total, comps);
  m->name = g.name + "+corrupted-product";
  return m;
}

std::optional<Point> sample_composable(const GroupoidEntry& g, const Point& g1, CounterRng& rng) {
  const std::vector<cplx> target = g.t(g1);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Point x = g.sample_arrow(rng);
    for (int it = 0; it < 60; ++it) {
      std::vector<cplx> sv = g.s(x);
      Vec r(static_cast<Eigen::Index>(sv.size()));
      double rmax = 0;
      for (std::size_t k = 0; k < sv.size(); ++k) {
        r(static_cast<Eigen::Index>(k)) = sv[k] - target[k];
        rmax = std::max(rmax, std::abs(r(static_cast<Eigen::Index>(k))));
      }
      if (rmax <= 1e-13 * std::max(1.0, max_abs(to_vec(target)))) {
        if (g.total->in_domain(x)) return x;
        break;
      }
      Vec step = least_squares(g.s.jacobian_at(x), r);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] -= step(static_cast<Eigen::Index>(k));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- axioms

namespace {

struct Triple {
  Point a, b, c;
};

std::optional<Triple> composable_triple(const GroupoidEntry& g, CounterRng& rng) {
  Triple t;
  t.a = g.sample_arrow(rng);
  auto b = sample_composable(g, t.a, rng);
  if (!b) return std::nullopt;
  t.b = *b;
  auto c = sample_composable(g, t.b, rng);
  if (!c) return std::nullopt;
  t.c = *c;
  return t;
}

}  // namespace

Report verify_axioms(const GroupoidEntry& g, std::int64_t samples, double tol, std::uint64_t seed) {
  Report rep;
  rep.campaign_id = "axioms";
  rep.target = g.name;
  rep.seed = seed;
  auto mul = [&](const Point& a, const Point& b) { return g.product(concat(a, b)); };
  auto unit_at = [&](const std::vector<cplx>& m) { return g.unit(m); };

  using Identity = std::function<double(const Triple&)>;
  const std::vector<std::pair<std::string, Identity>> identities = {
      {"source_of_product", [&](const Triple& t) { return rel_diff(g.s(mul(t.a, t.b)), g.s(t.a)); }},
      {"target_of_product", [&](const Triple& t) { return rel_diff(g.t(mul(t.a, t.b)), g.t(t.b)); }},
      {"associativity",
       [&](const Triple& t) { return rel_diff(mul(mul(t.a, t.b), t.c), mul(t.a, mul(t.b, t.c))); }},
      {"left_unit", [&](const Triple& t) { return rel_diff(mul(unit_at(g.s(t.a)), t.a), t.a); }},
      {"right_unit", [&](const Triple& t) { return rel_diff(mul(t.a, unit_at(g.t(t.a))), t.a); }},
      {"right_inverse", [&](const Triple& t) { return rel_diff(mul(t.a, g.inverse(t.a)), unit_at(g.s(t.a))); }},
      {"left_inverse", [&](const Triple& t) { return rel_diff(mul(g.inverse(t.a), t.a), unit_at(g.t(t.a))); }},
      {"inverse_of_product",
       [&](const Triple& t) { return rel_diff(g.inverse(mul(t.a, t.b)), mul(g.inverse(t.b), g.inverse(t.a))); }},
      {"inverse_swaps_source_target",
       [&](const Triple& t) {
         return std::max(rel_diff(g.s(g.inverse(t.a)), g.t(t.a)), rel_diff(g.t(g.inverse(t.a)), g.s(t.a)));
       }},
  };
  auto names = g.total->names();
  for (const auto& [name, fn] : identities) {
    const Identity& f = fn;
    rep.add(run_samples(name, samples, tol, seed, names, [&](std::int64_t, CounterRng& rng) {
      SampleResult res;
      std::optional<Triple> t;
      try {
        t = composable_triple(g, rng);
      } catch (const EvalError&) {
      }
      if (!t) {
        res.ok = false;
        res.note = "composable tuple could not be produced (s-fiber solver failed)";
        return res;
      }
      res.point = t->a;
      res.residual = f(*t);
      return res;
    }));
  }

  // Symbolic invariants of the structure maps.
  std::vector<Expr> su, tu, inv2, lunit;
  auto bv = vars_of(g.base);
  auto sc = subst_all(g.s.comps(), g.unit.comps());
  auto tc = subst_all(g.t.comps(), g.unit.comps());
  for (std::size_t k = 0; k < bv.size(); ++k) {
    su.push_back(sc[k] - bv[k]);
    tu.push_back(tc[k] - bv[k]);
  }
  auto tv = vars_of(g.total);
  auto ii = subst_all(g.inverse.comps(), g.inverse.comps());
  for (std::size_t k = 0; k < tv.size(); ++k) inv2.push_back(ii[k] - tv[k]);
  std::vector<Expr> repl = subst_all(g.unit.comps(), g.s.comps());
  for (auto& e : tv) repl.push_back(e);
  auto lu = subst_all(g.product.comps(), repl);
  for (std::size_t k = 0; k < tv.size(); ++k) lunit.push_back(lu[k] - tv[k]);
  rep.add(symbolic_all("source_after_unit_symbolic", su, tol));
  rep.add(symbolic_all("target_after_unit_symbolic", tu, tol));
  rep.add(symbolic_all("inverse_involution_symbolic", inv2, tol));
  rep.add(symbolic_all("left_unit_symbolic", lunit, tol));
  return rep;
}

Report verify_symplectic(const GroupoidEntry& g, std::int64_t samples, std::uint64_t seed) {
  Report rep;
  rep.campaign_id = "symplectic";
  rep.target = g.name;
  rep.seed = seed;
  if (!g.omega) {
    rep.metadata["omega"] = "absent";
    return rep;
  }
  DifferentialForm dw = exterior_derivative(*g.omega);
  std::vector<Expr> cs;
  for (const auto& [i, e] : dw.coeff) cs.push_back(e);
  rep.add(symbolic_all("d_omega_zero", cs, 1e-12));

  MultiVectorField w;
  w.chart = g.omega->chart;
  w.degree = 2;
  w.coeff = g.omega->coeff;
  PointwiseField wv = pointwise(w);
  // residual 1e-12 / (|det W| / max(1, max|W_ij|)^dim); passes when the scaled determinant exceeds 1e-12
  CheckRecord c = run_samples("omega_nondegenerate", samples, 1.0, seed, g.total->names(),
                              [&](std::int64_t, CounterRng& rng) {
                                SampleResult res;
                                res.point = g.sample_arrow(rng);
                                Mat m = wv(res.point).matrix();
                                double scale = std::max(1.0, max_abs(m));
                                double d = std::abs(m.determinant()) / std::pow(scale, static_cast<double>(m.rows()));
                                res.residual = d > 0 ? 1e-12 / d : INFINITY;
                                return res;
                              });
  c.notes = "residual is 1e-12 divided by the scaled determinant";
  rep.add(c);
  return rep;
}

// ---------------------------------------------------------------- multiplicativity

Report verify_multiplicativity(const GroupoidEntry& g, const PointwiseField& field, int degree, std::int64_t samples,
                               double tol, std::uint64_t seed) {
  Report rep;
  rep.campaign_id = "multiplicativity";
  rep.target = g.name;
  rep.seed = seed;
  if (!field) throw std::invalid_argument("verify_multiplicativity: no field");
  const int D = g.total->dim();
  VarTable tv;
  for (int b = 1; b <= 3; ++b)
    for (const auto& n : g.total->names()) tv.add(n + "_" + std::to_string(b));
  ChartPtr cube = make_chart(g.name + "_cube", tv);
  auto all = vars_of(cube);
  auto x1 = slice(all, 0, static_cast<std::size_t>(D));
  auto x2 = slice(all, static_cast<std::size_t>(D), static_cast<std::size_t>(D));
  auto x3 = slice(all, static_cast<std::size_t>(2 * D), static_cast<std::size_t>(D));
  std::vector<Expr> gens;
  auto prod = subst_all(g.product.comps(), slice(all, 0, static_cast<std::size_t>(2 * D)));
  for (int k = 0; k < D; ++k) gens.push_back(x3[k] - prod[k]);
  auto s2 = subst_all(g.s.comps(), x2);
  auto t1 = subst_all(g.t.comps(), x1);
  for (std::size_t k = 0; k < s2.size(); ++k) gens.push_back(s2[k] - t1[k]);
  Submanifold graph = cut_out(cube, gens, g.total->real_dimension() * 2 - g.base->real_dimension());
  graph.sampler = [&g](CounterRng& rng) -> std::optional<Point> {
    Point a = g.sample_arrow(rng);
    auto b = sample_composable(g, a, rng);
    if (!b) return std::nullopt;
    std::vector<cplx> c = g.product(concat(a, *b));
    return concat(a, *b, c);
  };
  const double last_sign = (degree % 2 == 1) ? 1.0 : -1.0;  // (-1)^(k+1)
  PointwiseField sum = [field, D, degree, last_sign](const Point& p) {
    MultivectorValue out;
    out.dim = 3 * D;
    out.degree = degree;
    for (int b = 0; b < 3; ++b) {
      Point q(p.begin() + b * D, p.begin() + (b + 1) * D);
      MultivectorValue v = field(q);
      for (const auto& [idx, c] : v.coeff) {
        MultiIndex shifted = idx;
        for (auto& i : shifted) i += b * D;
        out.coeff[shifted] = (b == 2 ? last_sign : 1.0) * c;
      }
    }
    return out;
  };
  rep.add(is_coisotropic(sum, degree, graph, samples, tol, seed, "graph_coisotropic"));
  return rep;
}

Report pushforward_check(const GroupoidEntry& g, const MultiVectorField& pi_m, std::int64_t samples, double tol,
                         std::uint64_t seed) {
  PointwiseField pg = g.poisson();
  if (!pg) throw std::invalid_argument(g.name + ": no total-space Poisson structure");
  if (pi_m.chart->names() != g.base->names()) throw std::invalid_argument("pi_M is not on the base chart");
  Report rep;
  rep.campaign_id = "pushforward";
  rep.target = g.name;
  rep.seed = seed;
  PointwiseField pm = pointwise(pi_m);
  const double tsign = (pi_m.degree % 2 == 1) ? 1.0 : -1.0;
  auto gap = [](const MultivectorValue& a, const MultivectorValue& b, double sign) {
    double r = 0;
    for (const auto& [i, v] : a.coeff) {
      auto it = b.coeff.find(i);
      r = std::max(r, std::abs(v - sign * (it == b.coeff.end() ? cplx(0) : it->second)));
    }
    for (const auto& [i, v] : b.coeff)
      if (!a.coeff.count(i)) r = std::max(r, std::abs(v));
    return r;
  };
  auto campaign = [&](const std::string& name, const ChartMap& map, double sign) {
    return run_samples(name, samples, tol, seed, g.total->names(), [&](std::int64_t, CounterRng& rng) {
      SampleResult res;
      res.point = g.sample_arrow(rng);
      MultivectorValue pushed = pg(res.point).push(map.jacobian_at(res.point));
      res.residual = gap(pushed, pm(map(res.point)), sign);
      return res;
    });
  };
  rep.add(campaign("source_pushforward", g.s, 1.0));
  rep.add(campaign("target_pushforward", g.t, tsign));
  return rep;
}

// ---------------------------------------------------------------- lifts

namespace {

// d/de of (g1(e) g) at g1 = unit(s(g)), restricted to the g1 block.
Mat right_translation_jacobian(const GroupoidEntry& g, const Point& unit_point, const Point& gamma) {
  const int D = g.total->dim();
  Mat j = g.product.jacobian_at(concat(unit_point, gamma));
  return j.leftCols(D);
}

Vec lift_vector(const GroupoidEntry& g, const Vec& v, const Point& gamma) {
  std::vector<cplx> m = g.s(gamma);
  Point u = g.unit(m);
  Mat dt = g.t.jacobian_at(u);
  double scale = std::max(1.0, max_abs(v));
  if (max_abs(dt * v) > 1e-8 * scale) throw std::invalid_argument("section value is not in ker dt at the unit");
  Mat jr = right_translation_jacobian(g, u, gamma);
  Mat k = nullspace(dt);
  if (numeric_rank(jr * k) < k.cols()) throw std::runtime_error("right translation Jacobian is rank deficient");
  return jr * v;
}

}  // namespace

std::vector<cplx> right_invariant_lift(const GroupoidEntry& g, const ChartMap& section, const Point& gamma) {
  if (section.source()->names() != g.base->names()) throw std::invalid_argument("section must be defined on M");
  if (section.comps().size() != static_cast<std::size_t>(g.total->dim()))
    throw std::invalid_argument("section must have one component per coordinate of Gamma");
  return to_std(lift_vector(g, column_of(section(g.s(gamma))), gamma));
}

MultiVectorField right_lift_field(const GroupoidEntry& g, const ChartMap& section) {
  const int D = g.total->dim();
  std::vector<Expr> repl = subst_all(g.unit.comps(), g.s.comps());
  for (auto& e : vars_of(g.total)) repl.push_back(e);
  std::vector<Expr> v = subst_all(section.comps(), g.s.comps());
  const auto& jac = g.product.jacobian();
  MultiVectorField out = MultiVectorField::zero(g.total, 1);
  for (int i = 0; i < D; ++i) {
    std::vector<Expr> terms;
    for (int j = 0; j < D; ++j) {
      if (v[j].is_zero_const() || jac[i][j].is_zero_const()) continue;
      terms.push_back(substitute(jac[i][j], repl) * v[j]);
    }
    if (!terms.empty()) out.set({i}, Expr::add(terms));
  }
  return out;
}

MultiVectorField left_lift_field(const GroupoidEntry& g, const ChartMap& section) {
  const int D = g.total->dim();
  MultiVectorField r = right_lift_field(g, section);
  const auto& inv = g.inverse.comps();
  const auto& jac = g.inverse.jacobian();
  MultiVectorField out = MultiVectorField::zero(g.total, 1);
  for (int i = 0; i < D; ++i) {
    std::vector<Expr> terms;
    for (int j = 0; j < D; ++j) {
      Expr rj = r.get({j});
      if (rj.is_zero_const() || jac[i][j].is_zero_const()) continue;
      terms.push_back(substitute(jac[i][j], inv) * substitute(rj, inv));
    }
    if (!terms.empty()) out.set({i}, Expr::add(terms));
  }
  return out;
}

MultiVectorField exact_multiplicative(const GroupoidEntry& g, const std::vector<BisectionPair>& lambda) {
  MultiVectorField out = MultiVectorField::zero(g.total, 2);
  for (const auto& [u, w] : lambda) {
    out = out + wedge(right_lift_field(g, u), right_lift_field(g, w));
    out = out - wedge(left_lift_field(g, u), left_lift_field(g, w));
  }
  return out;
}

MultivectorValue anchor_image(const GroupoidEntry& g, const std::vector<BisectionPair>& lambda, const Point& m) {
  Point u = g.unit(m);
  const int D = g.total->dim();
  Mat l = Mat::Zero(D, D);
  for (const auto& [a, b] : lambda) {
    Vec va = column_of(a(m)), vb = column_of(b(m));
    l += va * vb.transpose() - vb * va.transpose();
  }
  return MultivectorValue::from_matrix(l).push(g.s.jacobian_at(u));
}

Report verify_lifts(const GroupoidEntry& g, std::int64_t samples, double tol, std::uint64_t seed) {
  PointwiseField pg = g.poisson();
  if (!pg) throw std::invalid_argument(g.name + ": no total-space Poisson structure");
  Report rep;
  rep.campaign_id = "lifts";
  rep.target = g.name;
  rep.seed = seed;
  const int dm = g.base->dim();
  // Section of the coordinate function x_i: pi^#(s* dx_i) along units.
  auto hamiltonian = [&](const Point& gamma, int i) {
    Mat ds = g.s.jacobian_at(gamma);
    std::vector<cplx> alpha(ds.cols());
    for (Eigen::Index c = 0; c < ds.cols(); ++c) alpha[static_cast<std::size_t>(c)] = ds(i, c);
    return column_of(sharp(pg(gamma), alpha));
  };
  auto names = g.total->names();
  rep.add(run_samples("lift_matches_sharp", samples, tol, seed, names, [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    res.point = g.sample_arrow(rng);
    Point u = g.unit(g.s(res.point));
    for (int i = 0; i < dm; ++i) {
      Vec lifted = lift_vector(g, hamiltonian(u, i), res.point);
      Vec direct = hamiltonian(res.point, i);
      res.residual = std::max(res.residual, max_abs(lifted - direct) / std::max(1.0, max_abs(direct)));
    }
    return res;
  }));
  rep.add(run_samples("lift_at_unit", samples, tol, seed, names, [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    res.point = g.unit(g.s(g.sample_arrow(rng)));
    for (int i = 0; i < dm; ++i) {
      Vec v = hamiltonian(res.point, i);
      res.residual = std::max(res.residual, max_abs(lift_vector(g, v, res.point) - v));
    }
    return res;
  }));
  rep.add(run_samples("right_translation_consistency", samples, tol, seed, names,
                      [&](std::int64_t, CounterRng& rng) {
                        SampleResult res;
                        Point a = g.sample_arrow(rng);
                        auto b = sample_composable(g, a, rng);
                        if (!b) {
                          res.ok = false;
                          res.note = "composable pair could not be produced";
                          return res;
                        }
                        res.point = a;
                        Point ab = g.product(concat(a, *b));
                        Point u = g.unit(g.s(a));
                        Mat jr = g.product.jacobian_at(concat(a, *b)).leftCols(g.total->dim());
                        for (int i = 0; i < dm; ++i) {
                          Vec v = hamiltonian(u, i);
                          Vec at_a = lift_vector(g, v, a);
                          Vec at_ab = lift_vector(g, v, ab);
                          res.residual = std::max(res.residual, max_abs(jr * at_a - at_ab) /
                                                                    std::max(1.0, max_abs(at_ab)));
                        }
                        return res;
                      }));
  return rep;
}

MultiVectorField evens_lu_bivector(int n) {
  if (n < 2 || n > 3) throw std::invalid_argument("evens_lu_bivector: n must be 2 or 3");
  return catalog(CatalogKey{CatalogFamily::ConjugationSL, n})->base_pi.value();
}

}  // namespace pforge
