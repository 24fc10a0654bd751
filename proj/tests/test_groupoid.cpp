#include <cmath>

#include "doctest.h"
#include "pforge/groupoid.hpp"
#include "pforge/liealg.hpp"
#include "pforge/matexpr.hpp"

using namespace pforge;

namespace {

cplx Z_of(const Point& p, int k = 0) { return {p[2 * k].real(), p[2 * k + 1].real()}; }

Point real_point(std::initializer_list<cplx> zs) {
  Point p;
  for (cplx z : zs) {
    p.push_back(z.real());
    p.push_back(z.imag());
  }
  return p;
}

void require_all_ok(const Report& r) {
  for (const auto& c : r.checks) {
    INFO(r.target << " / " << c.name << " residual " << c.max_residual << " notes " << c.notes);
    CHECK(c.ok());
  }
}

// Independent matrix helpers on std::complex.
Mat mat2(cplx a, cplx b, cplx c, cplx d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("catalog keys") {
  CHECK(CatalogKey::parse("dazord").family == CatalogFamily::Dazord);
  CHECK(CatalogKey::parse("cotangent-sl3").n == 3);
  CHECK(CatalogKey::parse("conjugation_sl(2)").family == CatalogFamily::ConjugationSL);
  CHECK_THROWS_AS(CatalogKey::parse("banana"), std::invalid_argument);
  CHECK_THROWS_AS(CatalogKey::parse("cotangent"), std::invalid_argument);
  CHECK_THROWS_AS(catalog("cotangent-sl5"), std::invalid_argument);
  for (const auto& k : catalog_keys()) CHECK(catalog(k)->name == k);
}

TEST_CASE("dazord structure maps match the closed formulas") {
  auto g = catalog("dazord");
  CounterRng rng(3, 0);
  for (int trial = 0; trial < 20; ++trial) {
    cplx Z1(rng.uniform(-1, 1), rng.uniform(-1, 1)), z1(rng.uniform(-1, 1), rng.uniform(-1, 1));
    cplx Z2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    cplx z2 = std::exp(Z1 * std::conj(z1)) * z1;
    Point pair = real_point({Z1, z1, Z2, z2});
    auto prod = g->product(pair);
    cplx expect = Z1 + std::exp(std::conj(Z1) * z1) * Z2;
    CHECK(std::abs(Z_of(prod, 0) - expect) < 1e-13);
    CHECK(std::abs(Z_of(prod, 1) - z1) < 1e-13);
    auto t = g->t(real_point({Z1, z1}));
    CHECK(std::abs(cplx(t[0].real(), t[1].real()) - z2) < 1e-13);
  }
  // over z = 0 the product adds the Z coordinates
  auto prod = g->product(real_point({cplx(0.3, -0.2), 0.0, cplx(-1.1, 0.5), 0.0}));
  CHECK(std::abs(Z_of(prod, 0) - cplx(-0.8, 0.3)) < 1e-15);
  CHECK(std::abs(Z_of(prod, 1)) == 0.0);
}

TEST_CASE("cotangent target is conjugation by the inverse") {
  auto g = catalog("cotangent-sl2");
  // g = exp(e) = [[1,1],[0,1]], u = h
  Point p = {1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, -1.0};
  QMatrix ge = QMatrix::identity(2) + QMatrix::unit(2, 0, 1);
  QMatrix gi = QMatrix::identity(2) - QMatrix::unit(2, 0, 1);
  QMatrix h = QMatrix::unit(2, 0, 0) - QMatrix::unit(2, 1, 1);
  QMatrix expect = gi * h * ge;
  CHECK(expect(0, 1) == Rational(2));
  auto t = g->t(p);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(t[static_cast<std::size_t>(2 * i + j)] - expect(i, j).to_double()) < 1e-14);
}

TEST_CASE("groupoid axioms hold for every catalog entry") {
  for (const auto& key : catalog_keys()) {
    auto g = catalog(key);
    Report r = verify_axioms(*g, 200, 1e-9, 11);
    CHECK(r.checks.size() == 13);
    require_all_ok(r);
    CHECK(r.find("left_unit_symbolic")->status == Status::Proven);
    CHECK(r.find("source_after_unit_symbolic")->status == Status::Proven);
  }
}

TEST_CASE("corrupted product fails associativity") {
  auto bad = corrupt_product_sign(*catalog("dazord"));
  Report r = verify_axioms(*bad, 100, 1e-9, 2);
  const auto* assoc = r.find("associativity");
  REQUIRE(assoc);
  CHECK(assoc->status == Status::Fail);
  CHECK(assoc->max_residual > 1e-3);
  CHECK(!assoc->witnesses.empty());
}

TEST_CASE("dazord form is closed and nondegenerate") {
  auto g = catalog("dazord");
  Report r = verify_symplectic(*g, 300, 5);
  CHECK(r.find("d_omega_zero")->status == Status::Proven);
  CHECK(r.find("omega_nondegenerate")->ok());
  // the determinant of the coefficient matrix is identically 1
  CounterRng rng(9, 1);
  for (int k = 0; k < 10; ++k) {
    Point p = g->sample_arrow(rng);
    CHECK(std::abs(evaluate(*g->omega, p).matrix().determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("verbatim complex form of the Dazord groupoid is not real") {
  VerbatimForm v = dazord_verbatim_omega();
  CounterRng rng(4, 0);
  Point p = catalog("dazord")->sample_arrow(rng);
  CHECK(evaluate(v.imag_part, p).max_abs() > 1e-3);
  // its imaginary part is 2|Z|^2 dx^dy - 2|z|^2 dX^dY
  Expr im_dxdy = v.imag_part.get({2, 3});
  double Zsq = std::norm(cplx(p[0].real(), p[1].real()));
  CHECK(std::abs(eval(im_dxdy, p) - 2.0 * Zsq) < 1e-12);
}

TEST_CASE("pushforward identities") {
  auto dz = catalog("dazord");
  Report r = pushforward_check(*dz, *dz->base_pi, 300, 1e-8, 7);
  require_all_ok(r);

  for (int n : {2, 3}) {
    auto ct = catalog("cotangent-sl" + std::to_string(n));
    Report rc = pushforward_check(*ct, *ct->base_pi, 100, 1e-8, 7);
    require_all_ok(rc);
  }
  auto conj = catalog("conjugation-sl2");
  CHECK_THROWS_AS(pushforward_check(*conj, *conj->base_pi, 10, 1e-8), std::invalid_argument);
}

TEST_CASE("cotangent base structure is the Lie-Poisson bracket of structure constants") {
  // Oracle: {f_X, f_Y}(u) = -K([X,Y], u) with f_X(u) = K(X, u), from the
  // structure constants of sl_n and the Killing matrix.
  for (int n : {2, 3}) {
    auto g = catalog("cotangent-sl" + std::to_string(n));
    LieAlgebraSL L(n);
    CounterRng rng(21, static_cast<std::uint64_t>(n));
    Point gamma = g->sample_arrow(rng);
    Point u = g->s(gamma);
    MultivectorValue pushed = g->poisson()(gamma).push(g->s.jacobian_at(gamma));
    Mat um = unflatten(u, n);
    const int d = L.dim();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        auto df = [&](int b) {
          Vec c(n * n);
          Mat x = L.basis()[static_cast<std::size_t>(b)].to_complex();
          for (int r = 0; r < n; ++r)
            for (int s = 0; s < n; ++s) c(r * n + s) = 2.0 * n * x(s, r);
          return c;
        };
        cplx lhs = pushed.contract({df(i), df(j)});
        cplx rhs = 0;
        for (int k = 0; k < d; ++k) {
          double ck = L.c(i, j, k).to_double();
          if (ck == 0) continue;
          rhs += ck * 2.0 * n * (L.basis()[static_cast<std::size_t>(k)].to_complex() * um).trace();
        }
        CHECK(std::abs(lhs + rhs) < 1e-9);
      }
  }
}

TEST_CASE("multiplicativity of the Dazord bivector") {
  auto g = catalog("dazord");
  Report r = verify_multiplicativity(*g, g->poisson(), 2, 200, 1e-8, 3);
  require_all_ok(r);

  MultiVectorField bad = MultiVectorField::zero(g->total, 2);
  bad.set({0, 2}, Expr(1));
  Report rb = verify_multiplicativity(*g, pointwise(bad), 2, 50, 1e-8, 3);
  CHECK(!rb.ok());
}

TEST_CASE("multiplicativity of the cotangent bivector") {
  auto g = catalog("cotangent-sl2");
  Report r = verify_multiplicativity(*g, g->poisson(), 2, 100, 1e-8, 3);
  require_all_ok(r);
}

TEST_CASE("right-invariant lifts") {
  for (const char* key : {"dazord", "cotangent-sl2"}) {
    auto g = catalog(key);
    Report r = verify_lifts(*g, 100, 1e-8, 13);
    require_all_ok(r);
  }
}

TEST_CASE("cotangent lift of a constant section pushes to the adjoint action") {
  auto g = catalog("cotangent-sl2");
  const auto& B = *g->base;
  // section m -> (e, [e, u]) in ker dt at the unit (I, u)
  ExprMatrix U = matrix_of_vars(B.vars, 0, 2);
  ExprMatrix E = to_expr(QMatrix::unit(2, 0, 1));
  std::vector<Expr> comps = flatten(E);
  for (auto& c : flatten(expr_commutator(E, U))) comps.push_back(c);
  ChartMap section(g->base, g->total, comps);
  CounterRng rng(5, 5);
  for (int k = 0; k < 10; ++k) {
    Point gamma = g->sample_arrow(rng);
    auto x = right_invariant_lift(*g, section, gamma);
    Mat gm = unflatten(Point(gamma.begin(), gamma.begin() + 4), 2);
    Mat um = unflatten(Point(gamma.begin() + 4, gamma.end()), 2);
    Mat e = mat2(0, 1, 0, 0);
    // g-block moves by e g, u-block by [e, u]
    Mat dg = unflatten(x, 2), du = unflatten(x, 2, 4);
    CHECK(max_abs(dg - e * gm) < 1e-12);
    CHECK(max_abs(du - (e * um - um * e)) < 1e-12);
    Vec pushed = g->s.jacobian_at(gamma) * to_vec(x);
    CHECK(max_abs(pushed - to_vec(flatten(Mat(e * um - um * e)))) < 1e-12);
    // t is invariant along right-invariant fields
    CHECK(max_abs(g->t.jacobian_at(gamma) * to_vec(x)) < 1e-12);
  }
  // at units the lift is the section itself
  Point m = {0.3, -0.1, 0.7, -0.3};
  Point u = g->unit(m);
  auto x = right_invariant_lift(*g, section, u);
  CHECK(max_abs(to_vec(x) - to_vec(section(m))) < 1e-14);

  ChartMap not_in_kernel(g->base, g->total, std::vector<Expr>(8, Expr(1)));
  CHECK_THROWS_AS(right_invariant_lift(*g, not_in_kernel, u), std::invalid_argument);
}

TEST_CASE("exact multiplicative bivectors") {
  auto g = catalog("cotangent-sl2");
  MultiVectorField zero = exact_multiplicative(*g, {});
  CHECK(zero.coeff.empty());

  const auto& B = *g->base;
  ExprMatrix U = matrix_of_vars(B.vars, 0, 2);
  auto section = [&](const QMatrix& q) {
    ExprMatrix X = to_expr(q);
    std::vector<Expr> comps = flatten(X);
    for (auto& c : flatten(expr_commutator(X, U))) comps.push_back(c);
    return ChartMap(g->base, g->total, comps);
  };
  std::vector<BisectionPair> lambda = {{section(QMatrix::unit(2, 0, 1)), section(QMatrix::unit(2, 1, 0))}};
  MultiVectorField field = exact_multiplicative(*g, lambda);
  PointwiseField pf = pointwise(field);
  CounterRng rng(8, 0);
  for (int k = 0; k < 20; ++k) {
    Point gamma = g->sample_arrow(rng);
    MultivectorValue pushed = pf(gamma).push(g->s.jacobian_at(gamma));
    MultivectorValue rho = anchor_image(*g, lambda, g->s(gamma));
    // rho(e ^ f) = [e,u] ^ [f,u], computed directly
    Mat um = unflatten(g->s(gamma), 2);
    Mat e = mat2(0, 1, 0, 0), f = mat2(0, 0, 1, 0);
    Vec a = to_vec(flatten(Mat(e * um - um * e))), b = to_vec(flatten(Mat(f * um - um * f)));
    MultivectorValue direct = MultivectorValue::from_matrix(a * b.transpose() - b * a.transpose());
    Mat gap = pushed.matrix() - direct.matrix();
    CHECK(max_abs(gap) < 1e-8);
    CHECK(max_abs(rho.matrix() - direct.matrix()) < 1e-12);
  }
  Report r = verify_multiplicativity(*g, pf, 2, 100, 1e-8, 4);
  require_all_ok(r);

  // Dazord: ker dt at the unit over z is spanned by (1, 0, -|z|^2, 0) and (0, 1, 0, -|z|^2)
  auto dz = catalog("dazord");
  const auto& DB = *dz->base;
  Expr r2 = DB.coord(0) * DB.coord(0) + DB.coord(1) * DB.coord(1);
  ChartMap v1(dz->base, dz->total, {Expr(1), Expr(0), -r2, Expr(0)});
  ChartMap v2(dz->base, dz->total, {Expr(0), Expr(1), Expr(0), -r2});
  MultiVectorField dl = exact_multiplicative(*dz, {{v1, v2}});
  Report rd = verify_multiplicativity(*dz, pointwise(dl), 2, 100, 1e-8, 4);
  require_all_ok(rd);
}

TEST_CASE("Evens-Lu base bivector") {
  MultiVectorField pi = evens_lu_bivector(2);
  CHECK(pi.chart->dim() == 4);
  // vanishes at the identity
  CHECK(evaluate(pi, {1.0, 0.0, 0.0, 1.0}).max_abs() < 1e-12);
  // Poisson on sampled SL2 points
  MultiVectorField sq = schouten(pi, pi);
  PointwiseField sv = pointwise(sq);
  CounterRng rng(6, 0);
  double worst = 0;
  for (int k = 0; k < 200; ++k) worst = std::max(worst, sv(flatten(random_sl(2, rng))).max_abs());
  CHECK(worst < 1e-9);
  // tangent to SL2: d det (pi^#(alpha)) = 0
  for (int k = 0; k < 20; ++k) {
    Point h = flatten(random_sl(2, rng));
    std::vector<cplx> alpha = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    auto v = sharp(pi, alpha, h);
    cplx ddet = h[3] * v[0] + h[0] * v[3] - h[2] * v[1] - h[1] * v[2];
    CHECK(std::abs(ddet) < 1e-12);
  }
  // tU with t = diag(tau, 1/tau) is coisotropic
  for (Rational tau : {Rational(2), Rational(-3, 2), Rational(1, 3)}) {
    const auto& B = *pi.chart;
    Submanifold L = cut_out(pi.chart, {B.coord(0) - Expr(tau), B.coord(2), B.coord(3) - Expr(Rational(1) / tau)}, 1);
    CheckRecord c = is_coisotropic(pi, L, 200, 1e-9, 3);
    INFO("tau " << tau.to_string() << " residual " << c.max_residual);
    CHECK(c.ok());
  }
  MultiVectorField pi3 = evens_lu_bivector(3);
  CHECK(evaluate(pi3, flatten(Mat(Mat::Identity(3, 3)))).max_abs() < 1e-12);
  CHECK_THROWS_AS(evens_lu_bivector(4), std::invalid_argument);
}
