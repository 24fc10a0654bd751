#include <cmath>

#include "doctest.h"
#include "pforge/rng.hpp"
#include "pforge/tensorfield.hpp"

using namespace pforge;

namespace {

bool proven_zero(const Expr& e) { return is_zero(e).status == ZeroStatus::ProvenZero; }

bool field_zero(const MultiVectorField& f) {
  for (const auto& [i, c] : f.coeff)
    if (!proven_zero(c)) return false;
  return true;
}

MultiVectorField kappa_bivector(const ChartPtr& c) {
  Expr x = c->coord(0), y = c->coord(1);
  auto pi = MultiVectorField::zero(c, 2);
  pi.set({0, 1}, x * x + y * y);
  return pi;
}

// Bracket on C^3 whose Casimir is chi_l = xy - z^l.
MultiVectorField kleinian_bivector(const ChartPtr& c, int l) {
  Expr x = c->coord(0), y = c->coord(1), z = c->coord(2);
  auto pi = MultiVectorField::zero(c, 2);
  pi.set({0, 1}, Expr(-l) * Expr::pow(z, l - 1));  // {x,y} = d chi / dz
  pi.set({1, 2}, y);                               // {y,z} = d chi / dx
  pi.set({2, 0}, x);                               // {z,x} = d chi / dy
  return pi;
}

ChartPtr c3() {
  return make_chart("C3", VarTable{{"x", VarKind::Complex}, {"y", VarKind::Complex}, {"z", VarKind::Complex}});
}

Expr random_poly(CounterRng& rng, const ChartPtr& c) {
  std::vector<Expr> terms{Expr(rng.integer(-3, 3))};
  for (int i = 0; i < c->dim(); ++i) {
    terms.push_back(Expr(rng.integer(-3, 3)) * c->coord(i));
    for (int j = i; j < c->dim(); ++j) terms.push_back(Expr(rng.integer(-2, 2)) * c->coord(i) * c->coord(j));
  }
  return Expr::add(terms);
}

MultiVectorField random_field(CounterRng& rng, const ChartPtr& c, int degree) {
  auto f = MultiVectorField::zero(c, degree);
  MultiIndex idx;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(idx.size()) == degree) {
      f.set(idx, random_poly(rng, c));
      return;
    }
    for (int i = start; i < c->dim(); ++i) {
      idx.push_back(i);
      rec(i + 1);
      idx.pop_back();
    }
  };
  rec(0);
  return f;
}

}  // namespace

TEST_CASE("schouten basics") {
  auto c = real_chart("R2", {"x", "y"});
  Expr x = c->coord(0);
  auto pi = kappa_bivector(c);
  CHECK(field_zero(schouten(pi, pi)));

  auto dx = MultiVectorField::zero(c, 1);
  dx.set({0}, Expr(1));
  auto f = MultiVectorField::function(c, x * x);
  auto r = schouten(dx, f);
  CHECK(r.degree == 0);
  CHECK(proven_zero(r.get({}) - Expr(2) * x));
  // graded antisymmetry with p = 1, q = 0
  CHECK(proven_zero(schouten(f, dx).get({}) + Expr(2) * x));

  auto d = MultiVectorField::zero(c, 2);
  CHECK_THROWS_AS(schouten(pi, MultiVectorField::zero(real_chart("other", {"u"}), 1)), std::invalid_argument);
  (void)d;
}

TEST_CASE("schouten of the C3 bracket vanishes for several l") {
  auto c = c3();
  for (int l = 2; l <= 5; ++l) CHECK(field_zero(schouten(kleinian_bivector(c, l), kleinian_bivector(c, l))));
}

TEST_CASE("graded Jacobi on random polynomial multivectors") {
  auto c = real_chart("R3", {"u", "v", "w"});
  CounterRng rng(2024, 0);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    int p = rng.integer(0, 2), q = rng.integer(0, 2), r = rng.integer(0, 2);
    auto P = random_field(rng, c, p), Q = random_field(rng, c, q), R = random_field(rng, c, r);
    if (p + q + r == 0) continue;
    auto lhs = schouten(P, schouten(Q, R));
    auto rhs = schouten(schouten(P, Q), R);
    auto other = schouten(Q, schouten(P, R));
    int e = (p - 1) * (q - 1);
    auto diffr = lhs - rhs - (e % 2 ? Expr(-1) : Expr(1)) * other;
    CHECK_MESSAGE(field_zero(diffr), "degrees " << p << q << r);
    ++checked;
  }
  CHECK(checked > 40);
}

TEST_CASE("apply") {
  auto c = real_chart("R2", {"x", "y"});
  Expr x = c->coord(0), y = c->coord(1);
  auto pi = kappa_bivector(c);
  CHECK(proven_zero(apply(pi, {x, y}) - (x * x + y * y)));
  Expr f = Expr::sin(x * y) + x;
  CHECK(proven_zero(apply(pi, {f, f})));
  CHECK_THROWS_AS(apply(pi, {x}), std::invalid_argument);

  auto k = c3();
  Expr chi = k->coord(0) * k->coord(1) - Expr::pow(k->coord(2), 3);
  for (int i = 0; i < 3; ++i) CHECK(proven_zero(apply(kleinian_bivector(k, 3), {chi, k->coord(i)})));

  // multilinear and alternating on swaps
  Expr g = x * x * y, h = Expr::exp(y);
  CHECK(proven_zero(apply(pi, {g, h}) + apply(pi, {h, g})));
  CHECK(proven_zero(apply(pi, {g + h, x}) - apply(pi, {g, x}) - apply(pi, {h, x})));
}

TEST_CASE("sharp follows pi(alpha, .)") {
  auto c = real_chart("ab", {"a", "b"});
  auto pi = MultiVectorField::zero(c, 2);
  pi.set({0, 1}, Expr(1));
  auto v = sharp(pi, {0.0, 1.0}, {0.3, 0.4});
  CHECK(v[0].real() == doctest::Approx(-1.0));
  CHECK(std::abs(v[1]) == 0.0);

  auto k = real_chart("R2", {"x", "y"});
  auto w = sharp(kappa_bivector(k), {1.0, 0.0}, {1.0, 0.0});
  CHECK(std::abs(w[0]) == 0.0);
  CHECK(w[1].real() == doctest::Approx(1.0));
  CHECK_THROWS_AS(sharp(kappa_bivector(k), {1.0}, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("exterior derivative and pullback") {
  auto c = real_chart("xy", {"x", "y"});
  Expr x = c->coord(0), y = c->coord(1);
  auto w = DifferentialForm::zero(c, 1);
  w.set({1}, x);
  auto dw = exterior_derivative(w);
  CHECK(dw.degree == 2);
  CHECK(proven_zero(dw.get({0, 1}) - Expr(1)));

  auto ab = real_chart("ab", {"a", "b"});
  auto area = DifferentialForm::zero(ab, 2);
  area.set({0, 1}, Expr(1));
  CHECK(exterior_derivative(area).coeff.empty());

  auto r3 = real_chart("R3", {"u", "v", "w"});
  CounterRng rng(5, 0);
  for (int t = 0; t < 5; ++t) {
    auto f = DifferentialForm::zero(r3, 1);
    for (int i = 0; i < 3; ++i) f.set({i}, Expr::exp(random_poly(rng, r3)) + random_poly(rng, r3));
    auto ddf = exterior_derivative(exterior_derivative(f));
    for (const auto& [i, e] : ddf.coeff) CHECK(proven_zero(e));
  }

  // polar coordinates pull dx^dy back to r dr^dth
  auto polar = real_chart("polar", {"r", "th"});
  Expr r = polar->coord(0), th = polar->coord(1);
  ChartMap f(polar, c, {r * Expr::cos(th), r * Expr::sin(th)});
  auto dxdy = DifferentialForm::zero(c, 2);
  dxdy.set({0, 1}, Expr(1));
  CHECK(proven_zero(pullback(dxdy, f).get({0, 1}) - r));
  // d commutes with pullback
  auto lhs = pullback(exterior_derivative(w), f);
  auto rhs = exterior_derivative(pullback(w, f));
  CHECK(proven_zero(lhs.get({0, 1}) - rhs.get({0, 1})));
}

TEST_CASE("realify_form of a Wirtinger form") {
  auto c = make_chart("C", VarTable{{"z", VarKind::Complex}});
  auto rc = realified_chart(c);
  REQUIRE(rc->dim() == 2);
  // (i/2) dz ^ dconj(z) = dx ^ dy
  std::map<MultiIndex, Expr> w{{{0, 1}, Expr(GaussRat(Rational(0), Rational(1, 2)))}};
  DifferentialForm im;
  auto re = realify_form(c, 2, w, rc, &im);
  CHECK(proven_zero(re.get({0, 1}) - Expr(1)));
  CHECK(im.coeff.empty());
  // dz ^ dconj(z) alone is purely imaginary
  re = realify_form(c, 2, {{{0, 1}, Expr(1)}}, rc, &im);
  CHECK(re.coeff.empty());
  CHECK(proven_zero(im.get({0, 1}) + Expr(2)));
}

TEST_CASE("invert_form") {
  auto c = real_chart("ab", {"a", "b"});
  auto w = DifferentialForm::zero(c, 2);
  w.set({0, 1}, Expr(1));
  auto pi = invert_form_at(w, {0.0, 0.0});
  CHECK(pi.coeff.at({0, 1}).real() == doctest::Approx(1.0));

  auto r4 = real_chart("R4", {"x", "y", "u", "v"});
  auto deg = DifferentialForm::zero(r4, 2);
  deg.set({0, 1}, Expr(1));
  CHECK_THROWS_AS(invert_form_at(deg, {0.1, 0.2, 0.3, 0.4}), SingularFormError);
  try {
    invert_form_at(deg, {0.1, 0.2, 0.3, 0.4});
  } catch (const SingularFormError& e) {
    CHECK(e.condition > 1e12);
  }

  // invert twice recovers the form
  CounterRng rng(11, 0);
  for (int t = 0; t < 10; ++t) {
    Mat a = Mat::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        a(i, j) = rng.uniform(-1, 1);
        a(j, i) = -a(i, j);
      }
    auto form = MultivectorValue::from_matrix(a);
    auto inv = invert_form_value(form);
    Mat prod = inv.matrix() * form.matrix();
    CHECK(max_abs(prod + Mat::Identity(4, 4)) < 1e-9 * condition_number(a));
    auto back = invert_form_value(inv);
    CHECK(max_abs(back.matrix() - a) < 1e-9 * condition_number(a));
  }
}

TEST_CASE("pushforward of a value") {
  MultivectorValue v;
  v.dim = 2;
  v.degree = 2;
  v.coeff[{0, 1}] = 2.0;
  Mat j(1, 2);
  j << 1.0, 3.0;
  CHECK(v.push(j).coeff.empty());
  Mat j2(2, 2);
  j2 << 1.0, 1.0, 0.0, 2.0;
  CHECK(v.push(j2).coeff.at({0, 1}).real() == doctest::Approx(4.0));  // det = 2
}

TEST_CASE("tangency") {
  auto c = real_chart("R2", {"x", "y"});
  Expr x = c->coord(0);
  auto pi = kappa_bivector(c);
  auto line = cut_out(c, {x}, 1);
  auto rep = is_tangent(pi, line, 30, 1e-10, 3);
  CHECK(rep.status == Status::Fail);
  CHECK(rep.witnesses.size() <= 3);
  CHECK(!rep.witnesses.empty());

  auto full = cut_out(c, {}, 2);
  CHECK(is_tangent(pi, full, 10, 1e-10).status == Status::Pass);

  auto k = c3();
  Expr chi = k->coord(0) * k->coord(1) - Expr::pow(k->coord(2), 3);
  auto w3 = cut_out(k, {chi}, 4);
  auto kr = is_tangent(kleinian_bivector(k, 3), w3, 30, 1e-10, 4);
  CHECK(kr.status == Status::Pass);
  CHECK(kr.samples_used == 30);
}

TEST_CASE("coisotropy") {
  auto c = real_chart("R2", {"x", "y"});
  Expr y = c->coord(1);
  auto axis = cut_out(c, {y}, 1);
  CHECK(is_coisotropic(kappa_bivector(c), axis, 20, 1e-10).status == Status::Pass);

  auto ab = real_chart("ab", {"a", "b"});
  auto pab = MultiVectorField::zero(ab, 2);
  pab.set({0, 1}, Expr(1));
  CHECK(is_coisotropic(pab, cut_out(ab, {ab->coord(0)}, 1), 20, 1e-10).status == Status::Pass);
  // a point is not coisotropic for a nondegenerate bracket
  CHECK(is_coisotropic(pab, cut_out(ab, {ab->coord(0), ab->coord(1)}, 0), 5, 1e-10).status == Status::Fail);

  auto k = c3();
  Expr x = k->coord(0), yy = k->coord(1), z = k->coord(2);
  for (int l = 2; l <= 4; ++l)
    for (int kk = 1; kk < l; ++kk) {
      auto lk = cut_out(k, {x - Expr::pow(z, kk), yy - Expr::pow(z, l - kk)}, 2);
      auto rep = is_coisotropic(kleinian_bivector(k, l), lk, 20, 1e-10, 9);
      CHECK_MESSAGE(rep.status == Status::Pass, "l=" << l << " k=" << kk << " r=" << rep.max_residual);
    }
}

TEST_CASE("sampling failure is reported") {
  auto c = real_chart("R2", {"x", "y"});
  Expr x = c->coord(0), y = c->coord(1);
  auto empty = cut_out(c, {x * x + y * y + Expr(1)}, 1);
  auto rep = is_coisotropic(kappa_bivector(c), empty, 4, 1e-10);
  CHECK(rep.status == Status::Fail);
  CHECK(rep.notes.find("could not be produced") != std::string::npos);
}

TEST_CASE("reduce_at") {
  auto q = real_chart("Q", {"a", "b", "c", "e"});
  Expr a = q->coord(0), b = q->coord(1), cc = q->coord(2);
  auto pi = MultiVectorField::zero(q, 2);
  pi.set({0, 1}, Expr(1));
  auto p = real_chart("P", {"a", "b"});
  ChartMap proj(q, p, {a, b});
  auto n = cut_out(q, {cc}, 3);
  Point x{0.2, -0.4, 0.0, 0.7};
  auto r = reduce_at(pointwise(pi), 2, n, proj, x, {Vec::Unit(2, 0), Vec::Unit(2, 1)});
  CHECK(r.value.real() == doctest::Approx(1.0));
  CHECK(r.lift_gap < 1e-8);
  auto alt = reduce_at(pointwise(pi), 2, n, proj, x, {Vec::Unit(2, 0), Vec::Unit(2, 1)}, ReductionSign::Alternating);
  CHECK(alt.value.real() == doctest::Approx(-1.0));

  // a non-basic field: the e-direction is a characteristic direction of {c=0}
  auto pi2 = MultiVectorField::zero(q, 2);
  pi2.set({0, 1}, Expr(1) + cc * cc);
  pi2.set({2, 3}, Expr(1));
  pi2.set({0, 2}, cc * b);
  auto r2 = reduce_at(pointwise(pi2), 2, n, proj, x, {Vec::Unit(2, 0), Vec::Unit(2, 1)}, ReductionSign::Feedback, 99);
  CHECK(r2.value.real() == doctest::Approx(1.0));
  CHECK(r2.lift_gap < 1e-8);

  // {x = 0} is not coisotropic for kappa d/dx ^ d/dy
  auto r2c = real_chart("R2", {"x", "y"});
  auto line = cut_out(r2c, {r2c->coord(0)}, 1);
  auto py = real_chart("P1", {"y"});
  ChartMap toy(r2c, py, {r2c->coord(1)});
  CHECK_THROWS_AS(reduce_at(pointwise(kappa_bivector(r2c)), 2, line, toy, {0.0, 0.7}, {Vec::Unit(1, 0), Vec::Unit(1, 0)}),
                  ReductionHypothesisViolated);
}

TEST_CASE("sampled points satisfy generators") {
  auto k = c3();
  Expr chi = k->coord(0) * k->coord(1) - Expr::pow(k->coord(2), 4);
  auto w = cut_out(k, {chi}, 4);
  for (int s = 0; s < 10; ++s) {
    CounterRng rng(77, static_cast<std::uint64_t>(s));
    auto p = sample_on(w, rng);
    REQUIRE(p.has_value());
    CHECK(std::abs(eval(chi, *p)) <= 1e-10);
    auto fr = local_frame(w, *p);
    CHECK(fr.tangent.cols() == 2);
    CHECK(fr.conormal.cols() == 1);
  }
}
