#include <cmath>

#include "doctest.h"
#include "pforge/rng.hpp"
#include "pforge/symexpr.hpp"

using namespace pforge;

namespace {

VarTable xy() { return VarTable{{"x", VarKind::Real}, {"y", VarKind::Real}}; }
VarTable zz() { return VarTable{{"Z", VarKind::Complex}, {"z", VarKind::Complex}}; }

bool proven_zero(const Expr& e) { return is_zero(e).status == ZeroStatus::ProvenZero; }

// Random expression over real x, y built from every node kind that stays finite
// on [-1, 1]^2 (reciprocals are shifted away from zero).
Expr random_expr(CounterRng& rng, const VarTable& v, int depth) {
  Expr x = var(v, 0), y = var(v, 1);
  if (depth == 0) {
    switch (rng.integer(0, 3)) {
      case 0: return x;
      case 1: return y;
      case 2: return Expr(Rational(rng.integer(-5, 5), rng.integer(1, 4)));
      default: return x * y;
    }
  }
  Expr a = random_expr(rng, v, depth - 1);
  Expr b = random_expr(rng, v, depth - 1);
  switch (rng.integer(0, 8)) {
    case 0: return a + b;
    case 1: return a * b;
    case 2: return a - b;
    case 3: return Expr::pow(a, rng.integer(2, 3));
    case 4: return Expr::exp(Expr(Rational(1, 3)) * a);
    case 5: return Expr::sin(a);
    case 6: return Expr::cos(b);
    case 7: return a / (Expr(3) + Expr::pow(b, 2));
    default: return -a * b;
  }
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  VarTable v = xy();
  Expr e = parse("x^2 + y^2", v);
  CHECK(e.kind() == Kind::Add);
  REQUIRE(e.kids().size() == 2);
  CHECK(e.kids()[0].kind() == Kind::Pow);
  CHECK(e.kids()[0].exponent() == 2);
  CHECK(e.kids()[0].kids()[0].var_name() == "x");

  VarTable c = zz();
  Expr t = parse("exp(Z*conj(z))*z", c);
  CHECK(t.kind() == Kind::Mul);
  CHECK(t.kids()[0].kind() == Kind::Exp);
  CHECK(std::abs(eval(t, {cplx(0, 0), cplx(1, 0)}) - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(eval(t, {cplx(0.3, -0.2), cplx(0.5, 0.7)}) -
                 std::exp(cplx(0.3, -0.2) * std::conj(cplx(0.5, 0.7))) * cplx(0.5, 0.7)) < 1e-14);
}

TEST_CASE("parse errors carry offsets") {
  VarTable v = xy();
  CHECK_THROWS_AS(parse("conj(x)", v), ParseError);
  try {
    parse("x + w", v);
    FAIL("expected unknown variable");
  } catch (const ParseError& e) {
    CHECK(e.offset == 4);
  }
  try {
    parse("x + * y", v);
    FAIL("expected syntax error");
  } catch (const ParseError& e) {
    CHECK(e.offset == 4);
  }
  CHECK_THROWS_AS(parse("x^y", v), ParseError);
  CHECK_THROWS_AS(parse("foo(x)", v), ParseError);
  CHECK_THROWS_AS(parse("(x + y", v), ParseError);
  CHECK_THROWS_AS(parse("x/0", v), ParseError);
}

TEST_CASE("rational and decimal literals stay exact") {
  VarTable v = xy();
  Expr e = parse("3/4 + 0.25", v);
  REQUIRE(e.is_const());
  CHECK(e.value() == GaussRat(1));
  Expr g = parse("(1 + 2*i)*(1 - 2*i)", v);
  REQUIRE(g.is_const());
  CHECK(g.value() == GaussRat(5));
}

TEST_CASE("diff examples") {
  VarTable v = xy();
  Expr x = var(v, "x");
  CHECK(proven_zero(diff(parse("x^2 + y^2", v), 0) - 2 * x));

  VarTable c = zz();
  Expr z = var(c, "z");
  Expr zzbar = z * conj(z);
  CHECK(proven_zero(diff(zzbar, 1) - conj(z)));
  CHECK(proven_zero(diff(zzbar, 1, true) - z));
  CHECK(proven_zero(diff(conj(z), 1)));

  VarTable ab{{"a", VarKind::Real}, {"b", VarKind::Real}};
  Expr a = var(ab, "a"), b = var(ab, "b");
  Expr f = b * Expr::cos(a * b);
  CHECK(proven_zero(diff(f, 0) + Expr::pow(b, 2) * Expr::sin(a * b)));
}

TEST_CASE("Wirtinger derivatives of re and im") {
  VarTable c = zz();
  Expr z = var(c, "z");
  // re(z) = (z + conj z)/2 so d/dz re(z) = 1/2, d/dz im(z) = -i/2
  CHECK(proven_zero(diff(Expr::re(z), 1) - Expr(Rational(1, 2))));
  CHECK(proven_zero(diff(Expr::im(z), 1) - Expr(GaussRat(0, Rational(-1, 2)))));
  Expr f = Expr::re(Expr::exp(z * z));
  Expr expected = Expr(Rational(1, 2)) * 2 * z * Expr::exp(z * z);
  CHECK(proven_zero(diff(f, 1) - expected));
}

TEST_CASE("eval examples and division by zero") {
  VarTable v = xy();
  CHECK(eval(parse("x^2 + y^2", v), {3.0, 4.0}) == cplx(25, 0));
  try {
    eval(parse("1/x", v), {0.0, 1.0});
    FAIL("expected division by zero");
  } catch (const EvalError& e) {
    CHECK(e.subtree == "1/x");
  }
}

TEST_CASE("is_zero examples") {
  VarTable v = xy();
  Expr x = var(v, "x");
  CHECK(is_zero(x - x).status == ZeroStatus::ProvenZero);

  VarTable k{{"x", VarKind::Complex}, {"y", VarKind::Complex}, {"z", VarKind::Complex}};
  Expr X = var(k, "x"), Z = var(k, "z");
  for (int l = 2; l <= 5; ++l) {
    Expr lz = Expr(l) * Expr::pow(Z, l - 1);
    CHECK(is_zero(X * lz - lz * X).status == ZeroStatus::ProvenZero);
  }

  ZeroResult s = is_zero(Expr::sin(x));
  CHECK(s.status == ZeroStatus::ProvenNonzero);
  CHECK(s.witness_abs > 1e-8);
  REQUIRE(s.witness.size() == 1);
  CHECK(std::abs(std::sin(s.witness[0].second.real())) == doctest::Approx(s.witness_abs));
}

TEST_CASE("normal form identities") {
  VarTable v = xy();
  Expr x = var(v, 0), y = var(v, 1);
  CHECK(proven_zero(Expr::pow(Expr::sin(x), 2) + Expr::pow(Expr::cos(x), 2) - 1));
  CHECK(proven_zero(Expr::exp(x) * Expr::exp(y) - Expr::exp(x + y)));
  CHECK(proven_zero(Expr::exp(x) * Expr::exp(-x) - 1));
  CHECK(proven_zero(Expr::sin(-x) + Expr::sin(x)));
  CHECK(proven_zero(x / x - 1));
  CHECK(proven_zero(Expr::recip(Expr::recip(x + y)) - x - y));
  CHECK(proven_zero((x * x + x * y) / x - x - y));
  CHECK(proven_zero(Expr::pow(x + y, 3) - (x * x * x + 3 * x * x * y + 3 * x * y * y + y * y * y)));
  // not an identity
  CHECK(is_zero(Expr::pow(x + y, 2) - x * x - y * y).status == ZeroStatus::ProvenNonzero);

  VarTable c = zz();
  Expr z = var(c, "z");
  CHECK(proven_zero(Expr::re(z) * 2 - z - conj(z)));
  CHECK(proven_zero(conj(Expr::exp(z)) - Expr::exp(conj(z))));
}

TEST_CASE("to_real splits complex formulas") {
  VarTable c = zz();
  Realification r = realify(c);
  CHECK(r.real.size() == 4);
  CHECK(r.real[0].name == "Z_re");
  Expr t = parse("exp(Z*conj(z))*z", c);
  auto [re, im] = to_real(t, r);
  CounterRng rng(7, 0);
  for (int s = 0; s < 20; ++s) {
    cplx Z(rng.uniform(-1, 1), rng.uniform(-1, 1)), z(rng.uniform(-1, 1), rng.uniform(-1, 1));
    cplx direct = eval(t, {Z, z});
    Point rp = realify_point({Z, z}, c);
    CHECK(std::abs(eval(re, rp) - direct.real()) < 1e-13);
    CHECK(std::abs(eval(im, rp) - direct.imag()) < 1e-13);
  }
  // sin, cos and reciprocal of a complex argument
  Expr g = Expr::sin(var(c, 0)) / (Expr(2) + Expr::cos(var(c, 1)));
  auto [gr, gi] = to_real(g, r);
  cplx Z(0.4, -0.3), z(-0.2, 0.9);
  cplx direct = eval(g, {Z, z});
  Point rp = realify_point({Z, z}, c);
  CHECK(std::abs(eval(gr, rp) - direct.real()) < 1e-13);
  CHECK(std::abs(eval(gi, rp) - direct.imag()) < 1e-13);
}

TEST_CASE("printer output parses back to the same normal form") {
  VarTable v = xy();
  for (std::uint64_t s = 0; s < 200; ++s) {
    CounterRng rng(11, s);
    Expr e = random_expr(rng, v, 3);
    std::string text = print(e);
    Expr back = parse(text, v);
    CHECK_MESSAGE(print(back) == text, text);
    CHECK(is_zero(back - e).status != ZeroStatus::ProvenNonzero);
  }
  VarTable c = zz();
  for (const char* s : {"exp(Z*conj(z))*z", "-(1 + 2*i)*Z/z^(-2)", "re(Z)*im(z) - 3/4", "1/(Z + conj(Z))"}) {
    Expr e = parse(s, c);
    CHECK(print(parse(print(e), c)) == print(e));
  }
}

TEST_CASE("symbolic derivatives agree with central differences") {
  VarTable v = xy();
  int checked = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    CounterRng rng(23, s);
    Expr e = random_expr(rng, v, 3);
    for (int k = 0; k < 2; ++k) {
      Expr d = diff(e, k);
      Point p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      double h = 1e-5;
      Point pp = p, pm = p;
      pp[static_cast<std::size_t>(k)] += h;
      pm[static_cast<std::size_t>(k)] -= h;
      cplx fd = (eval(e, pp) - eval(e, pm)) / (2 * h);
      cplx sym = eval(d, p);
      CHECK(std::abs(fd - sym) <= 1e-6 * std::max(1.0, std::abs(sym)));
      ++checked;
    }
  }
  CHECK(checked == 200);
}

TEST_CASE("is_zero never proves zero when a sample witness exists") {
  VarTable v = xy();
  for (std::uint64_t s = 0; s < 100; ++s) {
    CounterRng rng(31, s);
    Expr a = random_expr(rng, v, 2);
    Expr b = random_expr(rng, v, 2);
    Expr e = a - b;
    ZeroResult r = is_zero(e);
    if (r.status != ZeroStatus::ProvenZero) continue;
    for (int t = 0; t < 10; ++t) {
      Point p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      CHECK(std::abs(eval(e, p)) <= 1e-8);
    }
  }
}

TEST_CASE("substitute and conj") {
  VarTable v = xy();
  Expr x = var(v, 0), y = var(v, 1);
  Expr e = x * x + y;
  Expr s = substitute(e, {y + 1, Expr(2)});
  CHECK(proven_zero(s - (y * y + 2 * y + 3)));

  VarTable c = zz();
  Expr Z = var(c, 0), z = var(c, 1);
  Expr f = Z * conj(z);
  Expr g = substitute(f, {z, Expr::imag_unit() * Z});
  // conj(i Z) = -i conj(Z)
  CHECK(proven_zero(g - z * Expr(GaussRat(0, -1)) * conj(Z)));
}
