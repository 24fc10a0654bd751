#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pforge/resolution.hpp"

using namespace pforge;

namespace {

constexpr double kPi = std::numbers::pi;

void require_ok(const Report& r, const std::string& name) {
  const CheckRecord* c = r.find(name);
  REQUIRE_MESSAGE(c != nullptr, name);
  INFO(r.target << " / " << name << " residual " << c->max_residual << " notes " << c->notes);
  CHECK(c->ok());
}

void require_all_ok(const Report& r) {
  for (const auto& c : r.checks) require_ok(r, c.name);
}

// (b cos ab, b sin ab) written out directly.
std::pair<double, double> phi_direct(double a, double b) { return {b * std::cos(a * b), b * std::sin(a * b)}; }

Mat block_upper_random(const ParabolicData& p, CounterRng& rng) {
  Mat m = Mat::Zero(p.n, p.n);
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j)
      if (p.block[i] <= p.block[j]) m(i, j) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < p.n; ++i) m(i, i) += 2.0;
  return m;
}

}  // namespace

TEST_CASE("plane family basics") {
  auto at = build_r2(0);
  const auto& phi = at.charts[0].phi;
  for (double b : {-1.5, 0.3, 2.0}) {
    auto m = phi(Point{0.0, b});
    CHECK(std::abs(m[0] - b) < 1e-15);
    CHECK(std::abs(m[1]) < 1e-15);
  }
  for (double a : {-3.0, 0.0, 7.5}) CHECK(std::abs(phi(Point{a, 0.0})[0]) + std::abs(phi(Point{a, 0.0})[1]) == 0.0);
  CHECK_THROWS_AS(build_r2(2), std::invalid_argument);
  CHECK(at.flags.etale);
  CHECK(at.flags.covering);
  CHECK_FALSE(at.flags.full);
  CHECK(build_r2(1).flags.full);
}

TEST_CASE("plane bracket of phi under d/da^d/db is minus b squared") {
  // Central differences on the closed formula; the pushforward of d/da^d/db
  // is -(x^2 + y^2) d/dx^d/dy, hence omega_Z = -da^db.
  CounterRng rng(11, 0);
  for (int k = 0; k < 20; ++k) {
    double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), h = 1e-5;
    auto dx_da = (phi_direct(a + h, b).first - phi_direct(a - h, b).first) / (2 * h);
    auto dx_db = (phi_direct(a, b + h).first - phi_direct(a, b - h).first) / (2 * h);
    auto dy_da = (phi_direct(a + h, b).second - phi_direct(a - h, b).second) / (2 * h);
    auto dy_db = (phi_direct(a, b + h).second - phi_direct(a, b - h).second) / (2 * h);
    CHECK(dx_da * dy_db - dx_db * dy_da == doctest::Approx(-b * b).epsilon(1e-7));
  }
  auto at = build_r2(0);
  CHECK(at.charts[0].omega->get({0, 1}).str() == "-1");
}

TEST_CASE("plane resolutions: covering and full") {
  Report r0 = verify_resolution(build_r2(0), 200, 1e-9, 5);
  for (const char* name : {"image_in_closure", "etale", "pushforward", "pushforward_sampled", "omega_closed",
                           "nondegenerate"})
    require_ok(r0, name);
  CHECK(r0.find("pushforward")->status == Status::Proven);
  const CheckRecord* inj = r0.find("injectivity");
  REQUIRE(inj != nullptr);
  CHECK(inj->status == Status::Fail);
  CHECK_FALSE(inj->witnesses.empty());

  Report r1 = verify_resolution(build_r2(1), 200, 1e-9, 5);
  require_all_ok(r1);
  CHECK(r1.find("pushforward")->status == Status::Proven);
  CHECK(r1.find("deck_n=1_preserves_omega")->status == Status::Proven);
  CHECK(r1.find("deck_n=2_preserves_omega")->status == Status::Proven);
}

TEST_CASE("plane representative") {
  auto r = r2_representative({0.0, 0.0}, 1.0);
  CHECK(std::abs(r.a) < 1e-15);
  CHECK(r.b == doctest::Approx(1.0));

  r = r2_representative({0.0, kPi / 2}, 1.0);
  CHECK(r.a == doctest::Approx(kPi / 2));
  CHECK(r.b == doctest::Approx(1.0));
  auto m = phi_direct(r.a, r.b);
  CHECK(std::abs(m.first) < 1e-12);
  CHECK(m.second == doctest::Approx(1.0));

  CHECK(r2_representative({0.7, 0.0}, -1.3).a == 0.0);

  CounterRng rng(2, 0);
  for (int k = 0; k < 200; ++k) {
    cplx zc(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    double lam = rng.uniform(-2, 2);
    auto q = r2_representative(zc, lam);
    CHECK(q.imag_residual <= 1e-10);
    CHECK(q.target_residual <= 1e-10);
    CHECK(q.product_residual <= 1e-10);
    // t(Zc, lambda) = e^{Zc lambda} lambda, directly
    cplx t = std::exp(zc * lam) * lam;
    auto p = phi_direct(q.a, q.b);
    CHECK(std::abs(t - cplx(p.first, p.second)) < 1e-10);
  }
}

TEST_CASE("plane class relation") {
  CounterRng rng(4, 0);
  for (int k = 0; k < 200; ++k) {
    Point p{rng.uniform(-3, 3), rng.uniform(-2, 2)};
    Point rep = r2_class_representative(p);
    CHECK(rep[1].real() > 0);
    double ab = rep[0].real() * rep[1].real();
    CHECK(ab >= -kPi - 1e-12);
    CHECK(ab < kPi + 1e-12);
    CHECK(r2_class_equal(p, rep, 1e-9));
    Point again = r2_class_representative(rep);
    CHECK(std::abs(again[0] - rep[0]) < 1e-12);
    CHECK(std::abs(again[1] - rep[1]) < 1e-12);
    // explicit orbit elements
    const double a = p[0].real(), b = p[1].real();
    for (int n = -3; n <= 3; ++n) {
      Point q{(n % 2 ? -a : a) + n * kPi / b, (n % 2 ? -b : b)};
      CHECK(r2_class_equal(p, q, 1e-9));
      auto m1 = phi_direct(a, b), m2 = phi_direct(q[0].real(), q[1].real());
      CHECK(std::abs(m1.first - m2.first) + std::abs(m1.second - m2.second) < 1e-9);
    }
    Point off{a + 0.5 / b, b};
    CHECK_FALSE(r2_class_equal(p, off, 1e-9));
  }
  // transitivity on sampled triples
  for (int k = 0; k < 50; ++k) {
    Point p{rng.uniform(-3, 3), rng.uniform(0.2, 2)};
    double b = p[1].real();
    Point q{-p[0].real() + kPi / b, -b};
    Point s{q[0].real() + 2 * kPi / q[1].real(), q[1]};
    CHECK(r2_class_equal(p, q, 1e-9));
    CHECK(r2_class_equal(q, s, 1e-9));
    CHECK(r2_class_equal(p, s, 1e-9));
  }
  CHECK(r2_class_equal(Point{1.0, 0.0}, Point{1.0, 0.0}, 1e-9));
  CHECK_FALSE(r2_class_equal(Point{1.0, 0.0}, Point{2.0, 0.0}, 1e-9));
}

TEST_CASE("plane fibers") {
  auto at0 = build_r2(0), at1 = build_r2(1);
  auto pts = fiber_enumerate(at0, Point{1.0, 0.0}, 5);
  REQUIRE(pts.size() == 5);
  for (int n = 0; n < 5; ++n) {
    CHECK(pts[n][0].real() == doctest::Approx(2 * kPi * n));
    CHECK(pts[n][1].real() == doctest::Approx(1.0));
    auto m = phi_direct(pts[n][0].real(), pts[n][1].real());
    CHECK(std::abs(m.first - 1.0) + std::abs(m.second) < 1e-10);
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      CHECK_FALSE(at0.same_class(pts[i], pts[j], 1e-9));
      CHECK(at1.same_class(pts[i], pts[j], 1e-9));
    }
  auto up = fiber_enumerate(at0, Point{0.0, 1.0}, 1);
  CHECK(up[0][0].real() == doctest::Approx(kPi / 2));
  CHECK_THROWS_AS(fiber_enumerate(at0, Point{0.0, 0.0}, 3), ExceptionalFiberError);

  // count = 1 agrees with the representative of an arrow with that target
  cplx zc(0.4, -0.9);
  double lam = 0.8;
  cplx t = std::exp(zc * lam) * lam;
  auto one = fiber_enumerate(at1, Point{t.real(), t.imag()}, 1);
  auto rep = r2_representative(zc, lam);
  CHECK(at1.same_class(one[0], Point{rep.a, rep.b}, 1e-9));
}

TEST_CASE("plane reduction from the Dazord groupoid") {
  Report r = r2_reduction_check(200, 1e-8, 3);
  require_all_ok(r);
  CHECK(r.find("consomega_symbolic")->status == Status::Proven);
}

TEST_CASE("springer sl2") {
  auto at = springer(2);
  const auto& c = at.charts[0];
  CHECK(c.chart->names() == std::vector<std::string>{"n21", "u12"});
  // at the unit slice point phi is the identity on the nilradical
  auto m = c.phi(Point{0.0, 0.7});
  CHECK(std::abs(m[1] - 0.7) < 1e-15);
  CHECK(std::abs(m[0]) + std::abs(m[2]) + std::abs(m[3]) == 0.0);
  Report r = verify_resolution(at, 100, 1e-8, 2);
  require_all_ok(r);
  CHECK_THROWS_AS(springer(5), std::invalid_argument);
}

TEST_CASE("springer sl3 Borel and parabolic") {
  Report r = verify_resolution(springer(3), 40, 1e-8, 2);
  require_all_ok(r);
  auto par = springer(3, {1});
  CHECK(par.charts[0].chart->dim() == 4);
  CHECK(par.metadata.at("jordan_type") == "2,1");
  Report rp = verify_resolution(par, 40, 1e-8, 2);
  require_all_ok(rp);
}

TEST_CASE("springer classes") {
  for (auto levi : {std::vector<int>{}, std::vector<int>{1}}) {
    ParabolicData p = parabolic(3, levi);
    auto at = springer(3, levi);
    CounterRng rng(9, levi.size());
    for (int k = 0; k < 30; ++k) {
      Mat g = random_sl(3, rng);
      Mat u = Mat::Zero(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (p.block[i] < p.block[j]) u(i, j) = rng.uniform(-1.0, 1.0);
      Mat b = block_upper_random(p, rng);
      Mat g2 = b * g, u2 = b * u * b.inverse();
      CHECK(springer_class_equal(p, g, u, g2, u2, 1e-9));
      Mat g3 = g;
      g3(2, 0) += 0.5;
      CHECK_FALSE(springer_class_equal(p, g, u, g3, u, 1e-9));
      // the slice point is a class representative with the same image
      Point z = springer_slice(p, g, u);
      Point z2 = springer_slice(p, g2, u2);
      for (std::size_t q = 0; q < z.size(); ++q) CHECK(std::abs(z[q] - z2[q]) < 1e-8);
      Mat img = g.inverse() * u * g;
      auto m = at.charts[0].phi(z);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(m[static_cast<std::size_t>(i * 3 + j)] - img(i, j)) < 1e-8);
    }
    Mat sing = Mat::Zero(3, 3);
    sing(0, 2) = 1;
    sing(1, 1) = 1;
    sing(2, 0) = 1;
    CHECK_THROWS_AS(springer_slice(p, sing, Mat::Zero(3, 3)), SliceError);
  }
}

TEST_CASE("grothendieck sl2") {
  auto at = grothendieck_sl2(Rational(2));
  auto mu = at.charts[0].phi(Point{0.0, 0.0});
  CHECK(std::abs(mu[0] - 2.0) < 1e-15);
  CHECK(std::abs(mu[1]) + std::abs(mu[2]) < 1e-15);
  CHECK(std::abs(mu[3] - 0.5) < 1e-15);
  // mu = g^{-1} (t u) g written out with 2x2 matrices
  CounterRng rng(1, 0);
  for (int k = 0; k < 20; ++k) {
    double nu = rng.uniform(-1, 1), w = rng.uniform(-1, 1);
    Mat g(2, 2), tu(2, 2);
    g << 1, 0, nu, 1;
    tu << 2, 2 * w, 0, 0.5;
    Mat want = g.inverse() * tu * g;
    auto got = at.charts[0].phi(Point{nu, w});
    for (int q = 0; q < 4; ++q) CHECK(std::abs(got[q] - want(q / 2, q % 2)) < 1e-14);
  }
  require_all_ok(verify_resolution(at, 200, 1e-8, 1));
  Report inv = grothendieck_invariants(Rational(-3, 2), 200, 1e-9, 1);
  require_all_ok(inv);
  CHECK(inv.find("trace_invariant")->max_residual <= 1e-12);
  CHECK(grothendieck_sl2(Rational(1)).warnings.size() == 1);
  CHECK(grothendieck_sl2(Rational(3)).warnings.empty());
  CHECK_THROWS_AS(grothendieck_sl2(Rational(0)), std::invalid_argument);
}

TEST_CASE("kleinian charts") {
  for (int l : {2, 3}) {
    auto at = kleinian(l);
    CHECK(static_cast<int>(at.charts.size()) == l);
    // every chart lands on xy = z^l, checked by direct substitution
    CounterRng rng(l, 0);
    for (const auto& c : at.charts)
      for (int k = 0; k < 20; ++k) {
        Point p{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, {rng.uniform(-1, 1), rng.uniform(-1, 1)}};
        auto m = c.phi(p);
        CHECK(std::abs(m[0] * m[1] - std::pow(m[2], l)) < 1e-12);
      }
    require_all_ok(verify_resolution(at, 200, 1e-8, 1));
    require_all_ok(kleinian_invariants(l, 200, 1e-9, 1));
    auto ex = kleinian_exceptional(l);
    CHECK(ex.curve_count == l - 1);
  }
  auto ex = kleinian_exceptional(3);
  CHECK(ex.intersections.size() == 1);
  CHECK(ex.intersections.at({1, 2}) == 1);
  CHECK(ex.strict_meets[0] == std::vector<int>{1});
  CHECK(ex.strict_meets[1] == std::vector<int>{2});
  CHECK(ex.strict_transversal[0]);
  CHECK(ex.strict_transversal[1]);
  CHECK_THROWS_AS(kleinian(5), std::invalid_argument);
}

TEST_CASE("rotated lines") {
  auto r0 = crossing_compatibility_r2(0.0);
  CHECK(r0.metadata.at("verdict") == "REACHABLE");
  require_all_ok(r0);
  auto r1 = crossing_compatibility_r2(kPi / 2);
  CHECK(r1.metadata.at("verdict") == "OBSTRUCTED");
  CHECK(std::stod(r1.metadata.at("certificate_c")) == doctest::Approx(kPi / 2));
  require_all_ok(r1);
  CHECK(crossing_compatibility_r2(kPi).metadata.at("verdict") == "REACHABLE");
  auto r3 = crossing_compatibility_r2(3.0);
  CHECK(std::stod(r3.metadata.at("certificate_c")) == doctest::Approx(kPi - 3.0));
}

TEST_CASE("atlas manifest") {
  std::string m = atlas_manifest(build_r2(1));
  CHECK(m.find("family: r2") != std::string::npos);
  CHECK(m.find("phi[x] = b*cos(a*b)") != std::string::npos);
  CHECK(m.find("omega[0,1] = -1") != std::string::npos);
  CHECK(m.find("identification n=1") != std::string::npos);
  std::string k = atlas_manifest(kleinian(3));
  CHECK(k.find("transition X0 -> S1") != std::string::npos);
  CHECK(atlas_manifest(build_r2(1)) == m);
}
