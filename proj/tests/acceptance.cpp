// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pforge/apath.hpp"
#include "pforge/groupoid.hpp"
#include "pforge/liealg.hpp"
#include "pforge/matexpr.hpp"
#include "pforge/resolution.hpp"

using namespace pforge;

namespace {

constexpr double kPi = std::numbers::pi;

constexpr double kGroupoidTol = 1e-9;
constexpr double kPushTol = 1e-8;
constexpr double kReductionTol = 1e-8;
constexpr double kMonodromyTol = 1e-5;
constexpr double kFiberTol = 1e-10;
constexpr double kSpringerTol = 1e-8;
constexpr double kKleinianTol = 1e-8;
constexpr double kSchoutenTol = 1e-9;
constexpr double kTraceTol = 1e-12;
constexpr double kDerivativeTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kMinSlope = 3.5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool ok = true;
  std::vector<std::string> info;

  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    info.push_back(std::string(cond ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { info.push_back("info " + what); }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

void require_record(Verdict& v, const Report& r, const std::string& name, double tol, const std::string& label) {
  const CheckRecord* c = r.find(name);
  if (!c) {
    v.require(false, label + ": record " + name + " missing");
    return;
  }
  v.require(c->ok() && c->max_residual <= tol,
            label + " " + name + " " + to_string(c->status) + " residual " + num(c->max_residual) + " (tol " +
                num(tol) + ", samples " + std::to_string(c->samples_used) + ")");
}

void require_proven(Verdict& v, const Report& r, const std::string& name, const std::string& label) {
  const CheckRecord* c = r.find(name);
  v.require(c && c->status == Status::Proven, label + " " + name + " " + (c ? to_string(c->status) : "missing"));
}

// ---- 1 ----
Verdict plane_identity() {
  Verdict v;
  const auto t0 = Clock::now();
  VarTable vars;
  vars.add("a");
  vars.add("b");
  Expr a = var(vars, "a"), b = var(vars, "b");
  Expr x = b * Expr::cos(a * b), y = b * Expr::sin(a * b);
  // {f, g} for the bivector d/da ^ d/db
  auto br = [](const Expr& f, const Expr& g) { return diff(f, 0) * diff(g, 1) - diff(f, 1) * diff(g, 0); };
  Expr literal = br(x, y) - (x * x + y * y);
  ZeroResult z = is_zero(literal);
  const double t = seconds_since(t0);
  v.require(z.status == ZeroStatus::ProvenZero,
            "{phi*x, phi*y} under d/da^d/db minus phi*(x^2+y^2): " + std::string(to_string(z.status)));
  v.require(t < 1.0, "runtime " + num(t) + " s < 1 s");
  // the same expression plus 2 b^2, and the identity with the bivector -d/da^d/db
  ZeroResult shifted = is_zero(literal + Expr(2) * b * b);
  v.note("literal expression + 2 b^2 is " + std::string(to_string(shifted.status)) +
         ", so the literal bracket equals -b^2");
  ZeroResult fixed = is_zero(-br(x, y) - (x * x + y * y));
  v.note("with -d/da^d/db (omega_Z = -da^db): " + std::string(to_string(fixed.status)));
  auto at = build_r2(0);
  Report rep = verify_resolution(at, 50, kPushTol, 1);
  const CheckRecord* push = rep.find("pushforward");
  v.note("library atlas pushforward record: " + std::string(push ? to_string(push->status) : "missing"));
  return v;
}

// ---- 2 ----
Verdict dazord_groupoid() {
  Verdict v;
  const auto t0 = Clock::now();
  auto g = catalog("dazord");
  Report ax = verify_axioms(*g, 1000, kGroupoidTol, 42);
  for (const char* name : {"associativity", "left_unit", "right_unit", "left_inverse", "right_inverse",
                           "inverse_swaps_source_target", "inverse_of_product", "source_of_product",
                           "target_of_product"}) {
    require_record(v, ax, name, kGroupoidTol, "axiom");
    const CheckRecord* c = ax.find(name);
    if (c) v.require(c->samples_used == 1000, std::string(name) + " used 1000 samples");
  }
  Report sy = verify_symplectic(*g, 200, 42);
  require_proven(v, sy, "d_omega_zero", "symplectic");
  Report pf = pushforward_check(*g, *g->base_pi, 500, kPushTol, 42);
  require_record(v, pf, "source_pushforward", kPushTol, "s_* pi = pi_M");
  require_record(v, pf, "target_pushforward", kPushTol, "t_* pi = -pi_M");
  const double t = seconds_since(t0);
  v.require(t < 30.0, "runtime " + num(t) + " s < 30 s");
  return v;
}

// ---- 3 ----
Verdict reduction() {
  Verdict v;
  Report r = r2_reduction_check(200, kReductionTol, 3);
  require_record(v, r, "reduced_bracket", kReductionTol, "{a,b} = 1");
  require_record(v, r, "lift_independence", kReductionTol, "lift independence");
  require_record(v, r, "consomega", kReductionTol, "p* omega_Z + i* omega_Gamma");
  const CheckRecord* c = r.find("reduced_bracket");
  if (c) v.require(c->samples_used >= 200, "200 sampled classes");
  return v;
}

// ---- 4 ----
Verdict covering_vs_full() {
  Verdict v;
  auto at0 = build_r2(0), at1 = build_r2(1);
  const Point target{1.0, 0.0};
  auto pts = fiber_enumerate(at0, target, 5);
  v.require(pts.size() >= 5, std::to_string(pts.size()) + " preimages of (1,0)");
  double worst = 0, closest = INFINITY;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double a = pts[i][0].real(), b = pts[i][1].real();
    worst = std::max({worst, std::abs(b * std::cos(a * b) - 1.0), std::abs(b * std::sin(a * b))});
    for (std::size_t j = 0; j < i; ++j)
      closest = std::min(closest, std::hypot(pts[i][0].real() - pts[j][0].real(), pts[i][1].real() - pts[j][1].real()));
  }
  v.require(worst <= kFiberTol, "preimages verified, residual " + num(worst));
  v.require(closest > 1e-3, "preimages distinct, min separation " + num(closest));
  bool all_equal = true;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) all_equal = all_equal && at1.same_class(pts[i], pts[j], 1e-9);
  v.require(all_equal, "k=1: preimages pairwise class-equal");
  auto m0 = loop_monodromy(at0, Point{0.0, 1.0});
  v.require(!m0.class_trivial && m0.fiber_match <= kMonodromyTol,
            "k=0 monodromy nontrivial, end (" + num(m0.end[0].real()) + ", " + num(m0.end[1].real()) +
                ") in fiber to " + num(m0.fiber_match));
  auto m1 = loop_monodromy(at1, Point{0.0, 1.0});
  v.require(m1.class_trivial, "k=1 monodromy class-trivial");
  return v;
}

QMatrix unit(int n, int i, int j) {
  QMatrix m(n, n);
  m(i - 1, j - 1) = Rational(1);
  return m;
}

// ---- 5 ----
Verdict springer_certificates() {
  Verdict v;
  const auto t0 = Clock::now();
  auto b2 = parabolic(2, {});
  auto e2 = make_nilpotent(unit(2, 1, 2));
  v.require(richardson_certificate(b2, e2).ok(), "sl2 Borel, e: Richardson");
  v.require(lagrangian_pairing_certificate(b2, e2, 10).ok(), "sl2 Borel, e: pairing");
  auto b3 = parabolic(3, {});
  auto reg = make_nilpotent(unit(3, 1, 2) + unit(3, 2, 3));
  v.require(richardson_certificate(b3, reg).ok(), "sl3 Borel, E12+E23: Richardson");
  v.require(lagrangian_pairing_certificate(b3, reg, 10).ok(), "sl3 Borel, E12+E23: pairing");
  Report mini = richardson_certificate(b3, make_nilpotent(unit(3, 1, 3)));
  v.require(!mini.ok(), "sl3 Borel, E13 (minimal orbit): Richardson fails, rank " + mini.metadata["rank"]);
  LieAlgebraSL g2(2);
  QMatrix h = unit(2, 1, 1) - unit(2, 2, 2);
  Rational khh = g2.killing_form(h, h);
  v.require(khh == Rational(8), "K(h,h) = " + khh.to_string());
  const double t = seconds_since(t0);
  v.require(t < 5.0, "runtime " + num(t) + " s < 5 s");
  return v;
}

// ---- 6 ----
Verdict springer_pushforward() {
  Verdict v;
  for (int n : {2, 3}) {
    Report r = verify_resolution(springer(n), 500, kSpringerTol, 5);
    const std::string label = "springer(" + std::to_string(n) + ")";
    for (const char* name : {"image_in_closure", "etale", "pushforward"}) {
      require_record(v, r, name, name == std::string("etale") ? 0.5 : kSpringerTol, label);
      const CheckRecord* c = r.find(name);
      if (c) v.require(c->samples_used >= 500, label + " " + name + " samples " + std::to_string(c->samples_used));
    }
  }
  return v;
}

// ---- 7 ----
Verdict kleinian_criterion() {
  Verdict v;
  for (int l : {2, 3}) {
    const std::string label = "l=" + std::to_string(l);
    Report r = kleinian_invariants(l, 100, kKleinianTol, 7);
    require_proven(v, r, "schouten_zero", label);
    for (const char* c : {"casimir_x", "casimir_y", "casimir_z"}) require_proven(v, r, c, label);
    auto ex = kleinian_exceptional(l);
    v.require(ex.curve_count == l - 1, label + " exceptional curves " + std::to_string(ex.curve_count));
    Report res = verify_resolution(kleinian(l), 200, kKleinianTol, 7);
    require_record(v, res, "pushforward", kKleinianTol, label);
    if (l == 3) {
      const bool chain = ex.intersections.size() == 1 && ex.intersections.begin()->second == 1 &&
                         ex.intersections.begin()->first == std::pair<int, int>{1, 2};
      v.require(chain, "l=3: C1 and C2 meet in one point");
      bool strict = ex.strict_meets.size() == 2;
      for (int k = 0; strict && k < 2; ++k)
        strict = ex.strict_meets[k] == std::vector<int>{k + 1} && ex.strict_transversal[k];
      v.require(strict, "l=3: strict transform of L_k meets only C_k, transversally");
      require_record(v, r, "chain_intersections", 0.0, label);
      require_record(v, r, "strict_transforms", 0.0, label);
    }
  }
  return v;
}

// ---- 8 ----
Verdict evens_lu() {
  Verdict v;
  MultiVectorField pi = evens_lu_bivector(2);
  PointwiseField sq = pointwise(schouten(pi, pi));
  CounterRng rng(8, 0);
  double worst = 0;
  for (int k = 0; k < 500; ++k) worst = std::max(worst, sq(flatten(random_sl(2, rng))).max_abs());
  v.require(worst <= kSchoutenTol, "[pi, pi] on 500 SL2 samples, residual " + num(worst));
  Report r = grothendieck_invariants(Rational(2), 200, kTraceTol, 8);
  require_record(v, r, "tU_coisotropic", kSchoutenTol, "tau=2");
  require_record(v, r, "trace_invariant", kTraceTol, "tau=2");
  return v;
}

// ---- 9 ----
Verdict rotated_lines() {
  Verdict v;
  Report r0 = crossing_compatibility_r2(0.0);
  v.require(r0.metadata["verdict"] == "REACHABLE", "alpha = 0: " + r0.metadata["verdict"]);
  Report r1 = crossing_compatibility_r2(kPi / 2);
  v.require(r1.metadata["verdict"] == "OBSTRUCTED", "alpha = pi/2: " + r1.metadata["verdict"]);
  const double c = std::stod(r1.metadata["certificate_c"]);
  v.require(std::abs(c - kPi / 2) <= 1e-12, "certificate c = " + num(c) + ", dist(pi/2, pi Z) = " + num(kPi / 2));
  return v;
}

// ---- 10 ----
double derivative_gap(const ChartMap& f, const Point& p) {
  Mat sym = f.jacobian_at(p);
  double gap = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    Point hi = p, lo = p;
    hi[j] += kFdStep;
    lo[j] -= kFdStep;
    auto fh = f(hi), fl = f(lo);
    for (std::size_t i = 0; i < fh.size(); ++i) {
      const cplx fd = (fh[i] - fl[i]) / (2 * kFdStep);
      gap = std::max(gap, std::abs(fd - sym(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
  }
  return gap;
}

Verdict numerics() {
  Verdict v;
  for (const auto& key : catalog_keys()) {
    auto g = catalog(key);
    CounterRng rng(10, fnv1a(key));
    double ws = 0, wt = 0, wu = 0, wi = 0, wp = 0;
    int products = 0;
    for (int k = 0; k < 100; ++k) {
      Point a = g->sample_arrow(rng);
      ws = std::max(ws, derivative_gap(g->s, a));
      wt = std::max(wt, derivative_gap(g->t, a));
      wi = std::max(wi, derivative_gap(g->inverse, a));
      wu = std::max(wu, derivative_gap(g->unit, g->s(a)));
      std::optional<Point> b;
      for (int tries = 0; tries < 10 && !b; ++tries) b = sample_composable(*g, a, rng);
      if (!b) continue;
      Point pair = a;
      pair.insert(pair.end(), b->begin(), b->end());
      wp = std::max(wp, derivative_gap(g->product, pair));
      ++products;
    }
    const double w = std::max({ws, wt, wu, wi, wp});
    v.require(w <= kDerivativeTol, key + " s,t,unit,inverse,product: max gap " + num(w));
    v.require(products == 100, key + " product evaluated at " + std::to_string(products) + " composable pairs");
  }
  auto at = build_r2(0);
  auto m = [](double u) {
    double r = 1 + 0.5 * std::sin(kPi * u), th = 3 * u;
    return Point{r * std::cos(th), r * std::sin(th)};
  };
  auto dm = [](double u) {
    double r = 1 + 0.5 * std::sin(kPi * u), dr = 0.5 * kPi * std::cos(kPi * u), th = 3 * u;
    return Point{dr * std::cos(th) - 3 * r * std::sin(th), dr * std::sin(th) + 3 * r * std::cos(th)};
  };
  auto path = path_over(*catalog("dazord")->base_pi, m, dm);
  const double slope = rk4_order_slope(at, path, fiber_enumerate(at, m(0.0), 1)[0]);
  v.require(slope >= kMinSlope, "RK4 order slope " + num(slope) + " >= " + num(kMinSlope));
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"plane Poisson-map identity", plane_identity},
      {"Dazord groupoid", dazord_groupoid},
      {"reduction consistency", reduction},
      {"covering vs full", covering_vs_full},
      {"Springer certificates", springer_certificates},
      {"Springer pushforward", springer_pushforward},
      {"Kleinian", kleinian_criterion},
      {"Evens-Lu base structure", evens_lu},
      {"rotated-line obstruction", rotated_lines},
      {"numerics hygiene", numerics},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v.ok = false;
      v.info.push_back(std::string("FAIL exception: ") + e.what());
    }
    std::cout << "criterion " << k + 1 << ": " << (v.ok ? "PASS" : "FAIL") << "  " << criteria[k].first << "\n";
    for (const auto& line : v.info) std::cout << "    " << line << "\n";
    std::cout.flush();
    if (!v.ok) ++failed;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
