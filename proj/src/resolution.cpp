#include "pforge/resolution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "pforge/matexpr.hpp"

namespace pforge {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Expr> vars_of(const ChartPtr& c) {
  std::vector<Expr> v;
  for (int k = 0; k < c->dim(); ++k) v.push_back(c->coord(k));
  return v;
}

double max_abs_vec(const std::vector<cplx>& v) {
  double m = 0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

double diff_abs(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double diff_value(const MultivectorValue& a, const MultivectorValue& b) {
  double m = 0;
  for (const auto& [idx, v] : a.coeff) {
    auto it = b.coeff.find(idx);
    m = std::max(m, std::abs(v - (it == b.coeff.end() ? cplx{} : it->second)));
  }
  for (const auto& [idx, v] : b.coeff)
    if (!a.coeff.count(idx)) m = std::max(m, std::abs(v));
  return m;
}

// One record for a list of expressions that should all vanish.
CheckRecord symbolic_all(const std::string& name, const std::vector<Expr>& es, double tol) {
  CheckRecord out;
  out.name = name;
  out.tol = tol;
  out.status = Status::Proven;
  int unknown = 0;
  for (const auto& e : es) {
    CheckRecord r = symbolic_record(name, e, tol);
    out.max_residual = std::max(out.max_residual, r.max_residual);
    out.samples_used += r.samples_used;
    for (auto& w : r.witnesses)
      if (out.witnesses.size() < 3) out.witnesses.push_back(w);
    if (r.status == Status::Fail) out.status = Status::Fail;
    if (r.status != Status::Proven) {
      ++unknown;
      if (out.status == Status::Proven) out.status = r.status;
    }
  }
  out.notes = std::to_string(es.size()) + " expressions";
  if (unknown) out.notes += ", " + std::to_string(unknown) + " not proven symbolically";
  return out;
}

CheckRecord exact_record(const std::string& name, bool ok, double residual, const std::string& notes) {
  CheckRecord r;
  r.name = name;
  r.status = ok ? Status::Pass : Status::Fail;
  r.max_residual = residual;
  r.tol = 0;
  r.samples_used = 1;
  r.notes = notes;
  if (!ok) {
    Witness w;
    w.sample = 0;
    w.residual = residual;
    w.note = notes;
    r.witnesses.push_back(w);
  }
  return r;
}

// Symbolic inverse bivector of a 2-form on a two-dimensional chart.
std::optional<MultiVectorField> inverse_2d(const DifferentialForm& w) {
  if (w.chart->dim() != 2 || w.degree != 2) return std::nullopt;
  MultiVectorField p = MultiVectorField::zero(w.chart, 2);
  p.set({0, 1}, Expr::recip(w.get({0, 1})));
  return p;
}

}  // namespace

PointwiseField ResolutionChart::structure() const {
  if (pi) return pointwise(*pi);
  if (omega) {
    MultiVectorField w;
    w.chart = omega->chart;
    w.degree = 2;
    w.coeff = omega->coeff;
    PointwiseField wv = pointwise(w);
    return [wv](const Point& p) { return invert_form_value(wv(p)); };
  }
  if (pi_pointwise) return pi_pointwise;
  throw std::logic_error("chart " + name + " carries no Poisson structure");
}

bool ResolutionAtlas::same_class(const Point& p, const Point& q, double tol) const {
  if (class_equal) return class_equal(p, q, tol);
  double scale = std::max(1.0, std::max(max_abs_vec(p), max_abs_vec(q)));
  return diff_abs(p, q) <= tol * scale;
}

// ---------------------------------------------------------------- plane family

namespace {

std::vector<Point> r2_fiber(const Point& target, int count) {
  const double x = target.at(0).real(), y = target.at(1).real();
  const double r = std::hypot(x, y);
  if (r < 1e-14) throw ExceptionalFiberError("the fiber over the origin is the line b = 0");
  const double theta = std::atan2(y, x);
  std::vector<Point> out;
  for (int n = 0; n < count; ++n) out.push_back({(theta + 2 * kPi * n) / r, r});
  return out;
}

DeckMap r2_deck(int n) {
  DeckMap d;
  d.name = "n=" + std::to_string(n);
  d.chart = real_chart("r2_shift", {"a", "b", "c"});
  Expr a = d.chart->coord(0), b = d.chart->coord(1), c = d.chart->coord(2);
  Expr sa = n % 2 ? -a : a, sb = n % 2 ? -b : b;
  d.map = ChartMap(d.chart, d.chart, {sa + c / b, sb, c});
  d.shift = n * kPi;
  return d;
}

}  // namespace

ResolutionAtlas build_r2(int k) {
  if (k != 0 && k != 1) throw std::invalid_argument("build_r2: unsupported k = " + std::to_string(k));
  auto daz = catalog("dazord");
  ResolutionAtlas at;
  at.family = "r2";
  at.params["k"] = std::to_string(k);
  at.ambient = daz->base;
  at.pi_m = *daz->base_pi;

  ResolutionChart c;
  c.name = "ab";
  c.chart = real_chart("r2", {"a", "b"});
  Expr a = c.chart->coord(0), b = c.chart->coord(1);
  c.phi = ChartMap(c.chart, at.ambient, {b * Expr::cos(a * b), b * Expr::sin(a * b)});
  DifferentialForm w = DifferentialForm::zero(c.chart, 2);
  w.set({0, 1}, Expr(-1));
  c.omega = w;
  c.sample = [](CounterRng& rng) -> std::optional<Point> {
    double av = rng.uniform(-2.0, 2.0);
    double bv = rng.uniform(0.05, 2.0);
    if (rng.uniform() < 0.5) bv = -bv;
    return Point{av, bv};
  };
  at.charts.push_back(c);

  at.flags = {true, true, k == 1};
  at.symbolic_pushforward = true;
  at.fiber = r2_fiber;
  if (k == 1) {
    at.class_equal = r2_class_equal;
    at.representative = r2_class_representative;
    at.deck = {r2_deck(1), r2_deck(2)};
  }
  at.metadata["omega"] = "-da^db, so that phi_* pi_Z = (x^2+y^2) dx^dy";
  at.metadata["relation"] = k == 0 ? "trivial" : "(a, b) ~ ((-1)^n a + n pi / b, (-1)^n b)";
  return at;
}

R2Representative r2_representative(cplx zc, double lambda) {
  R2Representative r;
  const double x = zc.real(), y = zc.imag();
  const double e = std::exp(x * lambda);
  r.a = y / e;
  r.b = lambda * e;
  r.m = -x / e;
  r.nu = r.b;
  r.imag_residual = std::max(std::abs(r.m.imag()), std::abs(r.nu.imag()));

  auto daz = catalog("dazord");
  std::vector<cplx> t = daz->t(Point{x, y, lambda, 0.0});
  const cplx phi = r.b * std::exp(cplx(0, r.a * r.b));
  r.target_residual = std::max(std::abs(t[0] - phi.real()), std::abs(t[1] - phi.imag()));
  std::vector<cplx> prod = daz->product(Point{r.m.real(), r.m.imag(), r.nu.real(), r.nu.imag(), x, y, lambda, 0.0});
  r.product_residual = diff_abs(prod, {0.0, r.a, r.b, 0.0});
  return r;
}

Point r2_class_representative(const Point& ab) {
  double a = ab.at(0).real(), b = ab.at(1).real();
  if (b == 0) return {a, b};
  if (b < 0) {  // n = 1
    a = -a + kPi / b;
    b = -b;
  }
  // even n: a b shifts by 2 pi m
  const double p = a * b;
  const double m = std::floor((p + kPi) / (2 * kPi));
  a = (p - 2 * kPi * m) / b;
  return {a, b};
}

bool r2_class_equal(const Point& p, const Point& q, double tol) {
  const double a1 = p.at(0).real(), b1 = p.at(1).real();
  const double a2 = q.at(0).real(), b2 = q.at(1).real();
  const double scale = std::max({1.0, std::abs(b1), std::abs(b2)});
  const bool zero1 = std::abs(b1) <= tol, zero2 = std::abs(b2) <= tol;
  if (zero1 || zero2) return zero1 && zero2 && std::abs(a1 - a2) <= tol * std::max({1.0, std::abs(a1), std::abs(a2)});
  int parity;
  if (std::abs(b1 - b2) <= tol * scale)
    parity = 0;
  else if (std::abs(b1 + b2) <= tol * scale)
    parity = 1;
  else
    return false;
  const double n = (a2 * b2 - a1 * b1) / kPi;
  const double rn = std::round(n);
  if (std::abs(n - rn) > tol * std::max(1.0, std::abs(n))) return false;
  return (static_cast<long long>(std::abs(rn)) % 2) == parity;
}

std::vector<Point> fiber_enumerate(const ResolutionAtlas& atlas, const Point& target, int count) {
  if (!atlas.fiber) throw std::invalid_argument("fiber_enumerate: atlas " + atlas.family + " has no fiber solver");
  if (count < 1) throw std::invalid_argument("fiber_enumerate: count must be positive");
  std::vector<Point> pts = atlas.fiber(target, count);
  const auto& phi = atlas.charts.at(0).phi;
  for (const auto& p : pts) {
    double r = diff_abs(phi(p), target);
    if (r > 1e-10) throw std::runtime_error("fiber_enumerate: preimage residual " + std::to_string(r));
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (diff_abs(pts[i], pts[j]) < 1e-6) throw std::runtime_error("fiber_enumerate: repeated preimage");
  return pts;
}

Report r2_reduction_check(std::int64_t samples, double tol, std::uint64_t seed) {
  Report rep;
  rep.campaign_id = "r2-reduction";
  rep.target = "dazord over Gamma_L = {z_im = 0}";
  rep.seed = seed;
  auto daz = catalog("dazord");
  const ChartPtr& T = daz->total;
  ChartPtr ab = real_chart("r2", {"a", "b"});
  Expr X = T->coord(0), Y = T->coord(1), lam = T->coord(2);
  ChartMap Phi(T, ab, {Y * Expr::exp(-X * lam), lam * Expr::exp(X * lam)});
  Submanifold N = cut_out(T, {T->coord(3)}, 3);
  PointwiseField piq = daz->poisson();

  auto sample = [](CounterRng& rng) {
    double l = rng.uniform(0.1, 1.5);
    if (rng.uniform() < 0.5) l = -l;
    return Point{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), l, 0.0};
  };
  Vec da = Vec::Unit(2, 0), db = Vec::Unit(2, 1);
  auto names = T->names();
  rep.add(run_samples("reduced_bracket", samples, tol, seed, names, [&](std::int64_t k, CounterRng& rng) {
    SampleResult res;
    res.point = sample(rng);
    auto r = reduce_at(piq, 2, N, Phi, res.point, {da, db}, ReductionSign::Feedback,
                       seed + static_cast<std::uint64_t>(k), tol);
    res.residual = std::abs(r.value - 1.0);
    return res;
  }));
  rep.add(run_samples("lift_independence", samples, tol, seed, names, [&](std::int64_t k, CounterRng& rng) {
    SampleResult res;
    res.point = sample(rng);
    auto r = reduce_at(piq, 2, N, Phi, res.point, {da, db}, ReductionSign::Feedback,
                       seed + 7919 * static_cast<std::uint64_t>(k + 1), tol);
    res.residual = r.lift_gap;
    return res;
  }));

  // p* omega_Z + i* omega_Gamma on the chart (Z_re, Z_im, lambda) of Gamma_L.
  ChartPtr gl = real_chart("gamma_L", {"Z_re", "Z_im", "lambda"});
  ChartMap iota(gl, T, {gl->coord(0), gl->coord(1), gl->coord(2), Expr(0)});
  ChartMap p = Phi.compose(iota);
  DifferentialForm wz = DifferentialForm::zero(ab, 2);
  wz.set({0, 1}, Expr(-1));
  DifferentialForm sum = pullback(wz, p) + pullback(*daz->omega, iota);
  std::vector<Expr> comps;
  for (const auto& [idx, e] : sum.coeff) comps.push_back(e);
  rep.add(symbolic_all("consomega_symbolic", comps, tol));
  MultiVectorField sv;
  sv.chart = gl;
  sv.degree = 2;
  sv.coeff = sum.coeff;
  PointwiseField sum_at = pointwise(sv);
  rep.add(run_samples("consomega", samples, tol, seed, gl->names(), [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    Point x = sample(rng);
    res.point = {x[0], x[1], x[2]};
    res.residual = sum_at(res.point).max_abs();
    return res;
  }));
  rep.metadata["omega_Z"] = "-da^db";
  rep.metadata["sign"] = "feedback";
  return rep;
}

// ---------------------------------------------------------------- verification

Report verify_resolution(const ResolutionAtlas& at, std::int64_t samples, double tol, std::uint64_t seed) {
  Report rep;
  rep.campaign_id = "resolution-verify";
  rep.target = at.family;
  for (const auto& [k, v] : at.params) rep.target += " " + k + "=" + v;
  rep.seed = seed;
  const int nc = static_cast<int>(at.charts.size());
  std::vector<PointwiseField> structures;
  for (const auto& c : at.charts) structures.push_back(c.structure());
  PointwiseField pim = pointwise(at.pi_m);
  auto names = at.charts.at(0).chart->names();

  auto draw = [&](std::int64_t k, CounterRng& rng, int& ci) -> std::optional<Point> {
    ci = static_cast<int>(k % nc);
    for (int attempt = 0; attempt < 20; ++attempt)
      if (auto p = at.charts[static_cast<std::size_t>(ci)].sample(rng)) return p;
    return std::nullopt;
  };

  // (1) image in the leaf closure
  Tape closure(at.closure_generators);
  rep.add(run_samples("image_in_closure", samples, tol, seed, names, [&](std::int64_t k, CounterRng& rng) {
    SampleResult res;
    int ci;
    auto z = draw(k, rng, ci);
    if (!z) {
      res.ok = false;
      res.note = "no sample";
      return res;
    }
    res.point = *z;
    if (at.closure_generators.empty()) return res;
    auto m = at.charts[static_cast<std::size_t>(ci)].phi(*z);
    res.residual = max_abs_vec(closure.eval(m)) / std::max(1.0, max_abs_vec(m));
    res.note = at.charts[static_cast<std::size_t>(ci)].name;
    return res;
  }));
  if (at.closure_generators.empty()) rep.checks.back().notes = "closure is the whole ambient chart";

  // (2) etale over the open leaf
  rep.add(run_samples("etale", samples, 0.5, seed, names, [&](std::int64_t k, CounterRng& rng) {
    SampleResult res;
    int ci;
    auto z = draw(k, rng, ci);
    if (!z) {
      res.ok = false;
      res.note = "no sample";
      return res;
    }
    res.point = *z;
    const auto& c = at.charts[static_cast<std::size_t>(ci)];
    int rank = numeric_rank(c.phi.jacobian_at(*z));
    res.residual = c.chart->dim() - rank;
    res.note = c.name + ": rank " + std::to_string(rank);
    return res;
  }));
  rep.checks.back().notes = "residual = chart dimension - rank of dphi";

  // (3) pushforward
  if (at.symbolic_pushforward) {
    std::vector<Expr> es;
    for (const auto& c : at.charts) {
      std::optional<MultiVectorField> pz = c.pi;
      if (!pz && c.omega) pz = inverse_2d(*c.omega);
      if (!pz) continue;
      const auto& comps = c.phi.comps();
      const int m = at.ambient->dim();
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
          es.push_back(apply(*pz, {comps[i], comps[j]}) - substitute(at.pi_m.get({i, j}), comps));
    }
    rep.add(symbolic_all("pushforward", es, tol));
  }
  rep.add(run_samples(at.symbolic_pushforward ? "pushforward_sampled" : "pushforward", samples, tol, seed, names,
                      [&](std::int64_t k, CounterRng& rng) {
                        SampleResult res;
                        int ci;
                        auto z = draw(k, rng, ci);
                        if (!z) {
                          res.ok = false;
                          res.note = "no sample";
                          return res;
                        }
                        res.point = *z;
                        const auto& c = at.charts[static_cast<std::size_t>(ci)];
                        MultivectorValue pushed = structures[static_cast<std::size_t>(ci)](*z).push(c.phi.jacobian_at(*z));
                        MultivectorValue want = pim(c.phi(*z));
                        res.residual = diff_value(pushed, want) / std::max(1.0, want.max_abs());
                        res.note = c.name;
                        return res;
                      }));

  // (4) closedness / Poisson property and nondegeneracy
  {
    std::vector<Expr> closed, jacobi;
    for (const auto& c : at.charts) {
      if (c.omega)
        for (const auto& [idx, e] : exterior_derivative(*c.omega).coeff) closed.push_back(e);
      if (c.pi && c.chart->dim() > 2)
        for (const auto& [idx, e] : schouten(*c.pi, *c.pi).coeff) jacobi.push_back(e);
    }
    bool any_omega = std::any_of(at.charts.begin(), at.charts.end(), [](const auto& c) { return c.omega.has_value(); });
    bool any_pi = std::any_of(at.charts.begin(), at.charts.end(), [](const auto& c) { return c.pi.has_value(); });
    if (any_omega) rep.add(symbolic_all("omega_closed", closed, tol));
    if (any_pi) rep.add(symbolic_all("pi_schouten_zero", jacobi, tol));
  }
  rep.add(run_samples("nondegenerate", samples, 0.5, seed, names, [&](std::int64_t k, CounterRng& rng) {
    SampleResult res;
    int ci;
    auto z = draw(k, rng, ci);
    if (!z) {
      res.ok = false;
      res.note = "no sample";
      return res;
    }
    res.point = *z;
    const auto& c = at.charts[static_cast<std::size_t>(ci)];
    int rank = numeric_rank(structures[static_cast<std::size_t>(ci)](*z).matrix(), 1e-8);
    res.residual = c.chart->dim() - rank;
    res.note = c.name + ": rank " + std::to_string(rank);
    return res;
  }));
  rep.checks.back().notes = "residual = chart dimension - rank of pi_Z";

  // (5) injectivity over the open leaf
  if (at.fiber) {
    rep.add(run_samples("injectivity", samples, 0.5, seed, names, [&](std::int64_t k, CounterRng& rng) {
      SampleResult res;
      int ci;
      auto z = draw(k, rng, ci);
      if (!z) {
        res.ok = false;
        res.note = "no sample";
        return res;
      }
      std::vector<Point> pts;
      try {
        pts = fiber_enumerate(at, at.charts[0].phi(*z), 3);
      } catch (const ExceptionalFiberError&) {
        res.ok = false;
        res.note = "exceptional fiber";
        return res;
      }
      pts.push_back(*z);
      res.point = *z;
      for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
          if (!at.same_class(pts[i], pts[j], 1e-9)) {
            res.residual = 1;
            res.point = pts[j];
            res.note = "preimages in distinct classes";
          }
      return res;
    }));
    rep.checks.back().notes = "residual 1 when two preimages of one point are not class-equal";
  }

  // transitions
  if (!at.transitions.empty()) {
    const int nt = static_cast<int>(at.transitions.size());
    auto overlap = [&](const ChartTransition& tr, CounterRng& rng) -> std::optional<Point> {
      for (int attempt = 0; attempt < 20; ++attempt) {
        auto z = at.charts[static_cast<std::size_t>(tr.from)].sample(rng);
        if (!z) continue;
        bool small = false;
        for (const auto& v : *z) small = small || std::abs(v) < 0.05;
        if (small) continue;
        try {
          auto w = tr.map(*z);
          if (max_abs_vec(w) < 1e6) return z;
        } catch (const EvalError&) {
        }
      }
      return std::nullopt;
    };
    const std::int64_t ts = std::max<std::int64_t>(100, samples);
    rep.add(run_samples("transition_compatibility", ts, 1e-10, seed, names, [&](std::int64_t k, CounterRng& rng) {
      SampleResult res;
      const auto& tr = at.transitions[static_cast<std::size_t>(k % nt)];
      auto z = overlap(tr, rng);
      if (!z) {
        res.ok = false;
        res.note = "no overlap point";
        return res;
      }
      res.point = *z;
      auto m1 = at.charts[static_cast<std::size_t>(tr.from)].phi(*z);
      auto m2 = at.charts[static_cast<std::size_t>(tr.to)].phi(tr.map(*z));
      res.residual = diff_abs(m1, m2) / std::max(1.0, max_abs_vec(m1));
      res.note = std::to_string(tr.from) + "->" + std::to_string(tr.to);
      return res;
    }));
    rep.add(run_samples("transition_inverse", ts, 1e-10, seed, names, [&](std::int64_t k, CounterRng& rng) {
      SampleResult res;
      const auto& tr = at.transitions[static_cast<std::size_t>(k % nt)];
      auto back = std::find_if(at.transitions.begin(), at.transitions.end(),
                               [&](const ChartTransition& t) { return t.from == tr.to && t.to == tr.from; });
      auto z = overlap(tr, rng);
      if (!z || back == at.transitions.end()) {
        res.ok = false;
        res.note = "no overlap point or no reverse transition";
        return res;
      }
      res.point = *z;
      res.residual = diff_abs(back->map.compose(tr.map)(*z), *z) / std::max(1.0, max_abs_vec(*z));
      return res;
    }));
  }

  // identifications
  for (const auto& d : at.deck) {
    const auto& c0 = at.charts.at(0);
    if (c0.omega) {
      std::vector<Expr> sub = vars_of(d.chart);
      sub.pop_back();
      DifferentialForm w = DifferentialForm::zero(d.chart, 2);
      for (const auto& [idx, e] : c0.omega->coeff) w.set(idx, substitute(e, sub));
      DifferentialForm pb = pullback(w, d.map);
      const int shift_index = d.chart->dim() - 1;
      std::vector<Expr> es;
      std::set<MultiIndex> keys;
      for (const auto& [idx, e] : pb.coeff) keys.insert(idx);
      for (const auto& [idx, e] : w.coeff) keys.insert(idx);
      for (const auto& idx : keys) {
        if (std::find(idx.begin(), idx.end(), shift_index) != idx.end()) continue;  // c is constant
        es.push_back(pb.get(idx) - w.get(idx));
      }
      rep.add(symbolic_all("deck_" + d.name + "_preserves_omega", es, tol));
    }
    rep.add(run_samples("deck_" + d.name + "_preserves_phi", samples, tol, seed, names,
                        [&](std::int64_t, CounterRng& rng) {
                          SampleResult res;
                          auto z = c0.sample(rng);
                          if (!z) {
                            res.ok = false;
                            return res;
                          }
                          res.point = *z;
                          Point ext = *z;
                          ext.push_back(d.shift);
                          auto moved = d.map(ext);
                          moved.pop_back();
                          auto m = c0.phi(*z);
                          res.residual = diff_abs(c0.phi(moved), m) / std::max(1.0, max_abs_vec(m));
                          return res;
                        }));
  }

  for (const auto& w : at.warnings) rep.metadata["warning"] += (rep.metadata["warning"].empty() ? "" : "; ") + w;
  rep.metadata["flags"] = std::string("etale=") + (at.flags.etale ? "1" : "0") + " covering=" +
                          (at.flags.covering ? "1" : "0") + " full=" + (at.flags.full ? "1" : "0");
  for (const auto& [k, v] : at.metadata) rep.metadata[k] = v;
  return rep;
}

// ---------------------------------------------------------------- Springer

namespace {

std::vector<int> block_sizes(const ParabolicData& p) {
  std::vector<int> sizes;
  for (std::size_t i = 0; i < p.block.size(); ++i) {
    if (i == 0 || p.block[i] != p.block[i - 1])
      sizes.push_back(1);
    else
      ++sizes.back();
  }
  return sizes;
}

struct SlicePositions {
  std::vector<std::pair<int, int>> lower, upper;
};

SlicePositions slice_positions(const ParabolicData& p) {
  SlicePositions s;
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j) {
      if (p.block[i] > p.block[j]) s.lower.emplace_back(i, j);
      if (p.block[i] < p.block[j]) s.upper.emplace_back(i, j);
    }
  return s;
}

ExprMatrix sub_block(const ExprMatrix& a, int r0, int r1, int c0, int c1) {
  ExprMatrix out;
  for (int i = r0; i < r1; ++i) {
    std::vector<Expr> row;
    for (int j = c0; j < c1; ++j) row.push_back(a[i][j]);
    out.push_back(std::move(row));
  }
  return out;
}

ExprMatrix rect_mul(const ExprMatrix& a, const ExprMatrix& b) {
  const std::size_t r = a.size(), k = b.size(), c = b.empty() ? 0 : b[0].size();
  ExprMatrix out(r, std::vector<Expr>(c, Expr(0)));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      std::vector<Expr> t;
      for (std::size_t q = 0; q < k; ++q)
        if (!a[i][q].is_zero_const() && !b[q][j].is_zero_const()) t.push_back(a[i][q] * b[q][j]);
      out[i][j] = Expr::add(t);
    }
  return out;
}

// g = B n, B block upper triangular, n block lower unipotent.
struct ExprUL {
  ExprMatrix b, n;
};

ExprUL expr_ul(const ExprMatrix& g, const std::vector<int>& sizes) {
  const int dim = static_cast<int>(g.size());
  ExprUL r{expr_zero(dim), expr_identity(dim)};
  ExprMatrix s = g;
  int end = dim;
  for (int k = static_cast<int>(sizes.size()) - 1; k >= 1; --k) {
    const int o = end - sizes[static_cast<std::size_t>(k)];
    ExprMatrix s11 = sub_block(s, 0, o, 0, o), s12 = sub_block(s, 0, o, o, end);
    ExprMatrix s21 = sub_block(s, o, end, 0, o), s22 = sub_block(s, o, end, o, end);
    ExprMatrix n21 = rect_mul(expr_inverse(s22), s21);
    for (int i = o; i < end; ++i)
      for (int j = 0; j < o; ++j) r.n[i][j] = n21[i - o][j];
    for (int i = 0; i < end; ++i)
      for (int j = o; j < end; ++j) r.b[i][j] = s[i][j];
    ExprMatrix corr = rect_mul(s12, n21);
    for (int i = 0; i < o; ++i)
      for (int j = 0; j < o; ++j) s11[i][j] = s11[i][j] - corr[i][j];
    s = s11;
    end = o;
  }
  for (int i = 0; i < end; ++i)
    for (int j = 0; j < end; ++j) r.b[i][j] = s[i][j];
  return r;
}

struct NumUL {
  Mat b, n;
};

NumUL num_ul(const Mat& g, const std::vector<int>& sizes) {
  const int dim = static_cast<int>(g.rows());
  NumUL r{Mat::Zero(dim, dim), Mat::Identity(dim, dim)};
  Mat s = g;
  int end = dim;
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  for (int k = static_cast<int>(sizes.size()) - 1; k >= 1; --k) {
    const int m = sizes[static_cast<std::size_t>(k)], o = end - m;
    Mat s22 = s.block(o, o, m, m);
    if (std::abs(s22.determinant()) < 1e-8 * std::pow(scale, m))
      throw SliceError("springer_slice: the class leaves the big-cell slice");
    Mat n21 = s22.inverse() * s.block(o, 0, m, o);
    r.n.block(o, 0, m, o) = n21;
    r.b.block(0, o, end, m) = s.block(0, o, end, m);
    Mat s11 = s.block(0, 0, o, o) - s.block(0, o, o, m) * n21;
    s = s11;
    end = o;
  }
  r.b.block(0, 0, end, end) = s;
  return r;
}

QMatrix springer_element(const ParabolicData& p, const SlicePositions& pos, NilpotentRep& rep) {
  QMatrix x(p.n, p.n);
  for (auto [i, j] : pos.upper) x(i, j) = Rational(1);
  for (int attempt = 0; attempt < 32; ++attempt) {
    rep = make_nilpotent(x);
    if (richardson_certificate(p, rep).ok()) return x;
    CounterRng rng(0x51ab, static_cast<std::uint64_t>(attempt));
    for (auto [i, j] : pos.upper) x(i, j) = Rational(rng.integer(1, 5));
  }
  throw std::invalid_argument("springer: no Richardson element found in the nilradical");
}

}  // namespace

NilpotentRep springer_richardson(const ParabolicData& p) {
  NilpotentRep rep;
  springer_element(p, slice_positions(p), rep);
  return rep;
}

Point springer_slice(const ParabolicData& p, const Mat& g, const Mat& u) {
  NumUL ul = num_ul(g, block_sizes(p));
  Mat up = ul.b.inverse() * u * ul.b;
  auto pos = slice_positions(p);
  Point z;
  for (auto [i, j] : pos.lower) z.push_back(ul.n(i, j));
  for (auto [i, j] : pos.upper) z.push_back(up(i, j));
  return z;
}

bool springer_class_equal(const ParabolicData& p, const Mat& g1, const Mat& u1, const Mat& g2, const Mat& u2,
                          double tol) {
  Mat b = g2 * g1.inverse();
  const double scale = std::max({1.0, b.cwiseAbs().maxCoeff(), u1.cwiseAbs().maxCoeff()});
  for (int i = 0; i < p.n; ++i)
    for (int j = 0; j < p.n; ++j)
      if (p.block[i] > p.block[j] && std::abs(b(i, j)) > tol * scale) return false;
  Mat moved = b * u1 * b.inverse();
  return (moved - u2).cwiseAbs().maxCoeff() <= tol * std::max(scale, u2.cwiseAbs().maxCoeff());
}

ResolutionAtlas springer(int n, const std::vector<int>& levi_roots) {
  if (n < 2 || n > 3) throw std::invalid_argument("springer: unsupported n = " + std::to_string(n));
  ParabolicData pd = parabolic(n, levi_roots);
  SlicePositions pos = slice_positions(pd);
  NilpotentRep rich;
  QMatrix x = springer_element(pd, pos, rich);

  auto cot = catalog("cotangent-sl" + std::to_string(n));
  ResolutionAtlas at;
  at.family = "springer";
  at.params["n"] = std::to_string(n);
  std::string levi;
  for (int r : levi_roots) levi += (levi.empty() ? "" : ",") + std::to_string(r);
  at.params["levi"] = levi.empty() ? "borel" : levi;
  at.ambient = cot->base;
  at.pi_m = *cot->base_pi;

  std::vector<std::string> names;
  for (auto [i, j] : pos.lower) names.push_back("n" + std::to_string(i + 1) + std::to_string(j + 1));
  for (auto [i, j] : pos.upper) names.push_back("u" + std::to_string(i + 1) + std::to_string(j + 1));
  ResolutionChart c;
  c.name = "big_cell";
  c.chart = real_chart("springer_slice", names);
  const int nl = static_cast<int>(pos.lower.size());
  ExprMatrix G = expr_identity(n), U = expr_zero(n);
  for (int k = 0; k < nl; ++k) G[pos.lower[k].first][pos.lower[k].second] = c.chart->coord(k);
  for (std::size_t k = 0; k < pos.upper.size(); ++k)
    U[pos.upper[k].first][pos.upper[k].second] = c.chart->coord(nl + static_cast<int>(k));
  c.phi = ChartMap(c.chart, at.ambient, flatten(expr_inverse(G) * U * G));

  // Leaf closure: nilpotent, with rank bounded by the Richardson element.
  ExprMatrix M = matrix_of_vars(at.ambient->vars, 0, n), P = M;
  for (int k = 1; k <= n; ++k) {
    at.closure_generators.push_back(expr_trace(P));
    P = P * M;
  }
  const int r = exact_rank(x);
  if (r < n - 1) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::vector<int>> subsets;
    for (int mask = 0; mask < (1 << n); ++mask)
      if (__builtin_popcount(static_cast<unsigned>(mask)) == r + 1) {
        std::vector<int> s;
        for (int q = 0; q < n; ++q)
          if (mask & (1 << q)) s.push_back(q);
        subsets.push_back(s);
      }
    for (const auto& rows : subsets)
      for (const auto& cols : subsets) {
        ExprMatrix m;
        for (int i : rows) {
          std::vector<Expr> row;
          for (int j : cols) row.push_back(M[i][j]);
          m.push_back(row);
        }
        at.closure_generators.push_back(expr_det(m));
      }
  }

  // pi_Z from reducing the cotangent structure along G x n with quotient map
  // (g, u) -> (n, B^{-1} u B), g = B n; t = phi o Phi is anti-Poisson.
  const ChartPtr& T = cot->total;
  const int nn = n * n;
  std::vector<Expr> gens;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (pd.block[i] >= pd.block[j]) gens.push_back(T->coord(nn + i * n + j));
  Submanifold N = cut_out(T, gens, nn + static_cast<int>(pos.upper.size()));
  ExprMatrix Gt = matrix_of_vars(T->vars, 0, n), Ut = matrix_of_vars(T->vars, nn, n);
  ExprUL ul = expr_ul(Gt, block_sizes(pd));
  ExprMatrix Up = expr_inverse(ul.b) * Ut * ul.b;
  std::vector<Expr> phi_comps;
  for (auto [i, j] : pos.lower) phi_comps.push_back(ul.n[i][j]);
  for (auto [i, j] : pos.upper) phi_comps.push_back(Up[i][j]);
  ChartMap Phi(T, c.chart, phi_comps);
  PointwiseField piq = cot->poisson();
  const int dz = c.chart->dim();
  c.pi_pointwise = [=](const Point& z) {
    Point xt(static_cast<std::size_t>(2 * nn), cplx{});
    for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i * n + i)] = 1.0;
    for (int k = 0; k < nl; ++k) xt[static_cast<std::size_t>(pos.lower[k].first * n + pos.lower[k].second)] = z[k];
    for (std::size_t k = 0; k < pos.upper.size(); ++k)
      xt[static_cast<std::size_t>(nn + pos.upper[k].first * n + pos.upper[k].second)] = z[nl + k];
    MultivectorValue at_x = piq(xt);
    PointwiseField cached = [at_x](const Point&) { return at_x; };
    MultivectorValue out;
    out.dim = dz;
    out.degree = 2;
    for (int i = 0; i < dz; ++i)
      for (int j = i + 1; j < dz; ++j) {
        auto red = reduce_at(cached, 2, N, Phi, xt, {Vec::Unit(dz, i), Vec::Unit(dz, j)}, ReductionSign::Feedback,
                             static_cast<std::uint64_t>(i * dz + j), 1e-7);
        cplx v = -red.value;
        if (std::abs(v) > 0) out.coeff[{i, j}] = v;
      }
    return out;
  };
  c.sample = [dz](CounterRng& rng) -> std::optional<Point> {
    Point p(static_cast<std::size_t>(dz));
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
    return p;
  };
  at.charts.push_back(c);
  at.flags = {true, true, true};
  at.class_equal = [](const Point& a, const Point& b, double tol) {
    return diff_abs(a, b) <= tol * std::max({1.0, max_abs_vec(a), max_abs_vec(b)});
  };
  at.representative = [](const Point& a) { return a; };
  at.metadata["richardson_element"] = x.to_string();
  at.metadata["jordan_type"] = [&] {
    std::string s;
    for (int b : rich.jordan) s += (s.empty() ? "" : ",") + std::to_string(b);
    return s;
  }();
  at.metadata["slice"] = "g block lower unipotent (big cell), u in the nilradical";
  at.metadata["fiber_triviality"] = "untested";
  return at;
}

// ---------------------------------------------------------------- Grothendieck

namespace {

ExprMatrix groth_mu(const ChartPtr& c, const Rational& tau) {
  Expr nu = c->coord(0), w = c->coord(1);
  ExprMatrix g = {{Expr(1), Expr(0)}, {nu, Expr(1)}};
  ExprMatrix gi = {{Expr(1), Expr(0)}, {-nu, Expr(1)}};
  ExprMatrix tu = {{Expr(tau), Expr(tau) * w}, {Expr(0), Expr(Rational(1) / tau)}};
  return gi * tu * g;
}

}  // namespace

ResolutionAtlas grothendieck_sl2(const Rational& tau) {
  if (tau == Rational(0)) throw std::invalid_argument("grothendieck_sl2: tau must be nonzero");
  auto conj = catalog("conjugation-sl2");
  ResolutionAtlas at;
  at.family = "grothendieck";
  at.params["n"] = "2";
  at.params["tau"] = tau.to_string();
  at.ambient = conj->base;
  at.pi_m = *conj->base_pi;
  if (tau == Rational(1) || tau == Rational(-1))
    at.warnings.push_back("tau = " + tau.to_string() + " is not regular; the leaf structure of F_t changes");

  ResolutionChart c;
  c.name = "big_cell";
  c.chart = real_chart("grothendieck_slice", {"nu", "w"});
  c.phi = ChartMap(c.chart, at.ambient, flatten(groth_mu(c.chart, tau)));
  ExprMatrix H = matrix_of_vars(at.ambient->vars, 0, 2);
  at.closure_generators = {expr_trace(H) - Expr(tau + Rational(1) / tau), expr_det(H) - Expr(1)};

  // pi_Z = f d/dnu ^ d/dw with f fitted to the Evens-Lu structure by least squares.
  PointwiseField pim = pointwise(at.pi_m);
  ChartMap phi = c.phi;
  c.pi_pointwise = [phi, pim](const Point& z) {
    Mat j = phi.jacobian_at(z);
    MultivectorValue want = pim(phi(z));
    cplx num = 0;
    double den = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b) {
        cplx wab = j(a, 0) * j(b, 1) - j(b, 0) * j(a, 1);
        auto it = want.coeff.find({a, b});
        if (it != want.coeff.end()) num += std::conj(wab) * it->second;
        den += std::norm(wab);
      }
    MultivectorValue out;
    out.dim = 2;
    out.degree = 2;
    out.coeff[{0, 1}] = den > 0 ? num / den : cplx{};
    return out;
  };
  c.sample = [](CounterRng& rng) -> std::optional<Point> {
    return Point{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
  };
  at.charts.push_back(c);
  at.flags = {true, false, false};
  at.metadata["mu"] = "g^{-1} (t u) g";
  return at;
}

Report grothendieck_invariants(const Rational& tau, std::int64_t samples, double tol, std::uint64_t seed) {
  ResolutionAtlas at = grothendieck_sl2(tau);
  Report rep;
  rep.campaign_id = "grothendieck-invariants";
  rep.target = "grothendieck tau=" + tau.to_string();
  rep.seed = seed;
  const auto& c = at.charts[0];
  Expr tr = c.phi.comps()[0] + c.phi.comps()[3];
  const double want = (tau + Rational(1) / tau).to_double();
  rep.add(symbolic_record("trace_invariant_symbolic", tr - Expr(tau + Rational(1) / tau), tol));
  Tape trt({tr});
  rep.add(run_samples("trace_invariant", samples, 1e-12, seed, c.chart->names(), [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    res.point = *c.sample(rng);
    res.residual = std::abs(trt.eval(res.point)[0] - want);
    return res;
  }));
  const ChartPtr& B = at.ambient;
  Submanifold tU = cut_out(B, {B->coord(0) - Expr(tau), B->coord(2), B->coord(3) - Expr(Rational(1) / tau)}, 1);
  CheckRecord co = is_coisotropic(at.pi_m, tU, samples, tol, seed);
  co.name = "tU_coisotropic";
  rep.add(co);
  for (const auto& w : at.warnings) rep.metadata["warning"] = w;
  return rep;
}

// ---------------------------------------------------------------- Kleinian

namespace {

using IMat = std::vector<std::vector<int>>;

IMat imul(const IMat& a, const IMat& b) {
  IMat r(a.size(), std::vector<int>(b[0].size(), 0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

struct MonoChart {
  std::string name;
  IMat phi;  // 3 x 2: exponents of (x, y, z) in (u, v)
  IMat inv;  // 2 x 3: exponents of (u, v) in (x, y, z)
};

// Charts of the minimal resolution of xy = z^l. Blowing up x'y' = w^m at the
// origin gives the charts x = u, y = u^(m-1) v^m, z = u v and its mirror; the
// third chart x = x' w, y = y' w, z = w carries x'y' = w^(m-2).
std::vector<MonoChart> kleinian_charts(int l) {
  std::vector<MonoChart> out;
  IMat F = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, G = F;
  const IMat pc = {{1, 0, 1}, {0, 1, 1}, {0, 0, 1}}, qc = {{1, 0, -1}, {0, 1, -1}, {0, 0, 1}};
  int m = l, level = 0;
  auto push = [&](const std::string& name, const IMat& p, const IMat& q) {
    out.push_back({name + std::to_string(level), imul(F, p), imul(q, G)});
  };
  while (m >= 1) {
    if (m == 1) {
      push("S", {{1, 0}, {0, 1}, {1, 1}}, {{1, 0, 0}, {0, 1, 0}});
      break;
    }
    push("X", {{1, 0}, {m - 1, m}, {1, 1}}, {{1, 0, 0}, {-1, 0, 1}});
    push("Y", {{m - 1, m}, {1, 0}, {1, 1}}, {{0, 1, 0}, {0, -1, 1}});
    m -= 2;
    if (m <= 0) break;
    F = imul(F, pc);
    G = imul(qc, G);
    ++level;
  }
  for (const auto& c : out) {
    IMat id = imul(c.inv, c.phi);
    if (id != IMat{{1, 0}, {0, 1}}) throw std::logic_error("kleinian chart " + c.name + " is not invertible");
  }
  return out;
}

Expr monomial(const Expr& u, int a, const Expr& v, int b) {
  auto pw = [](const Expr& e, int k) {
    if (k == 0) return Expr(1);
    return k > 0 ? Expr::pow(e, k) : Expr::recip(Expr::pow(e, -k));
  };
  return pw(u, a) * pw(v, b);
}

struct Laurent {
  Rational c;
  int p = 0, q = 0;
  bool operator==(const Laurent&) const = default;
};

// f with pi_{C^3} = phi_*(f d/du ^ d/dv), exact on all coordinate pairs.
Laurent chart_bivector(const MonoChart& c, int l) {
  struct Comp {
    int i, j;
    Rational coef;
    std::vector<int> e;  // exponents in (x, y, z)
  };
  const std::vector<Comp> pis = {{0, 1, Rational(-l), {0, 0, l - 1}}, {1, 2, Rational(1), {0, 1, 0}},
                                 {0, 2, Rational(-1), {1, 0, 0}}};
  std::optional<Laurent> f;
  for (const auto& pc : pis) {
    int ep = 0, eq = 0;
    for (int k = 0; k < 3; ++k) {
      ep += pc.e[k] * c.phi[k][0];
      eq += pc.e[k] * c.phi[k][1];
    }
    const auto& pi = c.phi[pc.i];
    const auto& pj = c.phi[pc.j];
    int det = pi[0] * pj[1] - pi[1] * pj[0];
    if (det == 0) throw std::logic_error("kleinian chart " + c.name + ": degenerate coordinate pair");
    Laurent g{pc.coef / Rational(det), ep - (pi[0] + pj[0] - 1), eq - (pi[1] + pj[1] - 1)};
    if (f && !(*f == g)) throw std::logic_error("kleinian chart " + c.name + ": inconsistent bivector");
    f = g;
  }
  return *f;
}

ChartPtr c3_chart() {
  VarTable v;
  v.add("x", VarKind::Complex);
  v.add("y", VarKind::Complex);
  v.add("z", VarKind::Complex);
  return make_chart("c3", v);
}

}  // namespace

MultiVectorField kleinian_ambient_bivector(const ChartPtr& c3, int l) {
  MultiVectorField p = MultiVectorField::zero(c3, 2);
  Expr x = c3->coord(0), y = c3->coord(1), z = c3->coord(2);
  p.set({0, 1}, Expr(-l) * Expr::pow(z, l - 1));
  p.set({1, 2}, y);
  p.set({0, 2}, -x);
  return p;
}

ResolutionAtlas kleinian(int l) {
  if (l != 2 && l != 3) throw std::invalid_argument("kleinian: unsupported l = " + std::to_string(l));
  ResolutionAtlas at;
  at.family = "kleinian";
  at.params["l"] = std::to_string(l);
  at.ambient = c3_chart();
  at.pi_m = kleinian_ambient_bivector(at.ambient, l);
  Expr x = at.ambient->coord(0), y = at.ambient->coord(1), z = at.ambient->coord(2);
  at.closure_generators = {x * y - Expr::pow(z, l)};

  auto mono = kleinian_charts(l);
  for (const auto& mc : mono) {
    ResolutionChart c;
    c.name = mc.name;
    VarTable v;
    v.add("u", VarKind::Complex);
    v.add("v", VarKind::Complex);
    c.chart = make_chart("kleinian_" + mc.name, v);
    Expr u = c.chart->coord(0), w = c.chart->coord(1);
    std::vector<Expr> comps;
    for (int k = 0; k < 3; ++k) comps.push_back(monomial(u, mc.phi[k][0], w, mc.phi[k][1]));
    c.phi = ChartMap(c.chart, at.ambient, comps);
    Laurent f = chart_bivector(mc, l);
    MultiVectorField pz = MultiVectorField::zero(c.chart, 2);
    pz.set({0, 1}, Expr(f.c) * monomial(u, f.p, w, f.q));
    c.pi = pz;
    c.sample = [](CounterRng& rng) -> std::optional<Point> {
      return Point{{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)}, {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)}};
    };
    at.charts.push_back(c);
  }
  for (std::size_t i = 0; i < mono.size(); ++i)
    for (std::size_t j = 0; j < mono.size(); ++j) {
      if (i == j) continue;
      IMat t = imul(mono[j].inv, mono[i].phi);
      const auto& src = at.charts[i].chart;
      Expr u = src->coord(0), w = src->coord(1);
      ChartTransition tr;
      tr.from = static_cast<int>(i);
      tr.to = static_cast<int>(j);
      tr.map = ChartMap(src, at.charts[j].chart, {monomial(u, t[0][0], w, t[0][1]), monomial(u, t[1][0], w, t[1][1])});
      at.transitions.push_back(tr);
    }
  at.flags = {true, true, true};
  at.metadata["charts"] = std::to_string(mono.size());
  return at;
}

KleinianExceptional kleinian_exceptional(int l) {
  if (l != 2 && l != 3) throw std::invalid_argument("kleinian: unsupported l = " + std::to_string(l));
  auto mono = kleinian_charts(l);
  const int nc = static_cast<int>(mono.size());
  KleinianExceptional ex;
  for (const auto& c : mono) ex.chart_names.push_back(c.name);

  auto exceptional = [&](int ci, int coord) {
    for (int r = 0; r < 3; ++r)
      if (mono[ci].phi[r][coord] <= 0) return false;
    return true;
  };
  // union-find over (chart, coordinate) lines mapped to the origin
  std::vector<int> parent(static_cast<std::size_t>(2 * nc));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  for (int i = 0; i < nc; ++i)
    for (int c = 0; c < 2; ++c) {
      if (!exceptional(i, c)) continue;
      for (int j = 0; j < nc; ++j) {
        if (j == i) continue;
        IMat t = imul(mono[j].inv, mono[i].phi);
        if (t[0][c] < 0 || t[1][c] < 0) continue;  // generic point of the line is outside chart j
        std::vector<int> hit;
        for (int r = 0; r < 2; ++r)
          if (t[r][c] > 0) hit.push_back(r);
        if (hit.size() == 1 && exceptional(j, hit[0])) parent[find(2 * i + c)] = find(2 * j + hit[0]);
      }
    }

  // crossings: chart origins on two lines
  std::vector<int> origin_chart;
  for (int i = 0; i < nc; ++i)
    if (exceptional(i, 0) && exceptional(i, 1) && find(2 * i) != find(2 * i + 1)) origin_chart.push_back(i);

  // label the curves along the chain, starting from the first chart
  std::map<int, int> label;
  auto adjacent = [&](int ra, int rb) {
    for (int i : origin_chart) {
      int a = find(2 * i), b = find(2 * i + 1);
      if ((a == ra && b == rb) || (a == rb && b == ra)) return true;
    }
    return false;
  };
  std::vector<int> roots;
  for (int i = 0; i < nc; ++i)
    for (int c = 0; c < 2; ++c)
      if (exceptional(i, c) && std::find(roots.begin(), roots.end(), find(2 * i + c)) == roots.end())
        roots.push_back(find(2 * i + c));
  ex.curve_count = static_cast<int>(roots.size());
  int next = 1;
  std::vector<int> queue;
  if (!roots.empty()) {
    label[roots[0]] = next++;
    queue.push_back(roots[0]);
  }
  for (std::size_t q = 0; q < queue.size(); ++q)
    for (int r : roots)
      if (!label.count(r) && adjacent(queue[q], r)) {
        label[r] = next++;
        queue.push_back(r);
      }
  for (int r : roots)
    if (!label.count(r)) label[r] = next++;

  ex.curve_of.assign(static_cast<std::size_t>(nc), std::vector<int>(2, -1));
  for (int i = 0; i < nc; ++i)
    for (int c = 0; c < 2; ++c)
      if (exceptional(i, c)) ex.curve_of[i][c] = label[find(2 * i + c)];

  // distinct crossing points (origins identified through transitions)
  std::vector<int> distinct;
  for (int i : origin_chart) {
    bool same = false;
    for (int j : distinct) {
      IMat t = imul(mono[j].inv, mono[i].phi);
      bool to_origin = true;
      for (int r = 0; r < 2; ++r) {
        bool pos = false;
        for (int c = 0; c < 2; ++c) {
          if (t[r][c] < 0) to_origin = false;
          pos = pos || t[r][c] > 0;
        }
        to_origin = to_origin && pos;
      }
      same = same || to_origin;
    }
    if (same) continue;
    distinct.push_back(i);
    int a = ex.curve_of[i][0], b = ex.curve_of[i][1];
    ex.intersections[{std::min(a, b), std::max(a, b)}] += 1;
  }

  // strict transforms of L_k = (s^k, s^(l-k), s)
  for (int k = 1; k < l; ++k) {
    std::set<int> met;
    bool transversal = true;
    const std::vector<int> e3 = {k, l - k, 1};
    for (int i = 0; i < nc; ++i) {
      int e[2] = {0, 0};
      for (int r = 0; r < 2; ++r)
        for (int q = 0; q < 3; ++q) e[r] += mono[i].inv[r][q] * e3[q];
      if (e[0] < 0 || e[1] < 0) continue;  // limit outside this chart
      int on = 0;
      for (int r = 0; r < 2; ++r)
        if (e[r] > 0 && ex.curve_of[i][r] > 0) {
          met.insert(ex.curve_of[i][r]);
          ++on;
          if (e[r] != 1) transversal = false;
        }
      if (on != 1) transversal = false;
    }
    ex.strict_meets.emplace_back(met.begin(), met.end());
    ex.strict_transversal.push_back(transversal && !met.empty());
  }
  return ex;
}

Report kleinian_invariants(int l, std::int64_t samples, double tol, std::uint64_t seed) {
  ResolutionAtlas at = kleinian(l);
  KleinianExceptional ex = kleinian_exceptional(l);
  Report rep;
  rep.campaign_id = "kleinian-invariants";
  rep.target = "kleinian l=" + std::to_string(l);
  rep.seed = seed;
  std::vector<Expr> sq;
  for (const auto& [idx, e] : schouten(at.pi_m, at.pi_m).coeff) sq.push_back(e);
  rep.add(symbolic_all("schouten_zero", sq, tol));
  const Expr chi = at.closure_generators[0];
  for (int k = 0; k < 3; ++k) {
    const char* nm[] = {"casimir_x", "casimir_y", "casimir_z"};
    rep.add(symbolic_record(nm[k], apply(at.pi_m, {chi, at.ambient->coord(k)}), tol));
  }
  rep.add(exact_record("curve_count", ex.curve_count == l - 1, std::abs(ex.curve_count - (l - 1)),
                       std::to_string(ex.curve_count) + " exceptional curves"));
  {
    bool ok = true;
    std::string note;
    for (const auto& [pr, cnt] : ex.intersections) {
      note += "C" + std::to_string(pr.first) + "-C" + std::to_string(pr.second) + ": " + std::to_string(cnt) + " point(s) ";
      ok = ok && pr.second == pr.first + 1 && cnt == 1;
    }
    ok = ok && static_cast<int>(ex.intersections.size()) == l - 2;
    rep.add(exact_record("chain_intersections", ok, ok ? 0 : 1, note.empty() ? "no crossings" : note));
  }
  {
    bool ok = true;
    std::string note;
    for (int k = 1; k < l; ++k) {
      const auto& m = ex.strict_meets[static_cast<std::size_t>(k - 1)];
      bool good = m == std::vector<int>{k} && ex.strict_transversal[static_cast<std::size_t>(k - 1)];
      ok = ok && good;
      note += "L" + std::to_string(k) + ":{";
      for (int c : m) note += "C" + std::to_string(c);
      note += ex.strict_transversal[static_cast<std::size_t>(k - 1)] ? "} transversal " : "} ";
    }
    rep.add(exact_record("strict_transforms", ok, ok ? 0 : 1, note));
  }
  // dphi along the curves kills their tangent and has rank one; it vanishes at crossings.
  std::vector<std::pair<int, int>> lines;
  for (int i = 0; i < static_cast<int>(at.charts.size()); ++i)
    for (int c = 0; c < 2; ++c)
      if (ex.curve_of[i][c] > 0) lines.emplace_back(i, c);
  rep.add(run_samples("kernel_along_curves", samples, tol, seed, {"u", "v"}, [&](std::int64_t k, CounterRng& rng) {
    SampleResult res;
    auto [ci, c] = lines[static_cast<std::size_t>(k % static_cast<std::int64_t>(lines.size()))];
    Point p(2);
    p[static_cast<std::size_t>(c)] = 0.0;
    p[static_cast<std::size_t>(1 - c)] = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    res.point = p;
    Mat j = at.charts[static_cast<std::size_t>(ci)].phi.jacobian_at(p);
    res.residual = j.col(1 - c).cwiseAbs().maxCoeff();
    if (numeric_rank(j) != 1) res.residual = std::max(res.residual, 1.0);
    res.note = at.charts[static_cast<std::size_t>(ci)].name;
    return res;
  }));
  {
    double worst = 0;
    int count = 0;
    for (int i = 0; i < static_cast<int>(at.charts.size()); ++i)
      if (ex.curve_of[i][0] > 0 && ex.curve_of[i][1] > 0) {
        worst = std::max(worst, max_abs(at.charts[static_cast<std::size_t>(i)].phi.jacobian_at(Point{0.0, 0.0})));
        ++count;
      }
    CheckRecord r = exact_record("dphi_vanishes_at_crossings", worst <= tol, worst,
                                 std::to_string(count) + " crossing charts");
    r.tol = tol;
    rep.add(r);
  }
  return rep;
}

// ---------------------------------------------------------------- rotated lines

Report crossing_compatibility_r2(double alpha) {
  Report rep;
  rep.campaign_id = "crossing-compatibility";
  std::ostringstream t;
  t.precision(17);
  t << "r2 rotated lines alpha=" << alpha;
  rep.target = t.str();
  double r = std::fmod(alpha, kPi);
  if (r < 0) r += kPi;
  const double c = std::min(r, kPi - r);
  const bool reachable = c < 1e-12;

  // Constraint lambda Im Z - alpha in pi Z: the smallest admissible |Im Z| at
  // lambda_n = 2^-n, found by scanning the branch index m.
  CheckRecord bound;
  bound.name = "constraint_bound";
  bound.tol = 1e-9;
  const int mmax = static_cast<int>(std::abs(alpha) / kPi) + 3;
  std::vector<double> mins;
  for (int n = 1; n <= 30; ++n) {
    const double lam = std::ldexp(1.0, -n);
    double best = INFINITY;
    for (int m = -mmax; m <= mmax; ++m) best = std::min(best, std::abs(alpha + m * kPi) / lam);
    mins.push_back(best);
    const double res = std::abs(best - c / lam) / std::max(1.0, c / lam);
    if (res > bound.max_residual) bound.max_residual = res;
    ++bound.samples_used;
  }
  bound.status = bound.max_residual <= bound.tol ? Status::Pass : Status::Fail;
  bound.notes = "min |Im Z| over branches equals c / lambda for lambda = 2^-n, n = 1..30";
  rep.add(bound);

  CheckRecord verdict;
  verdict.name = reachable ? "bounded_sequence" : "divergence";
  verdict.samples_used = static_cast<std::int64_t>(mins.size());
  if (reachable) {
    verdict.tol = 1e-9;
    verdict.max_residual = *std::max_element(mins.begin(), mins.end());
    verdict.notes = "Im Z_n = 0 satisfies the constraint for every lambda_n";
  } else {
    bool increasing = std::is_sorted(mins.begin(), mins.end());
    verdict.tol = 0.5;
    verdict.max_residual = increasing && mins.back() > 1e6 * c ? 0 : 1;
    verdict.notes = "|Im Z_n| >= c / lambda_n grows without bound";
  }
  verdict.status = verdict.max_residual <= verdict.tol ? Status::Pass : Status::Fail;
  rep.add(verdict);

  std::ostringstream cs;
  cs.precision(17);
  cs << c;
  rep.metadata["verdict"] = reachable ? "REACHABLE" : "OBSTRUCTED";
  rep.metadata["certificate_c"] = cs.str();
  return rep;
}

// ---------------------------------------------------------------- manifest

std::string atlas_manifest(const ResolutionAtlas& at) {
  std::ostringstream o;
  auto list = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  o << "family: " << at.family << "\n";
  for (const auto& [k, v] : at.params) o << "param " << k << ": " << v << "\n";
  o << "flags: etale=" << at.flags.etale << " covering=" << at.flags.covering << " full=" << at.flags.full << "\n";
  o << "ambient " << at.ambient->name << ": " << list(at.ambient->names()) << "\n";
  for (const auto& [idx, e] : at.pi_m.coeff) o << "  pi_M[" << idx[0] << "," << idx[1] << "] = " << print(e) << "\n";
  for (const auto& g : at.closure_generators) o << "  closure: " << print(g) << "\n";
  for (const auto& c : at.charts) {
    o << "chart " << c.name << " (" << c.chart->name << "): " << list(c.chart->names()) << "\n";
    for (std::size_t k = 0; k < c.phi.comps().size(); ++k)
      o << "  phi[" << at.ambient->names()[k] << "] = " << print(c.phi.comps()[k]) << "\n";
    if (c.omega)
      for (const auto& [idx, e] : c.omega->coeff) o << "  omega[" << idx[0] << "," << idx[1] << "] = " << print(e) << "\n";
    if (c.pi)
      for (const auto& [idx, e] : c.pi->coeff) o << "  pi[" << idx[0] << "," << idx[1] << "] = " << print(e) << "\n";
    if (!c.omega && !c.pi) o << "  pi: pointwise\n";
  }
  for (const auto& t : at.transitions) {
    o << "transition " << at.charts[static_cast<std::size_t>(t.from)].name << " -> "
      << at.charts[static_cast<std::size_t>(t.to)].name << ":";
    for (const auto& e : t.map.comps()) o << " " << print(e) << ";";
    o << "\n";
  }
  for (const auto& d : at.deck) o << "identification " << d.name << ": shift " << d.shift << "\n";
  for (const auto& w : at.warnings) o << "warning: " << w << "\n";
  return o.str();
}

}  // namespace pforge
