#include "pforge/apath.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>

namespace pforge {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFlat = 0.1;  // width of the constant zones of the bump profile

double edge(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }
double edge_d(double t) { return t > 0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }

double dist(const Point& a, const Point& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

Point scaled(const Point& p, double s) {
  Point r = p;
  for (auto& v : r) v *= s;
  return r;
}

Point axpy(const Point& x, double h, const std::vector<cplx>& k) {
  Point r = x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += h * k[i];
  return r;
}

cplx as_complex(const Point& p) { return {p[0].real(), p[1].real()}; }

}  // namespace

IntegrationFailure::IntegrationFailure(const std::string& what, double t, double d)
    : std::runtime_error(what), worst_time(t), drift(d) {}

double bump_profile(double u) {
  double t = std::clamp((u - kFlat) / (1 - 2 * kFlat), 0.0, 1.0);
  double a = edge(t), b = edge(1 - t);
  return a / (a + b);
}

double bump_profile_derivative(double u) {
  double t = (u - kFlat) / (1 - 2 * kFlat);
  if (t <= 0 || t >= 1) return 0.0;
  double a = edge(t), b = edge(1 - t);
  double da = edge_d(t), db = -edge_d(1 - t);
  return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b)) / (1 - 2 * kFlat);
}

CotangentPath flatten_ends(const CotangentPath& p) {
  CotangentPath q;
  q.a = [p](double u) { return Vec(bump_profile_derivative(u) * p.a(bump_profile(u))); };
  q.m = [p](double u) { return p.m(bump_profile(u)); };
  q.dm = [p](double u) { return scaled(p.dm(bump_profile(u)), bump_profile_derivative(u)); };
  q.flat_end = true;
  return q;
}

CotangentPath reparametrize_square(const CotangentPath& p) {
  CotangentPath q;
  q.a = [p](double u) { return Vec(2 * u * p.a(u * u)); };
  q.m = [p](double u) { return p.m(u * u); };
  q.dm = [p](double u) { return scaled(p.dm(u * u), 2 * u); };
  q.flat_end = p.flat_end;
  return q;
}

CotangentPath concatenate(const CotangentPath& p, const CotangentPath& q) {
  if (!p.flat_end || !q.flat_end) throw std::invalid_argument("concatenate needs flat-ended paths");
  if (dist(p.m(1.0), q.m(0.0)) > 1e-8) throw std::invalid_argument("concatenate: paths do not meet");
  CotangentPath c;
  c.a = [p, q](double u) { return Vec(u < 0.5 ? 2 * p.a(2 * u) : 2 * q.a(2 * u - 1)); };
  c.m = [p, q](double u) { return u < 0.5 ? p.m(2 * u) : q.m(2 * u - 1); };
  c.dm = [p, q](double u) { return u < 0.5 ? scaled(p.dm(2 * u), 2) : scaled(q.dm(2 * u - 1), 2); };
  c.flat_end = true;
  return c;
}

CotangentPath constant_path(const Point& m) {
  CotangentPath c;
  const auto n = static_cast<Eigen::Index>(m.size());
  c.a = [n](double) { return Vec(Vec::Zero(n)); };
  c.m = [m](double) { return m; };
  c.dm = [m](double) { return Point(m.size(), cplx{}); };
  c.flat_end = true;
  return c;
}

CotangentPath path_over(const MultiVectorField& pi_m, std::function<Point(double)> m,
                        std::function<Point(double)> dm) {
  PointwiseField pw = pointwise(pi_m);
  CotangentPath p;
  p.a = [pw, m, dm](double u) {
    Mat mm = pw(m(u)).matrix();
    return least_squares(mm.transpose(), to_vec(dm(u)));
  };
  p.m = std::move(m);
  p.dm = std::move(dm);
  return p;
}

CotangentPath integrate_base(const MultiVectorField& pi_m, std::function<Vec(double)> a, const Point& m0,
                             int steps) {
  PointwiseField pw = pointwise(pi_m);
  auto f = [&](double u, const Point& x) { return sharp(pw(x), to_std(a(u))); };
  auto nodes = std::make_shared<std::vector<Point>>();
  auto slopes = std::make_shared<std::vector<std::vector<cplx>>>();
  const double h = 1.0 / steps;
  Point x = m0;
  for (int k = 0; k <= steps; ++k) {
    const double u = k * h;
    nodes->push_back(x);
    slopes->push_back(f(u, x));
    if (k == steps) break;
    auto k1 = f(u, x);
    auto k2 = f(u + h / 2, axpy(x, h / 2, k1));
    auto k3 = f(u + h / 2, axpy(x, h / 2, k2));
    auto k4 = f(u + h, axpy(x, h, k3));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  auto segment = [steps](double u) {
    int k = std::clamp(static_cast<int>(u * steps), 0, steps - 1);
    return std::pair<int, double>{k, u * steps - k};
  };
  CotangentPath p;
  p.a = std::move(a);
  p.m = [nodes, slopes, segment, h](double u) {
    auto [k, s] = segment(u);
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
    Point r((*nodes)[k].size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = h00 * (*nodes)[k][i] + h10 * h * (*slopes)[k][i] + h01 * (*nodes)[k + 1][i] +
             h11 * h * (*slopes)[k + 1][i];
    return r;
  };
  p.dm = [nodes, slopes, segment, h](double u) {
    auto [k, s] = segment(u);
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s, d11 = 3 * s * s - 2 * s;
    Point r((*nodes)[k].size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = (d00 * (*nodes)[k][i] + d01 * (*nodes)[k + 1][i]) / h + d10 * (*slopes)[k][i] +
             d11 * (*slopes)[k + 1][i];
    return r;
  };
  return p;
}

Report validate_path(const CotangentPath& p, const MultiVectorField& pi_m, double tol) {
  Report rep;
  rep.campaign_id = "validate-path";
  rep.target = pi_m.chart->name;
  PointwiseField pw = pointwise(pi_m);
  rep.add(run_samples("path_ode", 50, tol, 0, pi_m.chart->names(), [&](std::int64_t k, CounterRng&) {
    SampleResult res;
    const double u = (static_cast<double>(k) + 0.5) / 50.0;
    res.point = p.m(u);
    auto want = sharp(pw(res.point), to_std(p.a(u)));
    res.residual = dist(p.dm(u), want);
    res.note = "u = " + std::to_string(u);
    return res;
  }));
  if (p.flat_end) {
    rep.add(run_samples("flat_ends", 20, 0.0, 0, pi_m.chart->names(), [&](std::int64_t k, CounterRng&) {
      SampleResult res;
      const double u = k < 10 ? 0.009 * static_cast<double>(k) : 1.0 - 0.009 * static_cast<double>(k - 10);
      res.point = p.m(u);
      res.residual = p.a(u).cwiseAbs().maxCoeff();
      return res;
    }));
  }
  return rep;
}

LiftResult lift_path(const ResolutionAtlas& atlas, const CotangentPath& p, const Point& z0,
                     const IntegratorConfig& cfg) {
  if (cfg.steps < 16) throw std::invalid_argument("lift_path: at least 16 steps");
  const auto& c = atlas.charts.at(0);
  const double start_gap = dist(c.phi(z0), p.m(0.0));
  if (start_gap > 1e-8)
    throw std::invalid_argument("lift_path: phi(z0) differs from m(0) by " + std::to_string(start_gap));
  PointwiseField st = c.structure();
  auto rhs = [&](double u, const Point& z) {
    Vec alpha = c.phi.jacobian_at(z).transpose() * p.a(u);
    return sharp(st(z), to_std(alpha));
  };
  auto project = [&](double u, Point& z) {
    for (int it = 0; it < 8; ++it) {
      Vec r = to_vec(p.m(u)) - to_vec(c.phi(z));
      if (r.cwiseAbs().maxCoeff() <= cfg.projection_tol) return;
      Vec dz = least_squares(c.phi.jacobian_at(z), r);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += dz(static_cast<Eigen::Index>(i));
    }
  };
  double worst_t = 0, worst_d = 0;
  for (int n = cfg.steps; n <= cfg.max_steps; n *= 2) {
    LiftResult res;
    res.steps = n;
    const double h = 1.0 / n;
    Point z = z0;
    if (cfg.keep_trace) res.trace.push_back({0.0, z, start_gap});
    for (int k = 0; k < n; ++k) {
      const double u = k * h;
      auto k1 = rhs(u, z);
      auto k2 = rhs(u + h / 2, axpy(z, h / 2, k1));
      auto k3 = rhs(u + h / 2, axpy(z, h / 2, k2));
      auto k4 = rhs(u + h, axpy(z, h, k3));
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += h / 6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (cfg.projection_tol > 0) project(u + h, z);
      const double d = dist(c.phi(z), p.m(u + h));
      if (d > res.max_drift) {
        res.max_drift = d;
        res.worst_time = u + h;
      }
      if (cfg.keep_trace) res.trace.push_back({u + h, z, d});
    }
    res.end = z;
    if (res.max_drift <= cfg.drift_tol) return res;
    worst_t = res.worst_time;
    worst_d = res.max_drift;
  }
  throw IntegrationFailure("lift_path: drift " + std::to_string(worst_d) + " at u = " + std::to_string(worst_t) +
                               " persists at the step floor",
                           worst_t, worst_d);
}

CotangentPath r2_loop(const Point& m0, int winding) {
  const double x0 = m0.at(0).real(), y0 = m0.at(1).real();
  const double r = std::hypot(x0, y0), th = std::atan2(y0, x0);
  if (r == 0) throw std::invalid_argument("r2_loop: base point at the origin");
  const double w = 2 * kPi * winding;
  auto m = [=](double u) { return Point{r * std::cos(th + w * u), r * std::sin(th + w * u)}; };
  auto dm = [=](double u) { return Point{-w * r * std::sin(th + w * u), w * r * std::cos(th + w * u)}; };
  return flatten_ends(path_over(*catalog("dazord")->base_pi, m, dm));
}

CotangentPath dazord_arrow_path(cplx w, cplx m0) {
  const cplx k = w * std::conj(m0);
  auto m = [=](double u) {
    cplx v = std::exp(u * k) * m0;
    return Point{v.real(), v.imag()};
  };
  auto dm = [=](double u) {
    cplx v = k * std::exp(u * k) * m0;
    return Point{v.real(), v.imag()};
  };
  return flatten_ends(path_over(*catalog("dazord")->base_pi, m, dm));
}

Point dazord_act(const Point& z, cplx w) {
  const double a = z.at(0).real(), b = z.at(1).real();
  const cplx m0 = b * std::exp(cplx(0, a * b));
  auto daz = catalog("dazord");
  auto prod = daz->product(Point{0.0, a, b, 0.0, w.real(), w.imag(), m0.real(), m0.imag()});
  auto rep = r2_representative(cplx(prod[0].real(), prod[1].real()), prod[2].real());
  return {rep.a, rep.b};
}

MonodromyResult loop_monodromy(const ResolutionAtlas& atlas, const Point& z0, int winding,
                               const IntegratorConfig& cfg) {
  MonodromyResult r;
  r.start = z0;
  Point m0 = atlas.charts.at(0).phi(z0);
  r.end = lift_path(atlas, r2_loop(m0, winding), z0, cfg).end;
  r.class_trivial = atlas.same_class(z0, r.end, 1e-5);
  r.fiber_match = INFINITY;
  if (atlas.fiber)
    for (const auto& p : fiber_enumerate(atlas, m0, std::abs(winding) + 8)) r.fiber_match = std::min(r.fiber_match, dist(p, r.end));
  return r;
}

namespace {

void require_plane(const ResolutionAtlas& atlas) {
  if (atlas.family != "r2") throw std::invalid_argument("action_consistency needs a plane atlas");
}

Point sample_plane(CounterRng& rng) { return {rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5)}; }
cplx sample_arrow(CounterRng& rng) { return {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)}; }

double class_residual(const ResolutionAtlas& atlas, const Point& got, const Point& want, double tol) {
  double d = dist(got, want);
  if (!atlas.same_class(got, want, tol)) d = std::max(d, 1.0);
  return d;
}

}  // namespace

Report action_consistency(const ResolutionAtlas& atlas, std::int64_t samples, double tol, std::uint64_t seed) {
  require_plane(atlas);
  Report rep;
  rep.campaign_id = "action-consistency";
  rep.target = "r2 k=" + atlas.params.at("k");
  rep.seed = seed;
  const auto& phi = atlas.charts.at(0).phi;
  auto names = atlas.charts.at(0).chart->names();
  rep.add(run_samples("unit_action", samples, tol, seed, names, [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    res.point = sample_plane(rng);
    auto end = lift_path(atlas, constant_path(phi(res.point)), res.point).end;
    res.residual = class_residual(atlas, end, res.point, tol);
    return res;
  }));
  rep.add(run_samples("action_matches_product", samples, tol, seed, names, [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    res.point = sample_plane(rng);
    cplx w = sample_arrow(rng);
    auto end = lift_path(atlas, dazord_arrow_path(w, as_complex(phi(res.point))), res.point).end;
    res.residual = class_residual(atlas, end, dazord_act(res.point, w), tol);
    return res;
  }));
  rep.add(run_samples("composition", samples, tol, seed, names, [&](std::int64_t, CounterRng& rng) {
    SampleResult res;
    res.point = sample_plane(rng);
    cplx w1 = sample_arrow(rng), w2 = sample_arrow(rng);
    const cplx m0 = as_complex(phi(res.point));
    const cplx m1 = std::exp(w1 * std::conj(m0)) * m0;  // t(w1, m0)
    const cplx w12 = w1 + std::exp(std::conj(w1) * m0) * w2;
    auto path = concatenate(dazord_arrow_path(w1, m0), dazord_arrow_path(w2, m1));
    auto end = lift_path(atlas, path, res.point).end;
    Point explicit_once = dazord_act(res.point, w12);
    Point explicit_twice = dazord_act(dazord_act(res.point, w1), w2);
    res.residual = std::max(class_residual(atlas, end, explicit_once, tol),
                            class_residual(atlas, explicit_twice, explicit_once, tol));
    return res;
  }));
  return rep;
}

double rk4_order_slope(const ResolutionAtlas& atlas, const CotangentPath& p, const Point& z0) {
  IntegratorConfig cfg;
  cfg.drift_tol = INFINITY;
  std::vector<Point> ends;
  for (int n : {32, 64, 128, 256, 512}) {
    cfg.steps = n;
    cfg.max_steps = n;
    ends.push_back(lift_path(atlas, p, z0, cfg).end);
  }
  // least-squares slope of log |z_N - z_2N| against log N
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k + 1 < ends.size(); ++k) {
    xs.push_back(std::log(32.0 * std::pow(2.0, static_cast<double>(k))));
    ys.push_back(std::log(dist(ends[k], ends[k + 1])));
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Report path_properties(const ResolutionAtlas& atlas, double tol) {
  require_plane(atlas);
  Report rep;
  rep.campaign_id = "path-properties";
  rep.target = "r2 k=" + atlas.params.at("k");
  const auto& phi = atlas.charts.at(0).phi;
  const Point z0{0.3, 1.1};
  const cplx m0 = as_complex(phi(z0));
  auto names = atlas.charts.at(0).chart->names();

  auto p = dazord_arrow_path({0.3, -0.2}, m0);
  const cplx m1 = as_complex(p.m(1.0));
  auto q = dazord_arrow_path({-0.25, 0.35}, m1);
  auto one = [&](const char* name, const std::function<double()>& f) {
    rep.add(run_samples(name, 1, tol, 0, names, [&](std::int64_t, CounterRng&) {
      SampleResult res;
      res.point = z0;
      res.residual = f();
      return res;
    }));
  };
  one("reparametrization", [&] {
    return dist(lift_path(atlas, p, z0).end, lift_path(atlas, reparametrize_square(p), z0).end);
  });
  one("concatenation", [&] {
    auto whole = lift_path(atlas, concatenate(p, q), z0).end;
    auto stepwise = lift_path(atlas, q, lift_path(atlas, p, z0).end).end;
    return dist(whole, stepwise);
  });

  // smooth spiral, no flat ends, so the error is dominated by the RK4 truncation
  auto m = [](double u) {
    double r = 1 + 0.5 * std::sin(kPi * u), th = 3 * u;
    return Point{r * std::cos(th), r * std::sin(th)};
  };
  auto dm = [](double u) {
    double r = 1 + 0.5 * std::sin(kPi * u), dr = 0.5 * kPi * std::cos(kPi * u), th = 3 * u;
    return Point{dr * std::cos(th) - 3 * r * std::sin(th), dr * std::sin(th) + 3 * r * std::cos(th)};
  };
  auto spiral = path_over(*catalog("dazord")->base_pi, m, dm);
  const double slope = rk4_order_slope(atlas, spiral, atlas.fiber(m(0.0), 1)[0]);
  CheckRecord order;
  order.name = "rk4_order";
  order.tol = 0;
  order.max_residual = std::max(0.0, 3.5 - slope);
  order.samples_used = 5;
  order.status = slope >= 3.5 ? Status::Pass : Status::Fail;
  order.notes = "measured slope " + std::to_string(slope) + " over N = 32..512";
  if (!order.ok()) order.witnesses.push_back({0, order.max_residual, {}, order.notes});
  rep.add(order);
  return rep;
}

void write_trace_csv(std::ostream& out, const ResolutionAtlas& atlas, const LiftResult& r) {
  const auto& vars = atlas.charts.at(0).chart->vars;
  out << "u";
  for (const auto& v : vars.vars()) {
    if (v.kind == VarKind::Complex)
      out << "," << v.name << "_re," << v.name << "_im";
    else
      out << "," << v.name;
  }
  out << ",drift\n";
  out << std::setprecision(17);
  for (const auto& row : r.trace) {
    out << row.u;
    for (int k = 0; k < vars.size(); ++k) {
      out << "," << row.z[static_cast<std::size_t>(k)].real();
      if (vars[k].kind == VarKind::Complex) out << "," << row.z[static_cast<std::size_t>(k)].imag();
    }
    out << "," << row.drift << "\n";
  }
}

}  // namespace pforge
