#pragma once

#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pforge/report.hpp"
#include "pforge/resolution.hpp"

namespace pforge {

// Covector path a(u) over a base path m(u), u in [0, 1], in the ambient chart.
struct CotangentPath {
  std::function<Vec(double)> a;
  std::function<Point(double)> m;
  std::function<Point(double)> dm;  // derivative of m
  bool flat_end = false;
};

// Smooth monotone profile of [0, 1] onto itself, constant near both ends.
double bump_profile(double u);
double bump_profile_derivative(double u);

// u -> beta(u): a becomes beta'(u) a(beta(u)), m becomes m(beta(u)).
CotangentPath flatten_ends(const CotangentPath& p);
// u -> u^2.
CotangentPath reparametrize_square(const CotangentPath& p);
// p then q at double speed; both must be flat-ended and meet.
CotangentPath concatenate(const CotangentPath& p, const CotangentPath& q);
// Constant base point, zero covector.
CotangentPath constant_path(const Point& m);

// Covector over a prescribed base curve, solving pi^#(a) = dm/du by least
// squares (exact where pi is nondegenerate).
CotangentPath path_over(const MultiVectorField& pi_m, std::function<Point(double)> m,
                        std::function<Point(double)> dm);
// Base curve of a chosen covector path, integrated by RK4 from m0 and
// interpolated by cubic Hermite segments.
CotangentPath integrate_base(const MultiVectorField& pi_m, std::function<Vec(double)> a, const Point& m0,
                             int steps = 2048);

// dm/du - pi^#(a(u)) at 50 times.
Report validate_path(const CotangentPath& p, const MultiVectorField& pi_m, double tol = 1e-9);

struct IntegratorConfig {
  int steps = 256;            // fixed RK4 steps, at least 16
  double drift_tol = 1e-6;    // bound on |phi(z(u)) - m(u)|
  int max_steps = 1 << 16;    // step floor, expressed as a count
  double projection_tol = 0;  // > 0: Newton-correct z onto phi^{-1}(m(u)) after each step
  bool keep_trace = false;
};

struct IntegrationFailure : std::runtime_error {
  IntegrationFailure(const std::string& what, double worst_time, double drift);
  double worst_time;
  double drift;
};

struct TraceRow {
  double u = 0;
  Point z;
  double drift = 0;
};

struct LiftResult {
  Point end;
  int steps = 0;
  double max_drift = 0;
  double worst_time = 0;
  std::vector<TraceRow> trace;
};

// RK4 solution of dz/du = pi_Z^#((dphi)^T a(u)) on chart 0, halving the step
// until the drift bound holds.
LiftResult lift_path(const ResolutionAtlas& atlas, const CotangentPath& p, const Point& z0,
                     const IntegratorConfig& cfg = {});

// Loop of radius |m0| around the origin of the plane, starting at m0.
CotangentPath r2_loop(const Point& m0, int winding = 1);
// Base path t(u W, m0) of the straight segment (u W, m0) in the s-fiber of the
// Dazord groupoid, with its covector.
CotangentPath dazord_arrow_path(cplx w, cplx m0);
// Explicit action [g] -> [g gamma] of a Dazord arrow gamma = (W, s) on the
// plane resolution, s = phi(z).
Point dazord_act(const Point& z, cplx w);

struct MonodromyResult {
  Point start, end;
  bool class_trivial = false;
  double fiber_match = 0;  // distance from end to the nearest enumerated preimage
};
MonodromyResult loop_monodromy(const ResolutionAtlas& atlas, const Point& z0, int winding = 1,
                               const IntegratorConfig& cfg = {});

// Integrated action against the explicit one: unit, single arrows, composition.
Report action_consistency(const ResolutionAtlas& atlas, std::int64_t samples, double tol = 1e-5,
                          std::uint64_t seed = 1);
// Reparametrization, concatenation and step-halving order.
Report path_properties(const ResolutionAtlas& atlas, double tol = 1e-5);

// Measured RK4 order from endpoint differences at N = 32, ..., 512.
double rk4_order_slope(const ResolutionAtlas& atlas, const CotangentPath& p, const Point& z0);

// CSV with header u,<chart coordinates>,drift.
void write_trace_csv(std::ostream& out, const ResolutionAtlas& atlas, const LiftResult& r);

}  // namespace pforge
