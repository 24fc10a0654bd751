#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pforge/groupoid.hpp"
#include "pforge/liealg.hpp"
#include "pforge/report.hpp"
#include "pforge/tensorfield.hpp"

namespace pforge {

struct ResolutionChart {
  std::string name;
  ChartPtr chart;
  ChartMap phi;  // chart -> ambient
  std::optional<DifferentialForm> omega;
  std::optional<MultiVectorField> pi;
  // Numeric structure for charts whose bivector comes from a reduction.
  PointwiseField pi_pointwise;
  // Generic point over the open leaf (or nullopt when sampling fails).
  std::function<std::optional<Point>(CounterRng&)> sample;

  // pi if present, else the inverse of omega, else pi_pointwise.
  PointwiseField structure() const;
};

struct ChartTransition {
  int from = 0, to = 0;
  ChartMap map;
};

// Identification of chart 0 depending on a constant shift c: the source
// chart carries the chart coordinates followed by c.
struct DeckMap {
  std::string name;
  ChartPtr chart;  // chart coordinates + c
  ChartMap map;    // chart -> chart, c fixed
  double shift = 0;
};

struct ResolutionFlags {
  bool etale = false, covering = false, full = false;
};

struct ResolutionAtlas {
  std::string family;
  std::map<std::string, std::string> params;
  std::vector<ResolutionChart> charts;
  std::vector<ChartTransition> transitions;
  ChartPtr ambient;
  MultiVectorField pi_m;
  std::vector<Expr> closure_generators;  // of the leaf closure inside the ambient chart
  ResolutionFlags flags;
  // Class equality and canonical representative on chart 0; empty when
  // classes are points of the chart.
  std::function<bool(const Point&, const Point&, double)> class_equal;
  std::function<Point(const Point&)> representative;
  // Deck maps of chart 0 generating the identifications.
  std::vector<DeckMap> deck;
  // Preimages in chart 0 of an ambient point (family-specific solver).
  std::function<std::vector<Point>(const Point&, int)> fiber;
  // When set, the pushforward identity is tested symbolically.
  bool symbolic_pushforward = false;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> metadata;

  bool same_class(const Point& p, const Point& q, double tol) const;
};

// ---- the plane family ----

// Z = R^2 with coordinates (a, b), phi(a, b) = (b cos ab, b sin ab) into the
// Dazord base. k = 0 keeps every point; k = 1 identifies (a, b) with
// ((-1)^n a + n pi / b, (-1)^n b).
ResolutionAtlas build_r2(int k);

struct R2Representative {
  double a = 0, b = 0;
  cplx m, nu;                   // arrow (m, nu) of R^0 carrying (Zc, lambda) to (i a, b)
  double imag_residual = 0;     // max(|Im m|, |Im nu|)
  double target_residual = 0;   // |t(Zc, lambda) - phi(a, b)|
  double product_residual = 0;  // |(m, nu)(Zc, lambda) - (i a, b)|
};
R2Representative r2_representative(cplx zc, double lambda);

// Canonical representative of a class of the k = 1 relation: b > 0 and
// a b in [-pi, pi) when b != 0.
Point r2_class_representative(const Point& ab);
bool r2_class_equal(const Point& p, const Point& q, double tol);

struct ExceptionalFiberError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Distinct preimages of an ambient point, each verified against phi.
std::vector<Point> fiber_enumerate(const ResolutionAtlas& atlas, const Point& target, int count);

// Reduction of the Dazord structure along Gamma_L = {z_im = 0}: the reduced
// bracket {a, b}, its independence of lifts, and p* omega_Z + i* omega_Gamma.
Report r2_reduction_check(std::int64_t samples, double tol, std::uint64_t seed = 1);

// ---- verification ----

Report verify_resolution(const ResolutionAtlas& atlas, std::int64_t samples, double tol, std::uint64_t seed = 1);

// ---- Springer ----

// Slice chart of (G x n)/P: block lower unipotent g with free entries n_ij
// below the diagonal blocks and u in the nilradical; phi = g^{-1} u g.
// The bivector on the slice comes from reducing the cotangent groupoid along
// G x n. The Richardson certificate of a generic element of n must pass.
ResolutionAtlas springer(int n, const std::vector<int>& levi_roots = {});
// Element of the nilradical passing the Richardson certificate, as used by springer().
NilpotentRep springer_richardson(const ParabolicData& p);
struct SliceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Slice coordinates (n entries, then u entries) of the class of (g, u), from
// g = B n with B block upper triangular and n block lower unipotent.
Point springer_slice(const ParabolicData& p, const Mat& g, const Mat& u);
// (g, u) ~ (p g, p u p^{-1}) for p in the parabolic.
bool springer_class_equal(const ParabolicData& p, const Mat& g1, const Mat& u1, const Mat& g2, const Mat& u2,
                          double tol);

// ---- Grothendieck, SL2 ----

// Slice chart (nu, w): g = [[1,0],[nu,1]], t u = [[tau, tau w],[0, 1/tau]],
// mu = g^{-1} (t u) g into the conjugation base with the Evens-Lu bivector.
ResolutionAtlas grothendieck_sl2(const Rational& tau);
// Trace of mu, tU coisotropy and the image in the Steinberg fiber.
Report grothendieck_invariants(const Rational& tau, std::int64_t samples, double tol, std::uint64_t seed = 1);

// ---- Kleinian A_{l-1} ----

// Iterated blowup of xy = z^l at the origin, charts with monomial maps.
ResolutionAtlas kleinian(int l);
// Poisson structure {x,y} = -l z^(l-1), {y,z} = y, {z,x} = x on C^3.
MultiVectorField kleinian_ambient_bivector(const ChartPtr& c3, int l);

struct KleinianExceptional {
  int curve_count = 0;
  // curve labels 1..curve_count per (chart, coordinate) with the coordinate vanishing on it
  std::vector<std::vector<int>> curve_of;  // [chart][coord] -> label or -1
  // unordered pairs of labels with their number of intersection points
  std::map<std::pair<int, int>, int> intersections;
  // strict transform of L_k = {(s^k, s^(l-k), s)}: labels met and transversality
  std::vector<std::vector<int>> strict_meets;  // index k-1
  std::vector<bool> strict_transversal;
  std::vector<std::string> chart_names;
};
KleinianExceptional kleinian_exceptional(int l);
// Schouten square, Casimir chi_l, curve count, chain pattern, strict
// transforms, kernel of dphi along the curves and dphi at their crossings.
Report kleinian_invariants(int l, std::int64_t samples, double tol, std::uint64_t seed = 1);

// ---- rotated lines ----

Report crossing_compatibility_r2(double alpha);

// Structured text description of an atlas.
std::string atlas_manifest(const ResolutionAtlas& atlas);

}  // namespace pforge
