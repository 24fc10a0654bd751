#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pforge/report.hpp"
#include "pforge/tensorfield.hpp"

namespace pforge {

// Lie groupoid Gamma => M in coordinates. Arrows g1, g2 compose when
// t(g1) = s(g2); the product g1 g2 has s(g1 g2) = s(g1) and t(g1 g2) = t(g2).
struct GroupoidEntry {
  std::string name;
  ChartPtr base;   // M
  ChartPtr total;  // Gamma
  ChartPtr pair;   // Gamma x Gamma, coordinates of g1 then g2
  ChartMap s, t;   // Gamma -> M
  ChartMap unit;   // M -> Gamma
  ChartMap inverse;
  ChartMap product;  // pair -> Gamma, meaningful on composable pairs
  std::optional<DifferentialForm> omega;
  std::optional<MultiVectorField> pi;
  // Poisson structure induced on M (s_* of the total-space structure).
  std::optional<MultiVectorField> base_pi;
  // Random arrow inside the sampling region.
  std::function<Point(CounterRng&)> sample_arrow;
  std::map<std::string, std::string> metadata;

  // Total-space Poisson bivector, from pi or by inverting omega pointwise.
  // Empty when the entry carries neither.
  PointwiseField poisson() const;
};
using GroupoidPtr = std::shared_ptr<const GroupoidEntry>;

enum class CatalogFamily { Dazord, CotangentSL, ConjugationSL };

struct CatalogKey {
  CatalogFamily family = CatalogFamily::Dazord;
  int n = 0;

  // "dazord", "cotangent-sl2", "cotangent-sl3", "conjugation-sl2", ...
  static CatalogKey parse(const std::string& text);
  std::string str() const;
};

std::vector<std::string> catalog_keys();
// Throws std::invalid_argument for unsupported parameters.
GroupoidPtr catalog(const CatalogKey& key);
inline GroupoidPtr catalog(const std::string& key) { return catalog(CatalogKey::parse(key)); }

// Dazord form written verbatim in the Wirtinger coframe (Z, Zbar, z, zbar),
// expanded over the real chart. Its imaginary part does not vanish.
struct VerbatimForm {
  DifferentialForm real_part;
  DifferentialForm imag_part;
};
VerbatimForm dazord_verbatim_omega();

// Same entry with the first product component negated.
GroupoidPtr corrupt_product_sign(const GroupoidEntry& g);

// Solves s(g2) = t(g1) by Newton on the s-fiber, starting from a random arrow.
std::optional<Point> sample_composable(const GroupoidEntry& g, const Point& g1, CounterRng& rng);

Report verify_axioms(const GroupoidEntry& g, std::int64_t samples, double tol, std::uint64_t seed = 1);
// dw = 0 symbolically and pointwise nondegeneracy.
Report verify_symplectic(const GroupoidEntry& g, std::int64_t samples, std::uint64_t seed = 1);
// Graph of the product inside Gamma^3, coisotropic for field + field + (-1)^(k+1) field.
Report verify_multiplicativity(const GroupoidEntry& g, const PointwiseField& field, int degree,
                               std::int64_t samples, double tol, std::uint64_t seed = 1);
Report pushforward_check(const GroupoidEntry& g, const MultiVectorField& pi_m, std::int64_t samples, double tol,
                         std::uint64_t seed = 1);

// Sections of ker dt along units are maps M -> R^dim(Gamma); right translation
// by g carries the t-fiber through the unit at s(g) to the one through g.
std::vector<cplx> right_invariant_lift(const GroupoidEntry& g, const ChartMap& section, const Point& gamma);
// Symbolic right-invariant vector field (degree 1) of a section.
MultiVectorField right_lift_field(const GroupoidEntry& g, const ChartMap& section);
// inverse_* of the right lift.
MultiVectorField left_lift_field(const GroupoidEntry& g, const ChartMap& section);

// Lambda = sum_a u_a ^ w_a with sections u_a, w_a of ker dt along units.
using BisectionPair = std::pair<ChartMap, ChartMap>;
MultiVectorField exact_multiplicative(const GroupoidEntry& g, const std::vector<BisectionPair>& lambda);
// Anchor image rho(Lambda) at m: ds applied to Lambda at the unit over m.
MultivectorValue anchor_image(const GroupoidEntry& g, const std::vector<BisectionPair>& lambda, const Point& m);

// Checks section values against ker dt at units, the lift identity
// lift(df) = pi^#(s* df) for base coordinate functions, and right-translation
// consistency.
Report verify_lifts(const GroupoidEntry& g, std::int64_t samples, double tol, std::uint64_t seed = 1);

// Base Poisson structure -sum (e_i)_S ^ (eps_i)_S on the conjugation base,
// (X, Y)_S(h) = hX - Yh, in matrix-entry coordinates h_ij.
MultiVectorField evens_lu_bivector(int n);

}  // namespace pforge
