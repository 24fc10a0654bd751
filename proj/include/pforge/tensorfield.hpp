#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pforge/numeric.hpp"
#include "pforge/report.hpp"
#include "pforge/symexpr.hpp"

namespace pforge {

// Coordinate domain. Complex charts are holomorphic: tensor indices refer to
// d/dz, and real dimension counts each complex coordinate twice.
struct Chart {
  std::string name;
  VarTable vars;
  std::vector<Expr> nonzero;  // domain predicate: each must not vanish

  int dim() const { return vars.size(); }
  int real_dimension() const { return vars.real_dimension(); }
  std::vector<std::string> names() const;
  Expr coord(int k) const { return var(vars, k); }
  Expr coord(const std::string& n) const { return var(vars, n); }
  bool in_domain(const Point& p, double eps = 1e-9) const;
};
using ChartPtr = std::shared_ptr<const Chart>;

ChartPtr make_chart(std::string name, VarTable vars, std::vector<Expr> nonzero = {});
// Chart with real coordinates named by the list.
ChartPtr real_chart(std::string name, const std::vector<std::string>& coords);

class ChartMap {
 public:
  ChartMap() = default;
  ChartMap(ChartPtr source, ChartPtr target, std::vector<Expr> comps);

  const ChartPtr& source() const;
  const ChartPtr& target() const;
  const std::vector<Expr>& comps() const;
  // Symbolic Jacobian, rows indexed by target coordinates.
  const std::vector<std::vector<Expr>>& jacobian() const;

  std::vector<cplx> operator()(const Point& p) const;
  Mat jacobian_at(const Point& p) const;
  // this o inner
  ChartMap compose(const ChartMap& inner) const;
  bool valid() const { return impl_ != nullptr; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

using MultiIndex = std::vector<int>;

// Sorts an index list in place; returns the permutation sign, or 0 on repeats.
int sort_with_sign(MultiIndex& idx);

// Antisymmetric coefficient tables over one chart. Only strictly increasing
// multi-indices are stored; zero coefficients are dropped.
struct MultiVectorField {
  ChartPtr chart;
  int degree = 0;
  std::map<MultiIndex, Expr> coeff;

  static MultiVectorField zero(ChartPtr c, int degree);
  static MultiVectorField function(ChartPtr c, const Expr& f);
  // Coefficient for any ordering of the index list.
  Expr get(MultiIndex idx) const;
  void set(MultiIndex idx, const Expr& value);
  void add(MultiIndex idx, const Expr& value);
};

struct DifferentialForm {
  ChartPtr chart;
  int degree = 0;
  std::map<MultiIndex, Expr> coeff;

  static DifferentialForm zero(ChartPtr c, int degree);
  Expr get(MultiIndex idx) const;
  void set(MultiIndex idx, const Expr& value);
  void add(MultiIndex idx, const Expr& value);
};

MultiVectorField operator+(const MultiVectorField& a, const MultiVectorField& b);
MultiVectorField operator-(const MultiVectorField& a, const MultiVectorField& b);
MultiVectorField operator*(const Expr& f, const MultiVectorField& a);
DifferentialForm operator+(const DifferentialForm& a, const DifferentialForm& b);
DifferentialForm operator*(const Expr& f, const DifferentialForm& a);
MultiVectorField wedge(const MultiVectorField& a, const MultiVectorField& b);
DifferentialForm wedge(const DifferentialForm& a, const DifferentialForm& b);

// Numeric multivector (or form) at a point.
struct MultivectorValue {
  int dim = 0;
  int degree = 0;
  std::map<MultiIndex, cplx> coeff;

  // pi(alpha_1, ..., alpha_k) = sum_I pi_I det(alpha_a[I_b]).
  cplx contract(const std::vector<Vec>& covectors) const;
  Mat matrix() const;  // degree 2 only: M(i,j) = pi(dx_i, dx_j)
  static MultivectorValue from_matrix(const Mat& m, double drop = 0.0);
  // Push forward through a linear map with matrix J (rows: target coordinates).
  MultivectorValue push(const Mat& j) const;
  double max_abs() const;
};

MultivectorValue evaluate(const MultiVectorField& f, const Point& p);
MultivectorValue evaluate(const DifferentialForm& f, const Point& p);

// Pointwise multivector source: symbolic fields, inverted forms, or lifts.
using PointwiseField = std::function<MultivectorValue(const Point&)>;
PointwiseField pointwise(const MultiVectorField& f);  // compiled once

// ---- calculus ----
MultiVectorField schouten(const MultiVectorField& p, const MultiVectorField& q);
Expr apply(const MultiVectorField& pi, const std::vector<Expr>& fs);
// pi^#(alpha) = pi(alpha, .) at p; degree 2 only.
std::vector<cplx> sharp(const MultiVectorField& pi, const std::vector<cplx>& alpha, const Point& p);
std::vector<cplx> sharp(const MultivectorValue& pi, const std::vector<cplx>& alpha);
DifferentialForm exterior_derivative(const DifferentialForm& w);
DifferentialForm pullback(const DifferentialForm& w, const ChartMap& f);
// Coefficients of a form written in the Wirtinger coframe of a complex chart,
// re-expressed over the realified chart.
// Wirtinger index 2k is dz_k, 2k+1 is dconj(z_k). The realified chart uses
// (z_k_re, z_k_im) at indices 2k, 2k+1. The imaginary part, which vanishes for
// a real form, is returned through `imaginary` when given.
DifferentialForm realify_form(const ChartPtr& complex_chart, int degree,
                              const std::map<MultiIndex, Expr>& wirtinger_coeff, const ChartPtr& real_chart,
                              DifferentialForm* imaginary = nullptr);
// Realified chart of a complex chart (same name with suffix "_re").
ChartPtr realified_chart(const ChartPtr& complex_chart);

struct SingularFormError : std::runtime_error {
  SingularFormError(double cond);
  double condition;
};

// Inverse bivector of a nondegenerate 2-form, with the convention that
// da^db corresponds to d/da ^ d/db (Pi = -W^{-1}).
MultivectorValue invert_form_at(const DifferentialForm& w, const Point& p);
MultivectorValue invert_form_value(const MultivectorValue& w);

// ---- submanifolds ----
struct Submanifold {
  ChartPtr ambient;
  std::vector<Expr> generators;      // form (a)
  std::optional<ChartMap> param;     // form (b)
  int expected_dim = 0;               // real dimension
  // Optional custom sampler returning a point on N (or nullopt).
  std::function<std::optional<Point>(CounterRng&)> sampler;
};

Submanifold cut_out(ChartPtr ambient, std::vector<Expr> generators, int expected_dim);

// Damped Newton from a random ambient seed; point accepted when all
// |generators| <= 1e-10 and the chart domain predicate holds.
std::optional<Point> sample_on(const Submanifold& n, CounterRng& rng, double box = 1.0);
// Newton projection from a given start (used by samplers).
std::optional<Point> newton_project(const std::vector<Expr>& gens, const Tape& g, const Tape& jac, int dim,
                                    Point x, double tol = 1e-12, int max_iter = 80);

// Tangent basis (columns) and conormal basis (columns, as covectors) of N at x,
// computed from the generators. Charts are all-real or holomorphic.
struct LocalFrame {
  Mat tangent;
  Mat conormal;
};
LocalFrame local_frame(const Submanifold& n, const Point& x);

CheckRecord is_tangent(const MultiVectorField& pi, const Submanifold& n, std::int64_t samples, double tol,
                       std::uint64_t seed = 1);
CheckRecord is_coisotropic(const MultiVectorField& pi, const Submanifold& n, std::int64_t samples, double tol,
                           std::uint64_t seed = 1);
// Numeric variant: the field is supplied pointwise.
CheckRecord is_coisotropic(const PointwiseField& pi, int degree, const Submanifold& n, std::int64_t samples,
                           double tol, std::uint64_t seed = 1, const std::string& name = "coisotropic");

// ---- reduction ----
enum class ReductionSign {
  Feedback,    // value = pi_Q(lifts)
  Alternating  // value = (-1)^(k+1) pi_Q(lifts)
};

struct ReductionHypothesisViolated : std::runtime_error {
  ReductionHypothesisViolated(const std::string& what, double residual);
  double residual;
};

struct ReductionResult {
  cplx value;            // from the first lift
  cplx value_alt;        // from an independent second lift
  double lift_gap = 0;   // |value - value_alt|
  double hypothesis_residual = 0;
};

// Value at x of the k-vector induced on the quotient by Phi: N -> P, evaluated
// on covectors alpha_i of P at Phi(x).
ReductionResult reduce_at(const PointwiseField& pi_q, int degree, const Submanifold& n, const ChartMap& phi,
                          const Point& x, const std::vector<Vec>& alphas,
                          ReductionSign sign = ReductionSign::Feedback, std::uint64_t seed = 7, double tol = 1e-8);

}  // namespace pforge
