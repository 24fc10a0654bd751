#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pforge/rational.hpp"

namespace pforge {

using cplx = std::complex<double>;

enum class VarKind : std::uint8_t { Real, Complex };

struct VarInfo {
  std::string name;
  VarKind kind = VarKind::Real;
};

// Ordered chart coordinates. The order fixes the layout of a Point.
class VarTable {
 public:
  VarTable() = default;
  VarTable(std::initializer_list<VarInfo> vars);

  int add(const std::string& name, VarKind kind = VarKind::Real);
  std::optional<int> find(const std::string& name) const;
  int index_of(const std::string& name) const;  // throws if absent
  const VarInfo& operator[](int k) const { return vars_.at(static_cast<std::size_t>(k)); }
  int size() const { return static_cast<int>(vars_.size()); }
  int real_dimension() const;
  bool any_complex() const;
  const std::vector<VarInfo>& vars() const { return vars_; }

 private:
  std::vector<VarInfo> vars_;
};

// One value per variable; real variables carry a zero imaginary part.
using Point = std::vector<cplx>;

enum class Kind : std::uint8_t { Const, Var, ConjVar, Add, Mul, Neg, Recip, Pow, Exp, Sin, Cos, Re, Im };

class Expr;

struct Node;

class Expr {
 public:
  Expr();                           // the constant 0
  Expr(int v);                      // NOLINT: integer constants read naturally in formulas
  Expr(std::int64_t v);             // NOLINT
  Expr(const Rational& v);          // NOLINT
  Expr(const GaussRat& v);          // NOLINT

  static Expr imag_unit();
  static Expr variable(int index, const VarInfo& info);
  static Expr conj_variable(int index, const VarInfo& info);

  static Expr add(std::vector<Expr> terms);
  static Expr mul(std::vector<Expr> factors);
  static Expr neg(const Expr& a);
  static Expr recip(const Expr& a);
  static Expr pow(const Expr& a, int k);
  static Expr exp(const Expr& a);
  static Expr sin(const Expr& a);
  static Expr cos(const Expr& a);
  static Expr re(const Expr& a);
  static Expr im(const Expr& a);

  Kind kind() const;
  const std::vector<Expr>& kids() const;
  const GaussRat& value() const;  // Const only
  int var_index() const;          // Var / ConjVar
  const std::string& var_name() const;
  VarKind var_kind() const;
  int exponent() const;  // Pow only
  bool is_complex() const;
  bool is_const() const { return kind() == Kind::Const; }
  bool is_zero_const() const;
  bool is_one_const() const;
  const Node* id() const { return node_.get(); }

  std::string str() const;

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  friend struct NodeFactory;
  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr& operator+=(Expr& a, const Expr& b);
Expr& operator*=(Expr& a, const Expr& b);

// Convenience variable constructor from a table entry.
Expr var(const VarTable& vars, const std::string& name);
Expr var(const VarTable& vars, int index);

// ---- errors ----
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t offset);
  std::size_t offset;
};

struct EvalError : std::runtime_error {
  EvalError(const std::string& msg, std::string subtree);
  std::string subtree;
};

// ---- grammar ----
Expr parse(const std::string& text, const VarTable& vars);
std::string print(const Expr& e);

// ---- transformations ----
Expr conj(const Expr& e);
// Derivative in a chart variable. For complex variables `wrt_conj` selects the
// Wirtinger derivative in the conjugate; z and conj(z) are independent.
Expr diff(const Expr& e, int var_index, bool wrt_conj = false);
// Replace variable k by repl[k]; conjugate variables receive conj(repl[k]).
Expr substitute(const Expr& e, const std::vector<Expr>& repl);
// Indices of variables occurring in e (as Var or ConjVar), sorted.
std::vector<int> free_variables(const Expr& e);
std::size_t node_count(const Expr& e);

// ---- evaluation ----
cplx eval(const Expr& e, const Point& p);

// Flattened evaluator for a batch of expressions sharing subtrees.
class Tape {
 public:
  Tape() = default;
  explicit Tape(const std::vector<Expr>& outputs);
  std::vector<cplx> eval(const Point& p) const;
  void eval(const Point& p, std::vector<cplx>& out, std::vector<cplx>& scratch) const;
  std::size_t size() const { return ops_.size(); }
  std::size_t outputs() const { return out_slots_.size(); }

 private:
  struct Op {
    Kind kind;
    int a = -1;                 // first argument slot, or variable index
    std::vector<int> args;      // n-ary Add / Mul
    cplx c{};                   // constant payload
    int k = 0;                  // exponent
    const Node* node = nullptr; // for error messages
  };
  std::vector<Op> ops_;
  std::vector<int> out_slots_;
  std::vector<Expr> keep_;  // keeps nodes referenced by `node` alive
};

// ---- zero testing ----
enum class ZeroStatus { ProvenZero, ProvenNonzero, Unknown };
const char* to_string(ZeroStatus s);

struct ZeroResult {
  ZeroStatus status = ZeroStatus::Unknown;
  double witness_abs = 0.0;  // |value| at the witness, when nonzero
  std::vector<std::pair<std::string, cplx>> witness;
  std::string note;
};

ZeroResult is_zero(const Expr& e, std::uint64_t seed = 0x5eed);

// Expanded normal form as an Expr (sums of monomials over atoms).
Expr canonicalize(const Expr& e);
// Number of terms of the normal form, or nullopt when expansion exceeds limits.
std::optional<std::size_t> canonical_terms(const Expr& e);

// ---- complex to real ----
struct Realification {
  VarTable real;                              // X_re, X_im for each complex X
  std::vector<std::pair<Expr, Expr>> parts;   // per source variable: (re, im)
};
Realification realify(const VarTable& complex_vars);
// Splits e into real and imaginary parts over the realified chart.
std::pair<Expr, Expr> to_real(const Expr& e, const Realification& r);
// Point of the complex chart -> point of the realified chart.
Point realify_point(const Point& p, const VarTable& complex_vars);

}  // namespace pforge
