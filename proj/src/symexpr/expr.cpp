#include <algorithm>
#include <unordered_map>

#include "pforge/symexpr.hpp"

namespace pforge {

struct Node {
  Kind kind = Kind::Const;
  bool complex = false;
  std::vector<Expr> kids;
  GaussRat c;
  int var = -1;
  std::string name;
  VarKind vkind = VarKind::Real;
  int k = 0;
};

struct NodeFactory {
  static Expr make(Node n) { return Expr(std::make_shared<const Node>(std::move(n))); }
  static const Node& node(const Expr& e) { return *e.node_; }
};

namespace {

const Expr& zero_expr() {
  static const Expr z = NodeFactory::make(Node{});
  return z;
}

Expr make_const(const GaussRat& c) {
  Node n;
  n.kind = Kind::Const;
  n.c = c;
  n.complex = !c.is_real();
  return NodeFactory::make(std::move(n));
}

Expr make_unary(Kind kind, const Expr& a, bool complex) {
  Node n;
  n.kind = kind;
  n.kids = {a};
  n.complex = complex;
  return NodeFactory::make(std::move(n));
}

bool any_complex(const std::vector<Expr>& v) {
  return std::any_of(v.begin(), v.end(), [](const Expr& e) { return e.is_complex(); });
}

}  // namespace

// ---------------------------------------------------------------- VarTable

VarTable::VarTable(std::initializer_list<VarInfo> vars) {
  for (const auto& v : vars) add(v.name, v.kind);
}

int VarTable::add(const std::string& name, VarKind kind) {
  if (find(name)) throw std::invalid_argument("duplicate variable name '" + name + "'");
  if (name == "i") throw std::invalid_argument("'i' is reserved for the imaginary unit");
  vars_.push_back({name, kind});
  return size() - 1;
}

std::optional<int> VarTable::find(const std::string& name) const {
  for (int k = 0; k < size(); ++k)
    if (vars_[static_cast<std::size_t>(k)].name == name) return k;
  return std::nullopt;
}

int VarTable::index_of(const std::string& name) const {
  auto k = find(name);
  if (!k) throw std::invalid_argument("unknown variable '" + name + "'");
  return *k;
}

int VarTable::real_dimension() const {
  int d = 0;
  for (const auto& v : vars_) d += v.kind == VarKind::Complex ? 2 : 1;
  return d;
}

bool VarTable::any_complex() const {
  return std::any_of(vars_.begin(), vars_.end(), [](const VarInfo& v) { return v.kind == VarKind::Complex; });
}

// ---------------------------------------------------------------- Expr basics

Expr::Expr() : Expr(zero_expr()) {}
Expr::Expr(int v) : Expr(make_const(GaussRat(v))) {}
Expr::Expr(std::int64_t v) : Expr(make_const(GaussRat(v))) {}
Expr::Expr(const Rational& v) : Expr(make_const(GaussRat(v))) {}
Expr::Expr(const GaussRat& v) : Expr(make_const(v)) {}

Expr Expr::imag_unit() { return make_const(GaussRat(0, 1)); }

Expr Expr::variable(int index, const VarInfo& info) {
  Node n;
  n.kind = Kind::Var;
  n.var = index;
  n.name = info.name;
  n.vkind = info.kind;
  n.complex = info.kind == VarKind::Complex;
  return NodeFactory::make(std::move(n));
}

Expr Expr::conj_variable(int index, const VarInfo& info) {
  if (info.kind != VarKind::Complex) return variable(index, info);
  Node n;
  n.kind = Kind::ConjVar;
  n.var = index;
  n.name = info.name;
  n.vkind = info.kind;
  n.complex = true;
  return NodeFactory::make(std::move(n));
}

Kind Expr::kind() const { return node_->kind; }
const std::vector<Expr>& Expr::kids() const { return node_->kids; }
const GaussRat& Expr::value() const { return node_->c; }
int Expr::var_index() const { return node_->var; }
const std::string& Expr::var_name() const { return node_->name; }
VarKind Expr::var_kind() const { return node_->vkind; }
int Expr::exponent() const { return node_->k; }
bool Expr::is_complex() const { return node_->complex; }
bool Expr::is_zero_const() const { return kind() == Kind::Const && value().is_zero(); }
bool Expr::is_one_const() const { return kind() == Kind::Const && value().is_one(); }
std::string Expr::str() const { return print(*this); }

Expr Expr::add(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  GaussRat c;
  for (auto& t : terms) {
    if (t.kind() == Kind::Add) {
      for (const auto& s : t.kids()) {
        if (s.is_const()) c += s.value();
        else flat.push_back(s);
      }
    } else if (t.is_const()) {
      c += t.value();
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (!c.is_zero()) flat.push_back(make_const(c));
  if (flat.empty()) return zero_expr();
  if (flat.size() == 1) return flat.front();
  Node n;
  n.kind = Kind::Add;
  n.complex = any_complex(flat);
  n.kids = std::move(flat);
  return NodeFactory::make(std::move(n));
}

Expr Expr::mul(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  GaussRat c(1);
  auto take = [&](const Expr& f, auto& self) -> void {
    switch (f.kind()) {
      case Kind::Const: c *= f.value(); break;
      case Kind::Mul:
        for (const auto& g : f.kids()) self(g, self);
        break;
      case Kind::Neg:
        c = -c;
        self(f.kids()[0], self);
        break;
      default: flat.push_back(f);
    }
  };
  for (const auto& f : factors) take(f, take);
  if (c.is_zero()) return zero_expr();
  if (flat.empty()) return make_const(c);
  if (c.is_one() && flat.size() == 1) return flat.front();
  if (c == GaussRat(-1) && flat.size() == 1) return make_unary(Kind::Neg, flat.front(), flat.front().is_complex());
  Node n;
  n.kind = Kind::Mul;
  if (!c.is_one()) flat.insert(flat.begin(), make_const(c));
  n.complex = any_complex(flat);
  n.kids = std::move(flat);
  return NodeFactory::make(std::move(n));
}

Expr Expr::neg(const Expr& a) {
  switch (a.kind()) {
    case Kind::Const: return make_const(-a.value());
    case Kind::Neg: return a.kids()[0];
    case Kind::Mul:
      if (a.kids()[0].is_const()) return mul({Expr(-1), a});
      return make_unary(Kind::Neg, a, a.is_complex());
    default: return make_unary(Kind::Neg, a, a.is_complex());
  }
}

Expr Expr::recip(const Expr& a) {
  if (a.is_const()) {
    if (a.value().is_zero()) throw DivisionByZero("division by the constant 0");
    return make_const(GaussRat(1) / a.value());
  }
  if (a.kind() == Kind::Recip) return a.kids()[0];
  if (a.kind() == Kind::Neg) return neg(recip(a.kids()[0]));
  return make_unary(Kind::Recip, a, a.is_complex());
}

Expr Expr::pow(const Expr& a, int k) {
  if (k == 0) return Expr(1);
  if (k == 1) return a;
  if (a.is_const()) {
    if (k < 0 && a.value().is_zero()) throw DivisionByZero("negative power of 0");
    return make_const(a.value().pow(k));
  }
  if (k == -1) return recip(a);
  if (a.kind() == Kind::Pow) {
    long long kk = static_cast<long long>(a.exponent()) * k;
    if (kk > INT32_MAX || kk < INT32_MIN) throw OverflowError("exponent overflow");
    return pow(a.kids()[0], static_cast<int>(kk));
  }
  Node n;
  n.kind = Kind::Pow;
  n.kids = {a};
  n.k = k;
  n.complex = a.is_complex();
  return NodeFactory::make(std::move(n));
}

Expr Expr::exp(const Expr& a) {
  if (a.is_zero_const()) return Expr(1);
  return make_unary(Kind::Exp, a, a.is_complex());
}

Expr Expr::sin(const Expr& a) {
  if (a.is_zero_const()) return Expr(0);
  return make_unary(Kind::Sin, a, a.is_complex());
}

Expr Expr::cos(const Expr& a) {
  if (a.is_zero_const()) return Expr(1);
  return make_unary(Kind::Cos, a, a.is_complex());
}

Expr Expr::re(const Expr& a) {
  if (!a.is_complex()) return a;
  if (a.is_const()) return make_const(GaussRat(a.value().re()));
  return make_unary(Kind::Re, a, false);
}

Expr Expr::im(const Expr& a) {
  if (!a.is_complex()) return Expr(0);
  if (a.is_const()) return make_const(GaussRat(a.value().im()));
  return make_unary(Kind::Im, a, false);
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::add({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::add({a, Expr::neg(b)}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::mul({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::mul({a, Expr::recip(b)}); }
Expr operator-(const Expr& a) { return Expr::neg(a); }
Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

Expr var(const VarTable& vars, const std::string& name) {
  int k = vars.index_of(name);
  return Expr::variable(k, vars[k]);
}

Expr var(const VarTable& vars, int index) { return Expr::variable(index, vars[index]); }

ParseError::ParseError(const std::string& msg, std::size_t off)
    : std::runtime_error(msg + " at byte " + std::to_string(off)), offset(off) {}

EvalError::EvalError(const std::string& msg, std::string sub)
    : std::runtime_error(msg + ": " + sub), subtree(std::move(sub)) {}

// ---------------------------------------------------------------- printer

namespace {

enum Prec { kAdd = 1, kMul = 2, kNeg = 3, kPow = 4, kAtom = 5 };

struct Printed {
  std::string s;
  int prec;
};

Printed print_rec(const Expr& e);

std::string wrap(const Printed& p, int need) { return p.prec < need ? "(" + p.s + ")" : p.s; }

Printed print_const(const GaussRat& c) {
  if (c.is_real()) {
    const Rational& r = c.re();
    if (r.sign() < 0) {
      Printed inner = print_const(GaussRat(-r));
      return {"-" + wrap(inner, kPow), kNeg};
    }
    return {r.to_string(), r.is_integer() ? kAtom : kMul};
  }
  if (c.re().is_zero()) {
    const Rational& b = c.im();
    if (b.sign() < 0) {
      Printed inner = print_const(GaussRat(0, -b));
      return {"-" + wrap(inner, kPow), kNeg};
    }
    if (b.is_one()) return {"i", kAtom};
    return {b.to_string() + "*i", kMul};
  }
  return {c.to_string(), kAdd};
}

Printed print_rec(const Expr& e) {
  switch (e.kind()) {
    case Kind::Const: return print_const(e.value());
    case Kind::Var: return {e.var_name(), kAtom};
    case Kind::ConjVar: return {"conj(" + e.var_name() + ")", kAtom};
    case Kind::Add: {
      std::string s;
      bool first = true;
      for (const auto& t : e.kids()) {
        if (first) {
          s = print_rec(t).s;
          first = false;
          continue;
        }
        if (t.kind() == Kind::Neg) {
          s += " - " + wrap(print_rec(t.kids()[0]), kMul);
        } else if (t.is_const() && t.value().is_negative()) {
          s += " - " + wrap(print_const(-t.value()), kMul);
        } else if (t.kind() == Kind::Mul && t.kids()[0].is_const() && t.kids()[0].value().is_real() &&
                   t.kids()[0].value().is_negative()) {
          s += " - " + wrap(print_rec(Expr::neg(t)), kMul);
        } else {
          s += " + " + wrap(print_rec(t), kMul);
        }
      }
      return {s, kAdd};
    }
    case Kind::Mul: {
      const auto& ks = e.kids();
      std::size_t start = 0;
      std::string sign;
      std::vector<std::string> num, den;
      if (ks[0].is_const()) {
        GaussRat c = ks[0].value();
        if (c.is_real() && c.is_negative()) {
          sign = "-";
          c = -c;
        }
        if (!c.is_one()) num.push_back(wrap(print_const(c), kMul));
        start = 1;
      }
      for (std::size_t k = start; k < ks.size(); ++k) {
        if (ks[k].kind() == Kind::Recip) den.push_back(wrap(print_rec(ks[k].kids()[0]), kPow));
        else num.push_back(wrap(print_rec(ks[k]), kPow));
      }
      std::string s;
      if (num.empty()) s = "1";
      for (std::size_t k = 0; k < num.size(); ++k) s += (k ? "*" : "") + num[k];
      for (const auto& d : den) s += "/" + d;
      if (!sign.empty()) return {"-" + s, kNeg};
      return {s, kMul};
    }
    case Kind::Neg: return {"-" + wrap(print_rec(e.kids()[0]), kPow), kNeg};
    case Kind::Recip: return {"1/" + wrap(print_rec(e.kids()[0]), kPow), kMul};
    case Kind::Pow: {
      std::string base = wrap(print_rec(e.kids()[0]), kAtom);
      int k = e.exponent();
      return {base + "^" + (k < 0 ? "(" + std::to_string(k) + ")" : std::to_string(k)), kPow};
    }
    case Kind::Exp: return {"exp(" + print_rec(e.kids()[0]).s + ")", kAtom};
    case Kind::Sin: return {"sin(" + print_rec(e.kids()[0]).s + ")", kAtom};
    case Kind::Cos: return {"cos(" + print_rec(e.kids()[0]).s + ")", kAtom};
    case Kind::Re: return {"re(" + print_rec(e.kids()[0]).s + ")", kAtom};
    case Kind::Im: return {"im(" + print_rec(e.kids()[0]).s + ")", kAtom};
  }
  return {"?", kAtom};
}

}  // namespace

std::string print(const Expr& e) { return print_rec(e).s; }

// ---------------------------------------------------------------- parser

namespace {

class Parser {
 public:
  Parser(const std::string& text, const VarTable& vars) : t_(text), vars_(vars) {}

  Expr run() {
    Expr e = expr();
    skip();
    if (pos_ != t_.size()) throw ParseError("unexpected '" + std::string(1, t_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < t_.size() && t_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  Expr expr() {
    Expr lhs = term();
    std::vector<Expr> terms{lhs};
    for (;;) {
      if (accept('+')) terms.push_back(term());
      else if (accept('-')) terms.push_back(Expr::neg(term()));
      else break;
    }
    return terms.size() == 1 ? terms[0] : Expr::add(terms);
  }

  Expr term() {
    Expr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expr d = unary();
        if (d.is_zero_const()) throw ParseError("division by the constant 0", at);
        acc = acc / d;
      } else {
        break;
      }
    }
    return acc;
  }

  Expr unary() {
    if (accept('-')) return Expr::neg(unary());
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      bool paren = accept('(');
      bool negative = false;
      if (accept('-')) negative = true;
      else accept('+');
      skip();
      std::size_t at = pos_;
      std::size_t start = pos_;
      while (pos_ < t_.size() && std::isdigit(static_cast<unsigned char>(t_[pos_]))) ++pos_;
      if (start == pos_) throw ParseError("integer exponent expected", at);
      long long k = std::stoll(t_.substr(start, pos_ - start));
      if (k > 1000000) throw ParseError("exponent too large", at);
      if (paren) expect(')');
      if (base.is_zero_const() && negative) throw ParseError("negative power of 0", at);
      return Expr::pow(base, static_cast<int>(negative ? -k : k));
    }
    return base;
  }

  Expr primary() {
    skip();
    if (pos_ >= t_.size()) throw ParseError("unexpected end of input", pos_);
    char c = t_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < t_.size() && (std::isdigit(static_cast<unsigned char>(t_[pos_])) || t_[pos_] == '.')) ++pos_;
      std::string lit = t_.substr(start, pos_ - start);
      if (std::count(lit.begin(), lit.end(), '.') > 1 || lit == ".") throw ParseError("malformed number", start);
      try {
        return Expr(Rational::from_decimal(lit));
      } catch (const OverflowError&) {
        throw ParseError("number literal out of range", start);
      }
    }
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[pos_])) || t_[pos_] == '_')) ++pos_;
      std::string id = t_.substr(start, pos_ - start);
      skip();
      bool call = pos_ < t_.size() && t_[pos_] == '(';
      if (call) {
        static const char* fns[] = {"exp", "sin", "cos", "conj", "re", "im"};
        if (std::find(std::begin(fns), std::end(fns), id) == std::end(fns))
          throw ParseError("unknown function '" + id + "'", start);
        ++pos_;
        Expr arg = expr();
        expect(')');
        if (id == "exp") return Expr::exp(arg);
        if (id == "sin") return Expr::sin(arg);
        if (id == "cos") return Expr::cos(arg);
        if (id == "re") return Expr::re(arg);
        if (id == "im") return Expr::im(arg);
        if (!arg.is_complex()) throw ParseError("conj applied to a real expression", start);
        return conj(arg);
      }
      if (id == "i") return Expr::imag_unit();
      auto k = vars_.find(id);
      if (!k) throw ParseError("unknown variable '" + id + "'", start);
      return Expr::variable(*k, vars_[*k]);
    }
    throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  const std::string& t_;
  const VarTable& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(const std::string& text, const VarTable& vars) { return Parser(text, vars).run(); }

// ---------------------------------------------------------------- transformations

namespace {

Expr rebuild(const Expr& e, std::vector<Expr> kids) {
  switch (e.kind()) {
    case Kind::Add: return Expr::add(std::move(kids));
    case Kind::Mul: return Expr::mul(std::move(kids));
    case Kind::Neg: return Expr::neg(kids[0]);
    case Kind::Recip: return Expr::recip(kids[0]);
    case Kind::Pow: return Expr::pow(kids[0], e.exponent());
    case Kind::Exp: return Expr::exp(kids[0]);
    case Kind::Sin: return Expr::sin(kids[0]);
    case Kind::Cos: return Expr::cos(kids[0]);
    case Kind::Re: return Expr::re(kids[0]);
    case Kind::Im: return Expr::im(kids[0]);
    default: return e;
  }
}

template <class Leaf>
struct Mapper {
  Leaf leaf;
  std::unordered_map<const Node*, Expr> memo;

  Expr operator()(const Expr& e) {
    auto it = memo.find(e.id());
    if (it != memo.end()) return it->second;
    Expr out;
    if (e.kind() == Kind::Const || e.kind() == Kind::Var || e.kind() == Kind::ConjVar) {
      out = leaf(e);
    } else {
      std::vector<Expr> kids;
      kids.reserve(e.kids().size());
      for (const auto& k : e.kids()) kids.push_back((*this)(k));
      out = rebuild(e, std::move(kids));
    }
    memo.emplace(e.id(), out);
    return out;
  }
};

template <class Leaf>
Mapper<Leaf> make_mapper(Leaf l) {
  return Mapper<Leaf>{std::move(l), {}};
}

}  // namespace

Expr conj(const Expr& e) {
  // Real-typed subtrees (including every re/im node) are their own conjugate.
  std::unordered_map<const Node*, Expr> memo;
  auto rec = [&](const Expr& x, auto& self) -> Expr {
    if (!x.is_complex()) return x;
    auto it = memo.find(x.id());
    if (it != memo.end()) return it->second;
    Expr out;
    switch (x.kind()) {
      case Kind::Const: out = Expr(x.value().conj()); break;
      case Kind::Var: out = Expr::conj_variable(x.var_index(), VarInfo{x.var_name(), x.var_kind()}); break;
      case Kind::ConjVar: out = Expr::variable(x.var_index(), VarInfo{x.var_name(), x.var_kind()}); break;
      default: {
        std::vector<Expr> kids;
        for (const auto& k : x.kids()) kids.push_back(self(k, self));
        out = rebuild(x, std::move(kids));
      }
    }
    memo.emplace(x.id(), out);
    return out;
  };
  return rec(e, rec);
}

Expr substitute(const Expr& e, const std::vector<Expr>& repl) {
  std::unordered_map<int, Expr> conj_cache;
  auto m = make_mapper([&](const Expr& leaf) -> Expr {
    if (leaf.kind() == Kind::Var) {
      if (leaf.var_index() >= static_cast<int>(repl.size()))
        throw std::out_of_range("substitute: no replacement for " + leaf.var_name());
      return repl[static_cast<std::size_t>(leaf.var_index())];
    }
    if (leaf.kind() == Kind::ConjVar) {
      if (leaf.var_index() >= static_cast<int>(repl.size()))
        throw std::out_of_range("substitute: no replacement for " + leaf.var_name());
      auto it = conj_cache.find(leaf.var_index());
      if (it != conj_cache.end()) return it->second;
      Expr c = conj(repl[static_cast<std::size_t>(leaf.var_index())]);
      conj_cache.emplace(leaf.var_index(), c);
      return c;
    }
    return leaf;
  });
  return m(e);
}

std::vector<int> free_variables(const Expr& e) {
  std::vector<int> out;
  std::unordered_map<const Node*, bool> seen;
  auto walk = [&](const Expr& x, auto& self) -> void {
    if (!seen.emplace(x.id(), true).second) return;
    if (x.kind() == Kind::Var || x.kind() == Kind::ConjVar) out.push_back(x.var_index());
    for (const auto& k : x.kids()) self(k, self);
  };
  walk(e, walk);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t node_count(const Expr& e) {
  std::unordered_map<const Node*, bool> seen;
  auto walk = [&](const Expr& x, auto& self) -> void {
    if (!seen.emplace(x.id(), true).second) return;
    for (const auto& k : x.kids()) self(k, self);
  };
  walk(e, walk);
  return seen.size();
}

// ---------------------------------------------------------------- differentiation

namespace {

struct Differ {
  int v;
  bool wrt_conj;
  std::unordered_map<const Node*, Expr> memo;
  Differ* other = nullptr;  // derivative in the conjugate direction, for re/im

  Expr operator()(const Expr& e) {
    auto it = memo.find(e.id());
    if (it != memo.end()) return it->second;
    Expr d = compute(e);
    memo.emplace(e.id(), d);
    return d;
  }

  Expr compute(const Expr& e) {
    const auto& ks = e.kids();
    switch (e.kind()) {
      case Kind::Const: return Expr(0);
      case Kind::Var:
        if (e.var_index() != v) return Expr(0);
        if (e.var_kind() == VarKind::Complex) return Expr(wrt_conj ? 0 : 1);
        return Expr(1);
      case Kind::ConjVar: return Expr(e.var_index() == v && wrt_conj ? 1 : 0);
      case Kind::Add: {
        std::vector<Expr> t;
        for (const auto& k : ks) t.push_back((*this)(k));
        return Expr::add(std::move(t));
      }
      case Kind::Mul: {
        std::vector<Expr> t;
        for (std::size_t j = 0; j < ks.size(); ++j) {
          Expr dj = (*this)(ks[j]);
          if (dj.is_zero_const()) continue;
          std::vector<Expr> f;
          for (std::size_t i = 0; i < ks.size(); ++i) f.push_back(i == j ? dj : ks[i]);
          t.push_back(Expr::mul(std::move(f)));
        }
        return Expr::add(std::move(t));
      }
      case Kind::Neg: return Expr::neg((*this)(ks[0]));
      case Kind::Recip: {
        Expr da = (*this)(ks[0]);
        if (da.is_zero_const()) return Expr(0);
        return Expr::neg(Expr::mul({da, Expr::pow(e, 2)}));
      }
      case Kind::Pow: {
        Expr da = (*this)(ks[0]);
        if (da.is_zero_const()) return Expr(0);
        return Expr::mul({Expr(e.exponent()), Expr::pow(ks[0], e.exponent() - 1), da});
      }
      case Kind::Exp: {
        Expr da = (*this)(ks[0]);
        if (da.is_zero_const()) return Expr(0);
        return Expr::mul({e, da});
      }
      case Kind::Sin: {
        Expr da = (*this)(ks[0]);
        if (da.is_zero_const()) return Expr(0);
        return Expr::mul({Expr::cos(ks[0]), da});
      }
      case Kind::Cos: {
        Expr da = (*this)(ks[0]);
        if (da.is_zero_const()) return Expr(0);
        return Expr::neg(Expr::mul({Expr::sin(ks[0]), da}));
      }
      case Kind::Re:
      case Kind::Im: {
        Expr da = (*this)(ks[0]);
        if (!other) {  // real variable: re and im commute with the derivative
          return e.kind() == Kind::Re ? Expr::re(da) : Expr::im(da);
        }
        // Wirtinger: d(re f) = (d f + conj(d' f)) / 2 with d' the conjugate derivative.
        Expr db = conj((*other)(ks[0]));
        if (e.kind() == Kind::Re) return Expr::mul({Expr(Rational(1, 2)), da + db});
        return Expr::mul({Expr(GaussRat(0, Rational(-1, 2))), da - db});
      }
    }
    return Expr(0);
  }
};

}  // namespace

Expr diff(const Expr& e, int var_index, bool wrt_conj) {
  // Determine whether the variable is complex from any occurrence in e.
  bool complex_var = false;
  std::unordered_map<const Node*, bool> seen;
  auto walk = [&](const Expr& x, auto& self) -> void {
    if (complex_var || !seen.emplace(x.id(), true).second) return;
    if ((x.kind() == Kind::Var || x.kind() == Kind::ConjVar) && x.var_index() == var_index)
      complex_var = x.var_kind() == VarKind::Complex;
    for (const auto& k : x.kids()) self(k, self);
  };
  walk(e, walk);
  Differ d{var_index, wrt_conj, {}, nullptr};
  Differ dc{var_index, !wrt_conj, {}, nullptr};
  if (complex_var) {
    d.other = &dc;
    dc.other = &d;
  }
  return d(e);
}

// ---------------------------------------------------------------- evaluation

Tape::Tape(const std::vector<Expr>& outputs) {
  std::unordered_map<const Node*, int> slot;
  auto emit = [&](const Expr& e, auto& self) -> int {
    auto it = slot.find(e.id());
    if (it != slot.end()) return it->second;
    Op op;
    op.kind = e.kind();
    op.node = e.id();
    switch (e.kind()) {
      case Kind::Const: op.c = e.value().to_complex(); break;
      case Kind::Var:
      case Kind::ConjVar: op.a = e.var_index(); break;
      case Kind::Add:
      case Kind::Mul:
        for (const auto& k : e.kids()) op.args.push_back(self(k, self));
        break;
      default:
        op.a = self(e.kids()[0], self);
        op.k = e.exponent();
    }
    int s = static_cast<int>(ops_.size());
    ops_.push_back(std::move(op));
    keep_.push_back(e);
    slot.emplace(e.id(), s);
    return s;
  };
  for (const auto& e : outputs) out_slots_.push_back(emit(e, emit));
}

void Tape::eval(const Point& p, std::vector<cplx>& out, std::vector<cplx>& v) const {
  v.resize(ops_.size());
  for (std::size_t s = 0; s < ops_.size(); ++s) {
    const Op& op = ops_[s];
    switch (op.kind) {
      case Kind::Const: v[s] = op.c; break;
      case Kind::Var:
        if (op.a >= static_cast<int>(p.size())) throw EvalError("point too short", keep_[s].str());
        v[s] = p[static_cast<std::size_t>(op.a)];
        break;
      case Kind::ConjVar:
        if (op.a >= static_cast<int>(p.size())) throw EvalError("point too short", keep_[s].str());
        v[s] = std::conj(p[static_cast<std::size_t>(op.a)]);
        break;
      case Kind::Add: {
        cplx acc = 0;
        for (int a : op.args) acc += v[static_cast<std::size_t>(a)];
        v[s] = acc;
        break;
      }
      case Kind::Mul: {
        cplx acc = 1;
        for (int a : op.args) acc *= v[static_cast<std::size_t>(a)];
        v[s] = acc;
        break;
      }
      case Kind::Neg: v[s] = -v[static_cast<std::size_t>(op.a)]; break;
      case Kind::Recip: {
        cplx d = v[static_cast<std::size_t>(op.a)];
        if (d == cplx(0.0, 0.0)) throw EvalError("division by zero", keep_[s].str());
        v[s] = 1.0 / d;
        break;
      }
      case Kind::Pow: {
        cplx b = v[static_cast<std::size_t>(op.a)];
        int k = op.k;
        if (k < 0) {
          if (b == cplx(0.0, 0.0)) throw EvalError("division by zero", keep_[s].str());
          b = 1.0 / b;
          k = -k;
        }
        cplx r = 1;
        while (k) {
          if (k & 1) r *= b;
          k >>= 1;
          if (k) b *= b;
        }
        v[s] = r;
        break;
      }
      case Kind::Exp: {
        cplx a = v[static_cast<std::size_t>(op.a)];
        v[s] = a.imag() == 0.0 ? cplx(std::exp(a.real()), 0.0) : std::exp(a);
        break;
      }
      case Kind::Sin: {
        cplx a = v[static_cast<std::size_t>(op.a)];
        v[s] = a.imag() == 0.0 ? cplx(std::sin(a.real()), 0.0) : std::sin(a);
        break;
      }
      case Kind::Cos: {
        cplx a = v[static_cast<std::size_t>(op.a)];
        v[s] = a.imag() == 0.0 ? cplx(std::cos(a.real()), 0.0) : std::cos(a);
        break;
      }
      case Kind::Re: v[s] = v[static_cast<std::size_t>(op.a)].real(); break;
      case Kind::Im: v[s] = v[static_cast<std::size_t>(op.a)].imag(); break;
    }
  }
  out.resize(out_slots_.size());
  for (std::size_t k = 0; k < out_slots_.size(); ++k) out[k] = v[static_cast<std::size_t>(out_slots_[k])];
}

std::vector<cplx> Tape::eval(const Point& p) const {
  std::vector<cplx> out, scratch;
  eval(p, out, scratch);
  return out;
}

cplx eval(const Expr& e, const Point& p) { return Tape({e}).eval(p)[0]; }

// ---------------------------------------------------------------- realification

Realification realify(const VarTable& cv) {
  Realification r;
  for (int k = 0; k < cv.size(); ++k) {
    if (cv[k].kind == VarKind::Real) r.real.add(cv[k].name);
    else {
      r.real.add(cv[k].name + "_re");
      r.real.add(cv[k].name + "_im");
    }
  }
  int j = 0;
  for (int k = 0; k < cv.size(); ++k) {
    if (cv[k].kind == VarKind::Real) {
      r.parts.emplace_back(var(r.real, j), Expr(0));
      j += 1;
    } else {
      r.parts.emplace_back(var(r.real, j), var(r.real, j + 1));
      j += 2;
    }
  }
  return r;
}

Point realify_point(const Point& p, const VarTable& cv) {
  Point out;
  for (int k = 0; k < cv.size(); ++k) {
    cplx v = p.at(static_cast<std::size_t>(k));
    if (cv[k].kind == VarKind::Real) out.emplace_back(v.real(), 0.0);
    else {
      out.emplace_back(v.real(), 0.0);
      out.emplace_back(v.imag(), 0.0);
    }
  }
  return out;
}

namespace {

using Parts = std::pair<Expr, Expr>;

Parts cmul(const Parts& a, const Parts& b) {
  if (a.second.is_zero_const() && b.second.is_zero_const()) return {a.first * b.first, Expr(0)};
  return {a.first * b.first - a.second * b.second, a.first * b.second + a.second * b.first};
}

struct Splitter {
  const Realification& r;
  std::unordered_map<const Node*, Parts> memo;

  Parts operator()(const Expr& e) {
    auto it = memo.find(e.id());
    if (it != memo.end()) return it->second;
    Parts out = compute(e);
    memo.emplace(e.id(), out);
    return out;
  }

  Parts compute(const Expr& e) {
    const auto& ks = e.kids();
    switch (e.kind()) {
      case Kind::Const: return {Expr(GaussRat(e.value().re())), Expr(GaussRat(e.value().im()))};
      case Kind::Var: return r.parts.at(static_cast<std::size_t>(e.var_index()));
      case Kind::ConjVar: {
        const auto& p = r.parts.at(static_cast<std::size_t>(e.var_index()));
        return {p.first, Expr::neg(p.second)};
      }
      case Kind::Add: {
        std::vector<Expr> re, im;
        for (const auto& k : ks) {
          auto p = (*this)(k);
          re.push_back(p.first);
          im.push_back(p.second);
        }
        return {Expr::add(re), Expr::add(im)};
      }
      case Kind::Mul: {
        Parts acc{Expr(1), Expr(0)};
        for (const auto& k : ks) acc = cmul(acc, (*this)(k));
        return acc;
      }
      case Kind::Neg: {
        auto p = (*this)(ks[0]);
        return {Expr::neg(p.first), Expr::neg(p.second)};
      }
      case Kind::Recip: {
        auto p = (*this)(ks[0]);
        if (p.second.is_zero_const()) return {Expr::recip(p.first), Expr(0)};
        Expr n = Expr::recip(Expr::pow(p.first, 2) + Expr::pow(p.second, 2));
        return {p.first * n, Expr::neg(p.second * n)};
      }
      case Kind::Pow: {
        int k = e.exponent();
        Parts base = (*this)(ks[0]);
        if (k < 0) {
          Parts inv = compute(Expr::recip(ks[0]));
          base = inv;
          k = -k;
        }
        if (base.second.is_zero_const()) return {Expr::pow(base.first, k), Expr(0)};
        Parts acc{Expr(1), Expr(0)};
        while (k) {
          if (k & 1) acc = cmul(acc, base);
          k >>= 1;
          if (k) base = cmul(base, base);
        }
        return acc;
      }
      case Kind::Exp: {
        auto p = (*this)(ks[0]);
        Expr m = Expr::exp(p.first);
        if (p.second.is_zero_const()) return {m, Expr(0)};
        return {m * Expr::cos(p.second), m * Expr::sin(p.second)};
      }
      case Kind::Sin:
      case Kind::Cos: {
        auto p = (*this)(ks[0]);
        if (p.second.is_zero_const())
          return {e.kind() == Kind::Sin ? Expr::sin(p.first) : Expr::cos(p.first), Expr(0)};
        Expr ch = Expr(Rational(1, 2)) * (Expr::exp(p.second) + Expr::exp(Expr::neg(p.second)));
        Expr sh = Expr(Rational(1, 2)) * (Expr::exp(p.second) - Expr::exp(Expr::neg(p.second)));
        if (e.kind() == Kind::Sin) return {Expr::sin(p.first) * ch, Expr::cos(p.first) * sh};
        return {Expr::cos(p.first) * ch, Expr::neg(Expr::sin(p.first) * sh)};
      }
      case Kind::Re: return {(*this)(ks[0]).first, Expr(0)};
      case Kind::Im: return {(*this)(ks[0]).second, Expr(0)};
    }
    return {Expr(0), Expr(0)};
  }
};

}  // namespace

std::pair<Expr, Expr> to_real(const Expr& e, const Realification& r) {
  Splitter s{r, {}};
  return s(e);
}

}  // namespace pforge
