// Expanded normal form used by is_zero.
//
// A normal form is a sum of terms c * prod(atom^k) * exp(A), with c an exact
// Gaussian rational, k in Z (Laurent), at most one merged exponential per term
// and A itself in normal form. Atoms are variables, conjugate variables,
// sin/cos of a normal form, and reciprocals of non-monomial normal forms.
// sin^2 is rewritten as 1 - cos^2. re/im are removed through conj.

#include <map>
#include <unordered_map>

#include "pforge/rng.hpp"
#include "pforge/symexpr.hpp"

namespace pforge {

namespace {

struct CanonLimit : std::runtime_error {
  CanonLimit() : std::runtime_error("normal form exceeds size limit") {}
};

struct Mono {
  std::vector<std::pair<int, int>> f;  // (atom id, exponent), sorted, no zero exponents
  int e = -1;                          // exponential argument id
  auto operator<=>(const Mono&) const = default;
};

using Poly = std::map<Mono, GaussRat>;

constexpr std::size_t kMaxTerms = 60000;

class Canon {
 public:
  Poly canon(const Expr& x) {
    auto it = memo_.find(x.id());
    if (it != memo_.end()) return it->second;
    Poly p = compute(x);
    keep_.push_back(x);
    memo_.emplace(x.id(), p);
    return p;
  }

  Expr to_expr(const Poly& p) {
    std::vector<Expr> terms;
    for (const auto& [m, c] : p) {
      std::vector<Expr> f{Expr(c)};
      for (auto [a, k] : m.f) f.push_back(Expr::pow(atoms_[static_cast<std::size_t>(a)].expr, k));
      if (m.e >= 0) f.push_back(Expr::exp(to_expr(exp_args_[static_cast<std::size_t>(m.e)])));
      terms.push_back(Expr::mul(std::move(f)));
    }
    return Expr::add(std::move(terms));
  }

 private:
  struct Atom {
    Expr expr;
    int cos_partner = -1;  // for sin atoms
    int recip_of = -1;     // for reciprocal atoms: exp_args_-style index into recips_
  };

  static Poly constant(const GaussRat& c) {
    Poly p;
    if (!c.is_zero()) p.emplace(Mono{}, c);
    return p;
  }

  static Poly atom_poly(int a, int k = 1) {
    Poly p;
    p.emplace(Mono{{{a, k}}, -1}, GaussRat(1));
    return p;
  }

  std::string key(const Poly& p) const {
    std::string s;
    for (const auto& [m, c] : p) {
      s += '[' + c.to_string() + '|';
      for (auto [a, k] : m.f) s += std::to_string(a) + '^' + std::to_string(k) + ',';
      if (m.e >= 0) s += 'E' + std::to_string(m.e);
      s += ']';
    }
    return s;
  }

  int atom(const std::string& k, const Expr& e) {
    auto it = atom_ids_.find(k);
    if (it != atom_ids_.end()) return it->second;
    int id = static_cast<int>(atoms_.size());
    atoms_.push_back({e});
    atom_ids_.emplace(k, id);
    return id;
  }

  int exp_id(const Poly& arg) {
    std::string k = key(arg);
    auto it = exp_ids_.find(k);
    if (it != exp_ids_.end()) return it->second;
    int id = static_cast<int>(exp_args_.size());
    exp_args_.push_back(arg);
    exp_ids_.emplace(k, id);
    return id;
  }

  static void add_into(Poly& acc, const Mono& m, const GaussRat& c) {
    auto [it, inserted] = acc.emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) acc.erase(it);
    }
    if (acc.size() > kMaxTerms) throw CanonLimit();
  }

  static Poly add(const Poly& a, const Poly& b) {
    Poly out = a;
    for (const auto& [m, c] : b) add_into(out, m, c);
    return out;
  }

  static Poly scale(const Poly& a, const GaussRat& s) {
    Poly out;
    if (s.is_zero()) return out;
    for (const auto& [m, c] : a) out.emplace(m, c * s);
    return out;
  }

  // Product of two monomials, then trigonometric and reciprocal rewriting.
  void mono_mul(const Mono& x, const Mono& y, const GaussRat& c, Poly& acc) {
    Mono m;
    std::size_t i = 0, j = 0;
    while (i < x.f.size() || j < y.f.size()) {
      if (j >= y.f.size() || (i < x.f.size() && x.f[i].first < y.f[j].first)) m.f.push_back(x.f[i++]);
      else if (i >= x.f.size() || y.f[j].first < x.f[i].first) m.f.push_back(y.f[j++]);
      else {
        int k = x.f[i].second + y.f[j].second;
        if (k != 0) m.f.emplace_back(x.f[i].first, k);
        ++i;
        ++j;
      }
    }
    if (x.e >= 0 && y.e >= 0) {
      Poly arg = add(exp_args_[static_cast<std::size_t>(x.e)], exp_args_[static_cast<std::size_t>(y.e)]);
      m.e = arg.empty() ? -1 : exp_id(arg);
    } else {
      m.e = x.e >= 0 ? x.e : y.e;
    }
    emit(m, c, acc);
  }

  // Pushes c*m into acc after rewriting sin^k (k >= 2) and negative powers of
  // reciprocal atoms.
  void emit(const Mono& m, const GaussRat& c, Poly& acc) {
    for (std::size_t q = 0; q < m.f.size(); ++q) {
      auto [a, k] = m.f[q];
      const Atom at = atoms_[static_cast<std::size_t>(a)];
      if (at.cos_partner >= 0 && k >= 2) {
        Mono rest = m;
        if (k == 2) rest.f.erase(rest.f.begin() + static_cast<long>(q));
        else rest.f[q].second = k - 2;
        // sin^2 = 1 - cos^2
        emit(rest, c, acc);
        Poly cc = atom_poly(at.cos_partner, 2);
        Mono cm = cc.begin()->first;
        Poly tmp;
        mono_mul(rest, cm, -c, tmp);
        for (const auto& [mm, cv] : tmp) add_into(acc, mm, cv);
        return;
      }
      if (at.recip_of >= 0 && k < 0) {
        Mono rest = m;
        rest.f.erase(rest.f.begin() + static_cast<long>(q));
        Poly base = recips_[static_cast<std::size_t>(at.recip_of)];
        Poly pw = power(base, -k);
        Poly tmp;
        for (const auto& [bm, bc] : pw) mono_mul(rest, bm, c * bc, tmp);
        for (const auto& [mm, cv] : tmp) add_into(acc, mm, cv);
        return;
      }
    }
    add_into(acc, m, c);
  }

  Poly mul(const Poly& a, const Poly& b) {
    Poly out;
    if (a.size() * b.size() > 40 * kMaxTerms) throw CanonLimit();
    for (const auto& [ma, ca] : a)
      for (const auto& [mb, cb] : b) mono_mul(ma, mb, ca * cb, out);
    return out;
  }

  Poly power(Poly base, int k) {
    Poly out = constant(GaussRat(1));
    while (k > 0) {
      if (k & 1) out = mul(out, base);
      k >>= 1;
      if (k) base = mul(base, base);
    }
    return out;
  }

  Mono invert(const Mono& m) {
    Mono r;
    for (auto [a, k] : m.f) r.f.emplace_back(a, -k);
    if (m.e >= 0) r.e = exp_id(scale(exp_args_[static_cast<std::size_t>(m.e)], GaussRat(-1)));
    return r;
  }

  Poly reciprocal(const Poly& p) {
    if (p.empty()) throw DivisionByZero("reciprocal of zero in normal form");
    if (p.size() == 1) {
      const auto& [m, c] = *p.begin();
      Poly out;
      emit(invert(m), GaussRat(1) / c, out);
      return out;
    }
    // Pull out the common monomial content: the minimum exponent of every atom
    // over all terms, absent atoms counting as exponent 0.
    Mono g;
    std::map<int, int> mins;
    for (const auto& [m, c] : p)
      for (auto [a, k] : m.f) mins.emplace(a, 0);
    for (auto& [a, lo] : mins) {
      bool init = false;
      for (const auto& [m, c] : p) {
        int v = 0;
        for (auto [b, k] : m.f)
          if (b == a) v = k;
        lo = init ? std::min(lo, v) : v;
        init = true;
      }
    }
    for (auto [a, k] : mins)
      if (k != 0) g.f.emplace_back(a, k);
    int shared_e = p.begin()->first.e;
    for (const auto& [m, c] : p)
      if (m.e != shared_e) shared_e = -1;
    g.e = shared_e;
    Poly rest;
    Mono ginv = invert(g);
    for (const auto& [m, c] : p) {
      Mono mm;
      // m / g is a plain Laurent product, no rewriting needed
      std::map<int, int> cur(m.f.begin(), m.f.end());
      for (auto [a, k] : ginv.f) cur[a] += k;
      for (auto [a, k] : cur)
        if (k != 0) mm.f.emplace_back(a, k);
      mm.e = shared_e >= 0 ? -1 : m.e;
      add_into(rest, mm, c);
    }
    if (rest.size() == 1) {
      const auto& [m, c] = *rest.begin();
      Mono inv = invert(m);
      Poly tmp;
      mono_mul(inv, ginv, GaussRat(1) / c, tmp);
      return tmp;
    }
    GaussRat lead = rest.begin()->second;
    Poly normed = scale(rest, GaussRat(1) / lead);
    std::string k = "R" + key(normed);
    int id;
    auto it = atom_ids_.find(k);
    if (it != atom_ids_.end()) {
      id = it->second;
    } else {
      id = atom(k, Expr::recip(to_expr(normed)));
      atoms_[static_cast<std::size_t>(id)].recip_of = static_cast<int>(recips_.size());
      recips_.push_back(normed);
    }
    Poly out;
    Mono r{{{id, 1}}, -1};
    mono_mul(r, ginv, GaussRat(1) / lead, out);
    return out;
  }

  Poly trig(const Expr& x) {
    Poly arg = canon(x.kids()[0]);
    bool is_sin = x.kind() == Kind::Sin;
    if (arg.empty()) return constant(GaussRat(is_sin ? 0 : 1));
    GaussRat sign(1);
    if (arg.begin()->second.is_negative()) {
      arg = scale(arg, GaussRat(-1));
      if (is_sin) sign = GaussRat(-1);
    }
    std::string k = key(arg);
    Expr ae = to_expr(arg);
    int s = atom("S" + k, Expr::sin(ae));
    int c = atom("C" + k, Expr::cos(ae));
    atoms_[static_cast<std::size_t>(s)].cos_partner = c;
    return scale(atom_poly(is_sin ? s : c), sign);
  }

  Poly compute(const Expr& x) {
    const auto& ks = x.kids();
    switch (x.kind()) {
      case Kind::Const: return constant(x.value());
      case Kind::Var: return atom_poly(atom("v" + std::to_string(x.var_index()), x));
      case Kind::ConjVar: return atom_poly(atom("w" + std::to_string(x.var_index()), x));
      case Kind::Add: {
        Poly acc;
        for (const auto& k : ks)
          for (const auto& [m, c] : canon(k)) add_into(acc, m, c);
        return acc;
      }
      case Kind::Mul: {
        Poly acc = constant(GaussRat(1));
        for (const auto& k : ks) acc = mul(acc, canon(k));
        return acc;
      }
      case Kind::Neg: return scale(canon(ks[0]), GaussRat(-1));
      case Kind::Recip: return reciprocal(canon(ks[0]));
      case Kind::Pow: {
        Poly b = canon(ks[0]);
        int k = x.exponent();
        if (k < 0) {
          b = reciprocal(b);
          k = -k;
        }
        return power(b, k);
      }
      case Kind::Exp: {
        Poly arg = canon(ks[0]);
        if (arg.empty()) return constant(GaussRat(1));
        Poly p;
        p.emplace(Mono{{}, exp_id(arg)}, GaussRat(1));
        return p;
      }
      case Kind::Sin:
      case Kind::Cos: return trig(x);
      case Kind::Re: return canon(Expr(Rational(1, 2)) * (ks[0] + conj(ks[0])));
      case Kind::Im: return canon(Expr(GaussRat(0, Rational(-1, 2))) * (ks[0] - conj(ks[0])));
    }
    return {};
  }

  std::vector<Atom> atoms_;
  std::map<std::string, int> atom_ids_;
  std::vector<Poly> exp_args_;
  std::map<std::string, int> exp_ids_;
  std::vector<Poly> recips_;
  std::unordered_map<const Node*, Poly> memo_;
  std::vector<Expr> keep_;
};

}  // namespace

const char* to_string(ZeroStatus s) {
  switch (s) {
    case ZeroStatus::ProvenZero: return "proven-zero";
    case ZeroStatus::ProvenNonzero: return "proven-nonzero";
    case ZeroStatus::Unknown: return "unknown";
  }
  return "unknown";
}

Expr canonicalize(const Expr& e) {
  Canon c;
  return c.to_expr(c.canon(e));
}

std::optional<std::size_t> canonical_terms(const Expr& e) {
  try {
    Canon c;
    return c.canon(e).size();
  } catch (const CanonLimit&) {
    return std::nullopt;
  } catch (const OverflowError&) {
    return std::nullopt;
  }
}

ZeroResult is_zero(const Expr& e, std::uint64_t seed) {
  ZeroResult r;
  bool canon_nonzero = false;
  try {
    Canon c;
    Poly p = c.canon(e);
    if (p.empty()) {
      r.status = ZeroStatus::ProvenZero;
      return r;
    }
    canon_nonzero = true;
    if (p.size() == 1 && p.begin()->first.f.empty() && p.begin()->first.e < 0) {
      r.status = ZeroStatus::ProvenNonzero;
      r.witness_abs = std::abs(p.begin()->second.to_complex());
      r.note = "nonzero constant";
      return r;
    }
  } catch (const CanonLimit&) {
    r.note = "normal form too large; sampled";
  } catch (const OverflowError&) {
    r.note = "exact coefficient overflow; sampled";
  } catch (const DivisionByZero&) {
    r.note = "division by zero in normal form; sampled";
  }

  // Collect variable metadata from the tree.
  std::map<int, VarInfo> vars;
  std::unordered_map<const Node*, bool> seen;
  auto walk = [&](const Expr& x, auto& self) -> void {
    if (!seen.emplace(x.id(), true).second) return;
    if (x.kind() == Kind::Var || x.kind() == Kind::ConjVar) vars[x.var_index()] = {x.var_name(), x.var_kind()};
    for (const auto& k : x.kids()) self(k, self);
  };
  walk(e, walk);
  int n = vars.empty() ? 0 : vars.rbegin()->first + 1;
  Tape tape({e});
  std::vector<cplx> out, scratch;
  double best = 0.0;
  Point best_p;
  for (std::uint64_t s = 0; s < 24; ++s) {
    CounterRng rng(seed, s);
    Point p(static_cast<std::size_t>(n), cplx(0.0, 0.0));
    for (const auto& [k, info] : vars) {
      double re = rng.uniform(-1.5, 1.5);
      double im = info.kind == VarKind::Complex ? rng.uniform(-1.5, 1.5) : 0.0;
      p[static_cast<std::size_t>(k)] = {re, im};
    }
    try {
      tape.eval(p, out, scratch);
    } catch (const EvalError&) {
      continue;
    }
    double a = std::abs(out[0]);
    if (std::isfinite(a) && a > best) {
      best = a;
      best_p = p;
    }
  }
  if (best > 1e-8) {
    r.status = ZeroStatus::ProvenNonzero;
    r.witness_abs = best;
    for (const auto& [k, info] : vars) r.witness.emplace_back(info.name, best_p[static_cast<std::size_t>(k)]);
  } else {
    r.status = ZeroStatus::Unknown;
    if (canon_nonzero && r.note.empty()) r.note = "normal form nonzero but all samples vanish";
  }
  return r;
}

}  // namespace pforge
