#include "pforge/rational.hpp"

#include <limits>

namespace pforge {

namespace {

using i128 = __int128;

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

bool fits(i128 v) {
  return v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max();
}

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) {
  *this = make(n, d);
}

Rational Rational::make(i128 n, i128 d) {
  if (d == 0) throw DivisionByZero("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  i128 g = gcd128(n, d);
  if (g > 1) {
    n /= g;
    d /= g;
  }
  if (!fits(n) || !fits(d)) throw OverflowError("rational overflow");
  Rational r;
  r.num_ = static_cast<std::int64_t>(n);
  r.den_ = static_cast<std::int64_t>(d);
  return r;
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::operator-() const {
  return make(-static_cast<i128>(num_), den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  if (a.den_ == 1 && b.den_ == 1) return Rational::make(static_cast<i128>(a.num_) + b.num_, 1);
  return Rational::make(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                        static_cast<i128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
  return Rational::make(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw DivisionByZero("rational division by zero");
  return Rational::make(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  i128 l = static_cast<i128>(a.num_) * b.den_;
  i128 r = static_cast<i128>(b.num_) * a.den_;
  if (l < r) return std::strong_ordering::less;
  if (l > r) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational Rational::pow(int k) const {
  if (k < 0) return Rational(1) / pow(-k);
  Rational out(1), base = *this;
  while (k > 0) {
    if (k & 1) out *= base;
    k >>= 1;
    if (k) base *= base;
  }
  return out;
}

Rational Rational::from_decimal(const std::string& text) {
  auto dot = text.find('.');
  std::string digits = text;
  std::int64_t den = 1;
  if (dot != std::string::npos) {
    digits = text.substr(0, dot) + text.substr(dot + 1);
    for (std::size_t k = dot + 1; k < text.size(); ++k) {
      if (den > std::numeric_limits<std::int64_t>::max() / 10) throw OverflowError("decimal literal too long");
      den *= 10;
    }
  }
  i128 n = 0;
  for (char c : digits) {
    n = n * 10 + (c - '0');
    if (!fits(n)) throw OverflowError("integer literal too large");
  }
  return make(n, den);
}

std::string GaussRat::to_string() const {
  if (im_.is_zero()) return re_.to_string();
  std::string imag = im_.is_one() ? "i" : (im_ == Rational(-1) ? "-i" : im_.to_string() + "*i");
  if (re_.is_zero()) return imag;
  if (im_.sign() < 0) {
    std::string mag = (-im_).is_one() ? "i" : (-im_).to_string() + "*i";
    return re_.to_string() + " - " + mag;
  }
  return re_.to_string() + " + " + imag;
}

GaussRat operator*(const GaussRat& a, const GaussRat& b) {
  if (a.im_.is_zero() && b.im_.is_zero()) return GaussRat(a.re_ * b.re_);
  return {a.re_ * b.re_ - a.im_ * b.im_, a.re_ * b.im_ + a.im_ * b.re_};
}

GaussRat operator/(const GaussRat& a, const GaussRat& b) {
  if (b.is_zero()) throw DivisionByZero("division by zero constant");
  if (b.im_.is_zero()) return {a.re_ / b.re_, a.im_ / b.re_};
  Rational n = b.re_ * b.re_ + b.im_ * b.im_;
  GaussRat num = a * b.conj();
  return {num.re_ / n, num.im_ / n};
}

std::strong_ordering operator<=>(const GaussRat& a, const GaussRat& b) {
  if (auto c = a.re_ <=> b.re_; c != 0) return c;
  return a.im_ <=> b.im_;
}

GaussRat GaussRat::pow(int k) const {
  if (k < 0) return GaussRat(1) / pow(-k);
  GaussRat out(1), base = *this;
  while (k > 0) {
    if (k & 1) out = out * base;
    k >>= 1;
    if (k) base = base * base;
  }
  return out;
}

}  // namespace pforge
