#pragma once

#include <complex>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pforge {

// Raised when an exact computation leaves the int64 range.
struct OverflowError : std::overflow_error {
  using std::overflow_error::overflow_error;
};

struct DivisionByZero : std::domain_error {
  using std::domain_error::domain_error;
};

class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit by design
  Rational(std::int64_t n, std::int64_t d);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_integer() const { return den_ == 1; }
  int sign() const { return (num_ > 0) - (num_ < 0); }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string to_string() const;

  Rational operator-() const;
  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

  Rational pow(int k) const;

  // Exact value of a finite decimal literal such as "12.375".
  static Rational from_decimal(const std::string& text);

 private:
  static Rational make(__int128 n, __int128 d);
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// Gaussian rational a + b i.
class GaussRat {
 public:
  GaussRat() = default;
  GaussRat(Rational re) : re_(re) {}  // NOLINT
  GaussRat(std::int64_t re) : re_(re) {}  // NOLINT
  GaussRat(Rational re, Rational im) : re_(re), im_(im) {}

  const Rational& re() const { return re_; }
  const Rational& im() const { return im_; }
  bool is_zero() const { return re_.is_zero() && im_.is_zero(); }
  bool is_one() const { return re_.is_one() && im_.is_zero(); }
  bool is_real() const { return im_.is_zero(); }
  // Sign used to normalise expressions: the first nonzero part decides.
  bool is_negative() const { return re_.sign() < 0 || (re_.is_zero() && im_.sign() < 0); }
  std::complex<double> to_complex() const { return {re_.to_double(), im_.to_double()}; }
  std::string to_string() const;

  GaussRat conj() const { return {re_, -im_}; }
  GaussRat operator-() const { return {-re_, -im_}; }
  friend GaussRat operator+(const GaussRat& a, const GaussRat& b) { return {a.re_ + b.re_, a.im_ + b.im_}; }
  friend GaussRat operator-(const GaussRat& a, const GaussRat& b) { return {a.re_ - b.re_, a.im_ - b.im_}; }
  friend GaussRat operator*(const GaussRat& a, const GaussRat& b);
  friend GaussRat operator/(const GaussRat& a, const GaussRat& b);
  GaussRat& operator+=(const GaussRat& o) { return *this = *this + o; }
  GaussRat& operator*=(const GaussRat& o) { return *this = *this * o; }
  friend bool operator==(const GaussRat& a, const GaussRat& b) = default;
  friend std::strong_ordering operator<=>(const GaussRat& a, const GaussRat& b);

  GaussRat pow(int k) const;

 private:
  Rational re_;
  Rational im_;
};

}  // namespace pforge
