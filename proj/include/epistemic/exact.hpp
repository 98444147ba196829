#pragma once

// Exact arithmetic used where probabilities must compare equal, not close:
// rationals, the field Q(sqrt2) and complex numbers over it. Amplitudes such
// as 1/sqrt2 and 3/5 live here without rounding.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>
#include <ostream>
#include <sstream>
#include <string>

#include "epistemic/error.hpp"

namespace epistemic {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

// a + b*sqrt(2) with rational a, b.
class QSqrt2 {
 public:
  QSqrt2() = default;
  QSqrt2(Rational a) : a_(std::move(a)) {}  // NOLINT(implicit)
  QSqrt2(int a) : a_(a) {}                  // NOLINT(implicit)
  QSqrt2(Rational a, Rational b) : a_(std::move(a)), b_(std::move(b)) {}

  static QSqrt2 sqrt2() { return {Rational(0), Rational(1)}; }
  static QSqrt2 inv_sqrt2() { return {Rational(0), Rational(1, 2)}; }

  const Rational& rational_part() const { return a_; }
  const Rational& sqrt2_part() const { return b_; }
  bool is_rational() const { return b_ == 0; }
  bool is_zero() const { return a_ == 0 && b_ == 0; }

  double to_double() const {
    return epistemic::to_double(a_) + epistemic::to_double(b_) * std::sqrt(2.0);
  }

  // Sign of a + b*sqrt2, decided exactly.
  int sign() const {
    const int sa = a_.sign();
    const int sb = b_.sign();
    if (sb == 0) return sa;
    if (sa == 0) return sb;
    if (sa == sb) return sa;
    // Opposite signs: compare a^2 with 2 b^2.
    const Rational lhs = a_ * a_;
    const Rational rhs = 2 * b_ * b_;
    if (lhs == rhs) return 0;
    return lhs > rhs ? sa : sb;
  }

  QSqrt2 inverse() const {
    const Rational den = a_ * a_ - 2 * b_ * b_;
    if (den == 0) throw Error("division by zero in exact arithmetic");
    return {a_ / den, -b_ / den};
  }

  friend QSqrt2 operator+(const QSqrt2& x, const QSqrt2& y) { return {x.a_ + y.a_, x.b_ + y.b_}; }
  friend QSqrt2 operator-(const QSqrt2& x, const QSqrt2& y) { return {x.a_ - y.a_, x.b_ - y.b_}; }
  friend QSqrt2 operator-(const QSqrt2& x) { return {-x.a_, -x.b_}; }
  friend QSqrt2 operator*(const QSqrt2& x, const QSqrt2& y) {
    return {x.a_ * y.a_ + 2 * x.b_ * y.b_, x.a_ * y.b_ + x.b_ * y.a_};
  }
  friend QSqrt2 operator/(const QSqrt2& x, const QSqrt2& y) { return x * y.inverse(); }
  QSqrt2& operator+=(const QSqrt2& y) { return *this = *this + y; }
  QSqrt2& operator-=(const QSqrt2& y) { return *this = *this - y; }
  QSqrt2& operator*=(const QSqrt2& y) { return *this = *this * y; }

  friend bool operator==(const QSqrt2& x, const QSqrt2& y) { return x.a_ == y.a_ && x.b_ == y.b_; }
  friend bool operator!=(const QSqrt2& x, const QSqrt2& y) { return !(x == y); }

  std::string str() const {
    if (b_ == 0) return to_string(a_);
    std::ostringstream os;
    if (a_ != 0) os << a_ << (b_ > 0 ? "+" : "");
    os << b_ << "*sqrt2";
    return os.str();
  }

  friend std::ostream& operator<<(std::ostream& os, const QSqrt2& x) { return os << x.str(); }

 private:
  Rational a_{0};
  Rational b_{0};
};

// Complex number with both parts in Q(sqrt2).
class ExactComplex {
 public:
  ExactComplex() = default;
  ExactComplex(QSqrt2 re) : re_(std::move(re)) {}  // NOLINT(implicit)
  ExactComplex(int re) : re_(re) {}                 // NOLINT(implicit)
  ExactComplex(QSqrt2 re, QSqrt2 im) : re_(std::move(re)), im_(std::move(im)) {}

  const QSqrt2& real() const { return re_; }
  const QSqrt2& imag() const { return im_; }

  ExactComplex conj() const { return {re_, -im_}; }
  QSqrt2 norm() const { return re_ * re_ + im_ * im_; }  // |z|^2
  bool is_zero() const { return re_.is_zero() && im_.is_zero(); }

  std::complex<double> to_complex() const { return {re_.to_double(), im_.to_double()}; }

  ExactComplex inverse() const {
    const QSqrt2 n = norm();
    if (n.is_zero()) throw Error("division by zero in exact arithmetic");
    const QSqrt2 inv = n.inverse();
    return {re_ * inv, -(im_ * inv)};
  }

  friend ExactComplex operator+(const ExactComplex& x, const ExactComplex& y) {
    return {x.re_ + y.re_, x.im_ + y.im_};
  }
  friend ExactComplex operator-(const ExactComplex& x, const ExactComplex& y) {
    return {x.re_ - y.re_, x.im_ - y.im_};
  }
  friend ExactComplex operator-(const ExactComplex& x) { return {-x.re_, -x.im_}; }
  friend ExactComplex operator*(const ExactComplex& x, const ExactComplex& y) {
    return {x.re_ * y.re_ - x.im_ * y.im_, x.re_ * y.im_ + x.im_ * y.re_};
  }
  friend ExactComplex operator/(const ExactComplex& x, const ExactComplex& y) { return x * y.inverse(); }
  ExactComplex& operator+=(const ExactComplex& y) { return *this = *this + y; }
  ExactComplex& operator*=(const ExactComplex& y) { return *this = *this * y; }

  friend bool operator==(const ExactComplex& x, const ExactComplex& y) { return x.re_ == y.re_ && x.im_ == y.im_; }
  friend bool operator!=(const ExactComplex& x, const ExactComplex& y) { return !(x == y); }

  std::string str() const {
    if (im_.is_zero()) return re_.str();
    return "(" + re_.str() + ")+i(" + im_.str() + ")";
  }

 private:
  QSqrt2 re_;
  QSqrt2 im_;
};

// Uniform helpers so templated algorithms can run over std::complex<double>
// or ExactComplex.
inline double born_weight(const std::complex<double>& z) { return std::norm(z); }
inline QSqrt2 born_weight(const ExactComplex& z) { return z.norm(); }
inline std::complex<double> conjugate(const std::complex<double>& z) { return std::conj(z); }
inline ExactComplex conjugate(const ExactComplex& z) { return z.conj(); }
inline double as_double(double x) { return x; }
inline double as_double(const QSqrt2& x) { return x.to_double(); }
inline std::complex<double> as_complex(const std::complex<double>& z) { return z; }
inline std::complex<double> as_complex(const ExactComplex& z) { return z.to_complex(); }

}  // namespace epistemic
