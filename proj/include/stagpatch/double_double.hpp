#pragma once

// Double-double scalar: an unevaluated sum hi + lo of two doubles, giving
// roughly 106 bits of significand. Used as the extended-precision reference
// arithmetic for roundoff studies; works with Eigen's dense eigensolvers.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Core>

namespace stagpatch {

struct dd_real {
  double hi = 0.0;
  double lo = 0.0;

  constexpr dd_real() = default;
  constexpr dd_real(double h) : hi(h), lo(0.0) {}
  constexpr dd_real(int h) : hi(h), lo(0.0) {}
  constexpr dd_real(long h) : hi(static_cast<double>(h)), lo(0.0) {}
  constexpr dd_real(long long h) : hi(static_cast<double>(h)), lo(0.0) {}
  constexpr dd_real(unsigned h) : hi(h), lo(0.0) {}
  constexpr dd_real(unsigned long h) : hi(static_cast<double>(h)), lo(0.0) {}
  constexpr dd_real(double h, double l) : hi(h), lo(l) {}

  explicit operator double() const { return hi + lo; }
  explicit operator float() const { return static_cast<float>(hi + lo); }
  explicit operator int() const { return static_cast<int>(hi) + static_cast<int>(lo); }
  explicit operator long() const { return static_cast<long>(hi) + static_cast<long>(lo); }

  dd_real& operator+=(const dd_real& b);
  dd_real& operator-=(const dd_real& b);
  dd_real& operator*=(const dd_real& b);
  dd_real& operator/=(const dd_real& b);
};

namespace dd_detail {

inline dd_real two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline dd_real quick_two_sum(double a, double b) {
  double s = a + b;
  return {s, b - (s - a)};
}

inline dd_real two_prod(double a, double b) {
  double p = a * b;
#if defined(__FMA__) || defined(__FP_FAST_FMA)
  return {p, std::fma(a, b, -p)};
#else
  constexpr double split = 134217729.0;  // 2^27 + 1
  double t = split * a;
  double ahi = t - (t - a);
  double alo = a - ahi;
  t = split * b;
  double bhi = t - (t - b);
  double blo = b - bhi;
  return {p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo};
#endif
}

}  // namespace dd_detail

inline dd_real operator+(const dd_real& a, const dd_real& b) {
  dd_real s = dd_detail::two_sum(a.hi, b.hi);
  dd_real t = dd_detail::two_sum(a.lo, b.lo);
  s.lo += t.hi;
  s = dd_detail::quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return dd_detail::quick_two_sum(s.hi, s.lo);
}

inline dd_real operator-(const dd_real& a) { return {-a.hi, -a.lo}; }
inline dd_real operator+(const dd_real& a) { return a; }
inline dd_real operator-(const dd_real& a, const dd_real& b) { return a + (-b); }

inline dd_real operator*(const dd_real& a, const dd_real& b) {
  dd_real p = dd_detail::two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return dd_detail::quick_two_sum(p.hi, p.lo);
}

inline dd_real operator/(const dd_real& a, const dd_real& b) {
  double q1 = a.hi / b.hi;
  dd_real r = a - dd_real(q1) * b;
  double q2 = r.hi / b.hi;
  r = r - dd_real(q2) * b;
  double q3 = r.hi / b.hi;
  dd_real q = dd_detail::quick_two_sum(q1, q2);
  return q + dd_real(q3);
}

inline dd_real& dd_real::operator+=(const dd_real& b) { return *this = *this + b; }
inline dd_real& dd_real::operator-=(const dd_real& b) { return *this = *this - b; }
inline dd_real& dd_real::operator*=(const dd_real& b) { return *this = *this * b; }
inline dd_real& dd_real::operator/=(const dd_real& b) { return *this = *this / b; }

inline bool operator==(const dd_real& a, const dd_real& b) { return a.hi == b.hi && a.lo == b.lo; }
inline bool operator!=(const dd_real& a, const dd_real& b) { return !(a == b); }
inline bool operator<(const dd_real& a, const dd_real& b) {
  return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
}
inline bool operator>(const dd_real& a, const dd_real& b) { return b < a; }
inline bool operator<=(const dd_real& a, const dd_real& b) { return !(b < a); }
inline bool operator>=(const dd_real& a, const dd_real& b) { return !(a < b); }

inline dd_real abs(const dd_real& a) { return a.hi < 0.0 ? -a : a; }
inline dd_real fabs(const dd_real& a) { return abs(a); }
inline bool isfinite(const dd_real& a) { return std::isfinite(a.hi); }
inline bool isnan(const dd_real& a) { return std::isnan(a.hi); }
inline bool isinf(const dd_real& a) { return std::isinf(a.hi); }
inline dd_real max(const dd_real& a, const dd_real& b) { return a < b ? b : a; }
inline dd_real min(const dd_real& a, const dd_real& b) { return b < a ? b : a; }

inline dd_real sqrt(const dd_real& a) {
  if (a.hi <= 0.0) return dd_real(a.hi == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN());
  double q = std::sqrt(a.hi);
  dd_real qq(q);
  return qq + (a - qq * qq) / dd_real(2.0 * q);
}

inline dd_real square(const dd_real& a) { return a * a; }

inline dd_real floor(const dd_real& a) {
  double h = std::floor(a.hi);
  if (h != a.hi) return dd_real(h);
  return dd_detail::quick_two_sum(h, std::floor(a.lo));
}

inline dd_real round(const dd_real& a) { return floor(a + dd_real(0.5)); }

inline constexpr dd_real dd_pi{3.141592653589793116, 1.2246467991473532e-16};
inline constexpr dd_real dd_half_pi{1.570796326794896558, 6.123233995736766036e-17};

namespace dd_detail {

// Taylor series for |x| <= pi/4; terms continue until they drop below the
// double-double unit roundoff.
inline void sin_cos_reduced(const dd_real& x, dd_real& s, dd_real& c) {
  const dd_real x2 = x * x;
  dd_real term = x;
  s = x;
  for (int k = 1; k < 30; ++k) {
    term = -(term * x2) / dd_real(static_cast<double>((2 * k) * (2 * k + 1)));
    s += term;
    if (std::fabs(term.hi) < 1e-34) break;
  }
  term = dd_real(1.0);
  c = dd_real(1.0);
  for (int k = 1; k < 30; ++k) {
    term = -(term * x2) / dd_real(static_cast<double>((2 * k - 1) * (2 * k)));
    c += term;
    if (std::fabs(term.hi) < 1e-34) break;
  }
}

}  // namespace dd_detail

inline void sin_cos(const dd_real& x, dd_real& s, dd_real& c) {
  dd_real q = round(x / dd_half_pi);
  dd_real r = x - q * dd_half_pi;
  long k = static_cast<long>(q.hi) + static_cast<long>(q.lo);
  dd_real sr, cr;
  dd_detail::sin_cos_reduced(r, sr, cr);
  switch (((k % 4) + 4) % 4) {
    case 0: s = sr; c = cr; break;
    case 1: s = cr; c = -sr; break;
    case 2: s = -sr; c = -cr; break;
    default: s = -cr; c = sr; break;
  }
}

inline dd_real sin(const dd_real& x) {
  dd_real s, c;
  sin_cos(x, s, c);
  return s;
}

inline dd_real cos(const dd_real& x) {
  dd_real s, c;
  sin_cos(x, s, c);
  return c;
}

inline std::ostream& operator<<(std::ostream& os, const dd_real& a) {
  return os << (a.hi + a.lo);
}

// Scalar helpers shared by double and dd_real code paths.
template <class Real>
inline Real pi_v() {
  if constexpr (std::is_same_v<Real, dd_real>) {
    return dd_pi;
  } else {
    return static_cast<Real>(3.141592653589793238462643383279502884L);
  }
}

inline double to_double(double x) { return x; }
inline double to_double(const dd_real& x) { return x.hi + x.lo; }
inline std::complex<double> to_double(const std::complex<double>& z) { return z; }
inline std::complex<double> to_double(const std::complex<dd_real>& z) {
  return {to_double(z.real()), to_double(z.imag())};
}

}  // namespace stagpatch

namespace std {

template <>
class numeric_limits<stagpatch::dd_real> {
 public:
  static constexpr bool is_specialized = true;
  static constexpr bool is_signed = true;
  static constexpr bool is_integer = false;
  static constexpr bool is_exact = false;
  static constexpr bool has_infinity = true;
  static constexpr bool has_quiet_NaN = true;
  static constexpr int digits = 106;
  static constexpr int digits10 = 31;
  static constexpr int max_digits10 = 33;
  static constexpr int radix = 2;
  static constexpr int min_exponent = numeric_limits<double>::min_exponent + 53;
  static constexpr int max_exponent = numeric_limits<double>::max_exponent;
  static constexpr stagpatch::dd_real epsilon() { return stagpatch::dd_real(4.93038065763132e-32); }
  static constexpr stagpatch::dd_real min() { return stagpatch::dd_real(2.0041683600089728e-292); }
  static constexpr stagpatch::dd_real max() { return stagpatch::dd_real(numeric_limits<double>::max()); }
  static constexpr stagpatch::dd_real lowest() { return stagpatch::dd_real(-numeric_limits<double>::max()); }
  static constexpr stagpatch::dd_real infinity() { return stagpatch::dd_real(numeric_limits<double>::infinity()); }
  static constexpr stagpatch::dd_real quiet_NaN() { return stagpatch::dd_real(numeric_limits<double>::quiet_NaN()); }
  static constexpr stagpatch::dd_real round_error() { return stagpatch::dd_real(0.5); }
};

}  // namespace std

namespace Eigen {

template <>
struct NumTraits<stagpatch::dd_real> : GenericNumTraits<stagpatch::dd_real> {
  using Real = stagpatch::dd_real;
  using NonInteger = stagpatch::dd_real;
  using Nested = stagpatch::dd_real;
  using Literal = stagpatch::dd_real;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 20,
    MulCost = 10
  };
  static inline Real epsilon() { return std::numeric_limits<Real>::epsilon(); }
  static inline Real dummy_precision() { return Real(1e-28); }
  static inline Real highest() { return std::numeric_limits<Real>::max(); }
  static inline Real lowest() { return std::numeric_limits<Real>::lowest(); }
  static inline int digits10() { return 31; }
  static inline int digits() { return 106; }
  static inline Real infinity() { return std::numeric_limits<Real>::infinity(); }
  static inline Real quiet_NaN() { return std::numeric_limits<Real>::quiet_NaN(); }
};

}  // namespace Eigen
