#pragma once

// Exact rational helpers used by the range analyzer and the LP solver.

#include <cmath>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace fxsynth {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Doubles are dyadic, so this is exact.
inline Rational to_rational(double v) {
  if (!std::isfinite(v)) throw std::domain_error("to_rational: non-finite value");
  if (v == 0.0) return Rational{0};
  int e = 0;
  double f = std::frexp(v, &e);
  auto sig = static_cast<long long>(std::ldexp(f, 53));  // signed 53-bit integer
  Rational r{sig};
  int shift = e - 53;
  if (shift >= 0)
    r *= Rational{BigInt{1} << shift};
  else
    r /= Rational{BigInt{1} << -shift};
  return r;
}

inline Rational pow2(int e) {
  if (e >= 0) return Rational{BigInt{1} << e};
  return Rational{1, BigInt{1} << -e};
}

// floor(log2(q)) for q > 0.
inline int ufp(const Rational& q) {
  if (q <= 0) throw std::domain_error("ufp: argument must be positive");
  const BigInt num = boost::multiprecision::numerator(q);
  const BigInt den = boost::multiprecision::denominator(q);
  int e = static_cast<int>(boost::multiprecision::msb(num)) -
          static_cast<int>(boost::multiprecision::msb(den));
  if (q < pow2(e)) --e;
  if (q >= pow2(e + 1)) ++e;
  return e;
}

inline double to_double(const Rational& q) { return static_cast<double>(q); }

// A closed interval of exact rationals.
struct Interval {
  Rational lo, hi;

  Interval() = default;
  Interval(Rational l, Rational h) : lo(std::move(l)), hi(std::move(h)) {}
  static Interval point(const Rational& v) { return {v, v}; }

  Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }

  Interval scaled(const Rational& c) const {
    if (c >= 0) return {lo * c, hi * c};
    return {hi * c, lo * c};
  }

  Interval relu() const {
    return {lo > 0 ? lo : Rational{0}, hi > 0 ? hi : Rational{0}};
  }

  Interval hull(const Interval& o) const {
    return {lo < o.lo ? lo : o.lo, hi > o.hi ? hi : o.hi};
  }

  Rational mag() const {
    Rational a = lo < 0 ? Rational(-lo) : lo;
    Rational b = hi < 0 ? Rational(-hi) : hi;
    return a > b ? a : b;
  }

  bool contains(const Rational& v) const { return lo <= v && v <= hi; }
};

}  // namespace fxsynth
