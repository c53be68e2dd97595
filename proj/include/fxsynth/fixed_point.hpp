#pragma once

// Fixed-point numbers <M,L> over two's-complement integer mantissas.
//
// A format <M,L> covers values v with |v| < 2^(M+1), stored as an integer
// mantissa A so that v = A * 2^-L.  M is the index of the most significant
// bit relative to the binary point (may be negative), L the number of
// fractional bits.  Total magnitude width is P = M + L + 1; the sign bit is
// budgeted separately by the callers.
//
// Truncation rules, fixed once so that the evaluator and the generated C
// agree bit for bit:
//   * alignment of intermediates uses arithmetic right shift (floor),
//   * float -> fixed conversion truncates toward zero (C integer cast).

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace fxsynth {

class fx_overflow_error : public std::runtime_error {
 public:
  explicit fx_overflow_error(const std::string& what) : std::runtime_error(what) {}
};

// Unit in the first place: floor(log2(x)) for x > 0.
inline int ufp(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error("ufp: argument must be a positive finite number");
  int e = 0;
  std::frexp(x, &e);  // x = f * 2^e with f in [0.5, 1)
  return e - 1;
}

struct FxFormat {
  int msb = 0;   // M
  int frac = 0;  // L, always >= 0

  constexpr int width() const { return msb + frac + 1; }  // P
  constexpr bool operator==(const FxFormat&) const = default;

  std::string str() const {
    return "<" + std::to_string(msb) + "," + std::to_string(frac) + ">";
  }
};

namespace detail {

// Largest mantissa magnitude of a P-bit format, as an exclusive bound.
// Formats wider than the working integer are never overflow-checked.
inline bool mantissa_fits(std::int64_t m, const FxFormat& f) {
  int p = f.width();
  if (p >= 63) return true;
  if (p < 1) return m == 0;
  const std::int64_t bound = std::int64_t{1} << p;
  return m > -bound && m < bound;
}

inline std::int64_t shift_right_arith(std::int64_t m, int s) {
  if (s >= 63) return m < 0 ? -1 : 0;
  return m >> s;  // arithmetic in C++20
}

inline std::int64_t shift_left_checked(std::int64_t m, int s, const char* who) {
  if (m == 0) return 0;
  if (s >= 63 || std::llabs(m) > (std::numeric_limits<std::int64_t>::max() >> s))
    throw fx_overflow_error(std::string(who) + ": mantissa exceeds working width");
  return m << s;
}

}  // namespace detail

// An immutable fixed-point value.  Zero is canonically (0, <0,0>).
class FxNum {
 public:
  FxNum() = default;

  FxNum(std::int64_t mantissa, FxFormat fmt) : mantissa_(mantissa), fmt_(fmt) {
    if (fmt.frac < 0) throw std::invalid_argument("FxNum: L must be >= 0");
    if (mantissa_ == 0) {
      fmt_ = FxFormat{0, 0};
      return;
    }
    if (!detail::mantissa_fits(mantissa_, fmt_))
      throw fx_overflow_error("FxNum: mantissa " + std::to_string(mantissa_) +
                              " does not fit format " + fmt_.str());
  }

  // Skips the format check; used where a transient value is known to be
  // handled by the caller (out-of-range input warnings).
  static FxNum unchecked(std::int64_t mantissa, FxFormat fmt) {
    FxNum n;
    n.mantissa_ = mantissa;
    n.fmt_ = mantissa == 0 ? FxFormat{0, 0} : fmt;
    return n;
  }

  std::int64_t mantissa() const { return mantissa_; }
  const FxFormat& format() const { return fmt_; }
  bool is_zero() const { return mantissa_ == 0; }

  bool operator==(const FxNum&) const = default;

 private:
  std::int64_t mantissa_ = 0;
  FxFormat fmt_{0, 0};
};

// v * 2^L truncated toward zero, computed exactly from the binary
// representation of v (never through a scaled double).
inline std::int64_t scale_trunc(double v, int frac) {
  if (v == 0.0) return 0;
  int e = 0;
  double f = std::frexp(std::fabs(v), &e);             // |v| = f * 2^e
  auto sig = static_cast<std::int64_t>(std::ldexp(f, 53));  // 53-bit integer
  int shift = frac + e - 53;
  std::int64_t mag;
  if (shift >= 0)
    mag = detail::shift_left_checked(sig, shift, "float_to_fixed");
  else
    mag = detail::shift_right_arith(sig, -shift);  // floor on a magnitude == toward zero
  return v < 0 ? -mag : mag;
}

inline FxNum float_to_fixed(double v, FxFormat fmt) {
  if (v == 0.0) return FxNum{};
  if (!std::isfinite(v)) throw std::domain_error("float_to_fixed: non-finite value");
  if (ufp(std::fabs(v)) > fmt.msb)
    throw fx_overflow_error("float_to_fixed: value " + std::to_string(v) +
                            " does not fit format " + fmt.str());
  return FxNum{scale_trunc(v, fmt.frac), fmt};
}

inline double fixed_to_float(const FxNum& a) {
  return std::ldexp(static_cast<double>(a.mantissa()), -a.format().frac);
}

// Change the fractional length, keeping M.  Right shifts floor, left shifts
// are exact (or overflow the working width).
inline FxNum align(const FxNum& a, int target_frac) {
  if (target_frac < 0) throw std::invalid_argument("align: L must be >= 0");
  int d = a.format().frac - target_frac;
  std::int64_t m = d >= 0 ? detail::shift_right_arith(a.mantissa(), d)
                          : detail::shift_left_checked(a.mantissa(), -d, "align");
  return FxNum::unchecked(m, FxFormat{a.format().msb, target_frac});
}

inline FxNum fx_add(const FxNum& a, const FxNum& b, FxFormat target) {
  std::int64_t am = align(a, target.frac).mantissa();
  std::int64_t bm = align(b, target.frac).mantissa();
  std::int64_t sum;
  if (__builtin_add_overflow(am, bm, &sum))
    throw fx_overflow_error("fx_add: sum exceeds working width");
  if (!detail::mantissa_fits(sum, target))
    throw fx_overflow_error("fx_add: result does not fit " + target.str());
  return FxNum{sum, target};
}

inline FxNum fx_mul(const FxNum& a, const FxNum& b, FxFormat target) {
  __int128 raw = static_cast<__int128>(a.mantissa()) * b.mantissa();
  int d = a.format().frac + b.format().frac - target.frac;
  if (d >= 0) {
    if (d >= 127) raw = raw < 0 ? -1 : 0;
    else raw >>= d;  // floor
  } else {
    raw <<= -d;
  }
  if (raw > std::numeric_limits<std::int64_t>::max() ||
      raw < std::numeric_limits<std::int64_t>::min())
    throw fx_overflow_error("fx_mul: product exceeds working width");
  auto m = static_cast<std::int64_t>(raw);
  if (!detail::mantissa_fits(m, target))
    throw fx_overflow_error("fx_mul: result does not fit " + target.str());
  return FxNum{m, target};
}

// max(0, a); a non-positive result collapses to the canonical zero.
inline FxNum fx_relu(const FxNum& a) {
  return a.mantissa() > 0 ? a : FxNum{};
}

inline FxNum fx_linear(const FxNum& a) { return a; }

}  // namespace fxsynth
