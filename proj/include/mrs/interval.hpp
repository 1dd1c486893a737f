#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace mrs {

// Errors raised by interval operations.  Every domain problem (log of a
// nonpositive interval, division by a zero-containing interval, overflow to a
// non-finite bound) derives from DomainError so callers that split boxes on
// failure can catch one type.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivisorContainsZero : DomainError {
  DivisorContainsZero() : DomainError("interval division: divisor contains zero") {}
};

struct OverflowError : DomainError {
  OverflowError() : DomainError("interval operation overflowed to a non-finite bound") {}
};

// Outward: every result is widened so the true real result set is contained,
// regardless of how libm rounded.  Fast: nearest rounding, no containment
// guarantee.  Fast must be requested explicitly.
enum class RoundingMode { outward, fast };

struct RigorPolicy {
  RoundingMode mode = RoundingMode::outward;
};

// Directed-rounding helpers.  We widen by units in the last place instead of
// flipping the FPU rounding mode, so no process-global state is touched and
// the library stays safe under concurrent callers.
double next_up(double x);
double next_down(double x);
double add_up(double a, double b);
double add_down(double a, double b);
double sub_up(double a, double b);
double sub_down(double a, double b);
double mul_up(double a, double b);
double mul_down(double a, double b);
double div_up(double a, double b);
double div_down(double a, double b);

// Closed real interval [lo, hi] with machine-representable bounds.
// Invariant: lo <= hi, neither bound is NaN.  Infinite bounds appear only as
// explicit overflow saturation (see phylo shape enclosures); ordinary
// arithmetic rejects them.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double lo_, double hi_);
  static Interval point(double x) { return Interval(x, x); }

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
  bool is_finite() const { return std::isfinite(lo) && std::isfinite(hi); }
  double mid() const;
};

bool operator==(const Interval& a, const Interval& b);

Interval add(const Interval& x, const Interval& y, RoundingMode m = RoundingMode::outward);
Interval sub(const Interval& x, const Interval& y, RoundingMode m = RoundingMode::outward);
Interval mul(const Interval& x, const Interval& y, RoundingMode m = RoundingMode::outward);
Interval div(const Interval& x, const Interval& y, RoundingMode m = RoundingMode::outward);
Interval neg(const Interval& x);

inline Interval operator+(const Interval& x, const Interval& y) { return add(x, y); }
inline Interval operator-(const Interval& x, const Interval& y) { return sub(x, y); }
inline Interval operator*(const Interval& x, const Interval& y) { return mul(x, y); }
inline Interval operator/(const Interval& x, const Interval& y) { return div(x, y); }
inline Interval operator-(const Interval& x) { return neg(x); }

enum class StdFn { exp, log, sqrt, sin, cos, tan, atan, abs };

const char* std_fn_name(StdFn f);
std::optional<StdFn> std_fn_from_name(const std::string& name);

// Interval extension of a standard function.  Monotone functions use endpoint
// images; sin/cos locate interior extrema through an interval enclosure of pi
// so wide arguments stay rigorous.
Interval apply_std(StdFn f, const Interval& x, RoundingMode m = RoundingMode::outward);

// x^n with the tight even-power rule [mig(X)^n, mag(X)^n].
Interval int_pow(const Interval& x, int n, RoundingMode m = RoundingMode::outward);

// hi - lo, rounded up under outward so the reported diameter never
// understates the true one.
double diameter(const Interval& x, RoundingMode m = RoundingMode::outward);

// Smallest interval containing both arguments.
Interval hull(const Interval& x, const Interval& y);

// Empty intersections are reported as absent; empty intervals are not
// representable.
std::optional<Interval> intersect(const Interval& x, const Interval& y);

double mignitude(const Interval& x);
double magnitude(const Interval& x);

}  // namespace mrs
