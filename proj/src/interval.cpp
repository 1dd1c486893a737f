#include "mrs/interval.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace mrs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// pi is irrational, so the nearest double (M_PI) undershoots it; the next
// double up overshoots.  [kPiLo, kPiHi] encloses the true value.
const double kPiLo = 3.14159265358979311600e+00;
const double kPiHi = std::nextafter(kPiLo, kInf);

void check_valid(const Interval& x) {
  if (std::isnan(x.lo) || std::isnan(x.hi) || x.lo > x.hi) {
    throw DomainError("invalid interval operand");
  }
}

void check_finite_result(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw OverflowError();
}

Interval widen(double lo, double hi, int ulps, RoundingMode m) {
  if (m == RoundingMode::outward) {
    for (int i = 0; i < ulps; ++i) {
      lo = next_down(lo);
      hi = next_up(hi);
    }
  }
  return Interval(lo, hi);
}

// True iff the (already outward-rounded) interval contains an integer.
bool contains_integer(const Interval& k) {
  return std::ceil(k.lo) <= std::floor(k.hi);
}

Interval clamp_to(const Interval& x, double lo, double hi) {
  return Interval(std::clamp(x.lo, lo, hi), std::clamp(x.hi, lo, hi));
}

}  // namespace

double next_up(double x) {
  return std::nextafter(x, kInf);
}

double next_down(double x) {
  return std::nextafter(x, -kInf);
}

double add_up(double a, double b) { return next_up(a + b); }
double add_down(double a, double b) { return next_down(a + b); }
double sub_up(double a, double b) { return next_up(a - b); }
double sub_down(double a, double b) { return next_down(a - b); }
double mul_up(double a, double b) { return next_up(a * b); }
double mul_down(double a, double b) { return next_down(a * b); }
double div_up(double a, double b) { return next_up(a / b); }
double div_down(double a, double b) { return next_down(a / b); }

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw DomainError("interval bounds out of order or NaN");
  }
}

double Interval::mid() const {
  double m = lo + (hi - lo) / 2.0;
  if (!std::isfinite(m)) m = lo / 2.0 + hi / 2.0;
  return std::clamp(m, lo, hi);
}

bool operator==(const Interval& a, const Interval& b) {
  return a.lo == b.lo && a.hi == b.hi;
}

Interval add(const Interval& x, const Interval& y, RoundingMode m) {
  check_valid(x);
  check_valid(y);
  double lo = x.lo + y.lo;
  double hi = x.hi + y.hi;
  check_finite_result(lo, hi);
  return widen(lo, hi, 1, m);
}

Interval sub(const Interval& x, const Interval& y, RoundingMode m) {
  check_valid(x);
  check_valid(y);
  double lo = x.lo - y.hi;
  double hi = x.hi - y.lo;
  check_finite_result(lo, hi);
  return widen(lo, hi, 1, m);
}

Interval mul(const Interval& x, const Interval& y, RoundingMode m) {
  check_valid(x);
  check_valid(y);
  const std::array<double, 4> p = {x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi};
  double lo = *std::min_element(p.begin(), p.end());
  double hi = *std::max_element(p.begin(), p.end());
  check_finite_result(lo, hi);
  return widen(lo, hi, 1, m);
}

Interval div(const Interval& x, const Interval& y, RoundingMode m) {
  check_valid(x);
  check_valid(y);
  if (y.lo <= 0.0 && 0.0 <= y.hi) throw DivisorContainsZero();
  const std::array<double, 4> q = {x.lo / y.lo, x.lo / y.hi, x.hi / y.lo, x.hi / y.hi};
  double lo = *std::min_element(q.begin(), q.end());
  double hi = *std::max_element(q.begin(), q.end());
  check_finite_result(lo, hi);
  return widen(lo, hi, 1, m);
}

Interval neg(const Interval& x) {
  check_valid(x);
  return Interval(-x.hi, -x.lo);
}

const char* std_fn_name(StdFn f) {
  switch (f) {
    case StdFn::exp: return "exp";
    case StdFn::log: return "log";
    case StdFn::sqrt: return "sqrt";
    case StdFn::sin: return "sin";
    case StdFn::cos: return "cos";
    case StdFn::tan: return "tan";
    case StdFn::atan: return "atan";
    case StdFn::abs: return "abs";
  }
  return "?";
}

std::optional<StdFn> std_fn_from_name(const std::string& name) {
  if (name == "exp") return StdFn::exp;
  if (name == "log") return StdFn::log;
  if (name == "sqrt") return StdFn::sqrt;
  if (name == "sin") return StdFn::sin;
  if (name == "cos") return StdFn::cos;
  if (name == "tan") return StdFn::tan;
  if (name == "atan") return StdFn::atan;
  if (name == "abs") return StdFn::abs;
  return std::nullopt;
}

namespace {

Interval pi_interval() { return Interval(kPiLo, kPiHi); }

Interval half_pi_interval() { return Interval(kPiLo / 2.0, next_up(kPiHi / 2.0)); }

Interval two_pi_interval() { return Interval(next_down(2.0 * kPiLo), next_up(2.0 * kPiHi)); }

// sin attains +1 exactly at pi/2 + 2k*pi and -1 at -pi/2 + 2k*pi.  We test
// whether any such point can lie in X via an outward-rounded solve for k; a
// spuriously detected extremum only loosens the result, never breaks
// containment.
Interval sin_interval(const Interval& x, RoundingMode m) {
  const Interval two_pi = two_pi_interval();
  const Interval half_pi = half_pi_interval();
  const bool has_max = contains_integer(div(sub(x, half_pi), two_pi));
  const bool has_min = contains_integer(div(add(x, half_pi), two_pi));
  Interval at_lo = widen(std::sin(x.lo), std::sin(x.lo), 2, m);
  Interval at_hi = widen(std::sin(x.hi), std::sin(x.hi), 2, m);
  double lo = has_min ? -1.0 : std::min(at_lo.lo, at_hi.lo);
  double hi = has_max ? 1.0 : std::max(at_lo.hi, at_hi.hi);
  return clamp_to(Interval(lo, hi), -1.0, 1.0);
}

Interval tan_interval(const Interval& x, RoundingMode m) {
  // Poles at pi/2 + k*pi.
  if (contains_integer(div(sub(x, half_pi_interval()), pi_interval()))) {
    throw DomainError("tan: interval contains a pole");
  }
  // No pole inside, so tan is increasing across the interval.
  return widen(std::tan(x.lo), std::tan(x.hi), 2, m);
}

}  // namespace

Interval apply_std(StdFn f, const Interval& x, RoundingMode m) {
  check_valid(x);
  if (!x.is_finite()) throw OverflowError();
  switch (f) {
    case StdFn::exp: {
      double lo = std::exp(x.lo);
      double hi = std::exp(x.hi);
      if (!std::isfinite(hi)) throw OverflowError();
      Interval r = widen(lo, hi, 2, m);
      r.lo = std::max(r.lo, 0.0);
      return r;
    }
    case StdFn::log: {
      if (x.lo <= 0.0) throw DomainError("log: interval not strictly positive");
      return widen(std::log(x.lo), std::log(x.hi), 2, m);
    }
    case StdFn::sqrt: {
      if (x.lo < 0.0) throw DomainError("sqrt: interval contains negatives");
      Interval r = widen(std::sqrt(x.lo), std::sqrt(x.hi), 1, m);
      r.lo = std::max(r.lo, 0.0);
      return r;
    }
    case StdFn::sin:
      return sin_interval(x, m);
    case StdFn::cos:
      // cos(x) = sin(x + pi/2), shifted with an outward-rounded pi/2.
      return sin_interval(add(x, half_pi_interval()), m);
    case StdFn::tan:
      return tan_interval(x, m);
    case StdFn::atan:
      return widen(std::atan(x.lo), std::atan(x.hi), 2, m);
    case StdFn::abs:
      return Interval(mignitude(x), magnitude(x));
  }
  throw DomainError("unknown standard function");
}

Interval int_pow(const Interval& x, int n, RoundingMode m) {
  check_valid(x);
  if (n == 0) return Interval(1.0, 1.0);
  if (n < 0) {
    if (x.lo <= 0.0 && 0.0 <= x.hi) throw DomainError("x^n with n<0: interval contains zero");
    Interval recip = div(Interval(1.0, 1.0), x, m);
    return int_pow(recip, -n, m);
  }
  double lo, hi;
  if (n % 2 == 1) {
    lo = std::pow(x.lo, n);
    hi = std::pow(x.hi, n);
  } else {
    lo = std::pow(mignitude(x), n);
    hi = std::pow(magnitude(x), n);
  }
  check_finite_result(lo, hi);
  Interval r = widen(lo, hi, 2, m);
  if (n % 2 == 0) r.lo = std::max(r.lo, 0.0);
  return r;
}

double diameter(const Interval& x, RoundingMode m) {
  check_valid(x);
  double d = x.hi - x.lo;
  if (m == RoundingMode::outward && d != 0.0) d = next_up(d);
  return d;
}

Interval hull(const Interval& x, const Interval& y) {
  check_valid(x);
  check_valid(y);
  return Interval(std::min(x.lo, y.lo), std::max(x.hi, y.hi));
}

std::optional<Interval> intersect(const Interval& x, const Interval& y) {
  check_valid(x);
  check_valid(y);
  double lo = std::max(x.lo, y.lo);
  double hi = std::min(x.hi, y.hi);
  if (lo > hi) return std::nullopt;
  return Interval(lo, hi);
}

double mignitude(const Interval& x) {
  if (x.lo <= 0.0 && 0.0 <= x.hi) return 0.0;
  return std::min(std::fabs(x.lo), std::fabs(x.hi));
}

double magnitude(const Interval& x) {
  return std::max(std::fabs(x.lo), std::fabs(x.hi));
}

}  // namespace mrs
