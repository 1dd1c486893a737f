#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mrs/box.hpp"
#include "mrs/interval.hpp"

using namespace mrs;

TEST_CASE("interval construction and validation") {
  Interval a(1.0, 2.0);
  CHECK(a.lo == 1.0);
  CHECK(a.hi == 2.0);
  CHECK(a.contains(1.5));
  CHECK(!a.contains(2.5));
  CHECK_THROWS_AS(Interval(2.0, 1.0), DomainError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Interval(nan, 1.0), DomainError);
  CHECK(Interval::point(3.0).lo == 3.0);
}

TEST_CASE("basic arithmetic encloses endpoint combinations") {
  Interval x(1.0, 2.0), y(3.0, 4.0);
  Interval s = x + y;
  CHECK(s.lo <= 4.0);
  CHECK(s.hi >= 6.0);
  Interval d = x - y;
  CHECK(d.lo <= -3.0);
  CHECK(d.hi >= -1.0);
  Interval p = mul(Interval(-2.0, 3.0), Interval(-1.0, 4.0));
  CHECK(p.lo <= -8.0);
  CHECK(p.hi >= 12.0);
  Interval q = div(Interval(1.0, 2.0), Interval(4.0, 8.0));
  CHECK(q.lo <= 0.125);
  CHECK(q.hi >= 0.5);
}

TEST_CASE("division by a zero-containing interval throws") {
  CHECK_THROWS_AS(div(Interval(1.0, 2.0), Interval(-1.0, 1.0)), DivisorContainsZero);
  CHECK_THROWS_AS(div(Interval(1.0, 2.0), Interval(0.0, 1.0)), DivisorContainsZero);
  CHECK_NOTHROW(div(Interval(1.0, 2.0), Interval(1e-300, 1.0)));
}

TEST_CASE("overflow is rejected, not silently saturated") {
  const double big = std::numeric_limits<double>::max();
  CHECK_THROWS_AS(add(Interval(big, big), Interval(big, big)), OverflowError);
  CHECK_THROWS_AS(apply_std(StdFn::exp, Interval(0.0, 1000.0)), OverflowError);
}

TEST_CASE("standard function domains") {
  CHECK_THROWS_AS(apply_std(StdFn::log, Interval(-1.0, 1.0)), DomainError);
  CHECK_THROWS_AS(apply_std(StdFn::log, Interval(0.0, 1.0)), DomainError);
  CHECK_THROWS_AS(apply_std(StdFn::sqrt, Interval(-1.0, 1.0)), DomainError);
  CHECK_THROWS_AS(apply_std(StdFn::tan, Interval(1.0, 2.0)), DomainError);  // pole at pi/2
  CHECK_NOTHROW(apply_std(StdFn::tan, Interval(-1.5, 1.5)));
}

TEST_CASE("sin/cos enclose interior extrema") {
  Interval s = apply_std(StdFn::sin, Interval(0.0, 3.2));
  CHECK(s.hi >= 1.0);
  CHECK(s.lo <= std::sin(3.2));
  Interval c = apply_std(StdFn::cos, Interval(3.0, 3.3));  // contains pi
  CHECK(c.lo <= -1.0);
  Interval wide = apply_std(StdFn::sin, Interval(-100.0, 100.0));
  CHECK(wide.lo <= -1.0);
  CHECK(wide.hi >= 1.0);
  CHECK(wide.lo >= -1.0000000001);
  CHECK(wide.hi <= 1.0000000001);
}

TEST_CASE("even powers use the mignitude rule") {
  Interval x(-2.0, 3.0);
  Interval sq = int_pow(x, 2);
  CHECK(sq.lo <= 0.0);
  CHECK(sq.hi >= 9.0);
  CHECK(sq.hi < 9.001);
  Interval y(2.0, 3.0);
  Interval sq2 = int_pow(y, 2);
  CHECK(sq2.lo <= 4.0);
  CHECK(sq2.lo > 3.999);
  Interval cube = int_pow(Interval(-2.0, 1.0), 3);
  CHECK(cube.lo <= -8.0);
  CHECK(cube.hi >= 1.0);
  Interval inv2 = int_pow(Interval(2.0, 4.0), -2);
  CHECK(inv2.lo <= 0.0625);
  CHECK(inv2.hi >= 0.25);
}

TEST_CASE("set operations") {
  CHECK(hull(Interval(0.0, 1.0), Interval(2.0, 3.0)) == Interval(0.0, 3.0));
  auto isect = intersect(Interval(0.0, 2.0), Interval(1.0, 3.0));
  REQUIRE(isect.has_value());
  CHECK(*isect == Interval(1.0, 2.0));
  CHECK(!intersect(Interval(0.0, 1.0), Interval(2.0, 3.0)).has_value());
  CHECK(mignitude(Interval(-2.0, 3.0)) == 0.0);
  CHECK(mignitude(Interval(2.0, 3.0)) == 2.0);
  CHECK(magnitude(Interval(-4.0, 3.0)) == 4.0);
}

TEST_CASE("diameter is an upper bound on the true width") {
  Interval x(0.1, 0.2);
  CHECK(diameter(x) >= 0.2 - 0.1);
}

TEST_CASE("containment fuzz, small edition") {
  std::mt19937_64 gen(12345);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * ((gen() >> 11) * 0x1.0p-53);
  };
  for (int trial = 0; trial < 20000; ++trial) {
    double a = uniform(-10.0, 10.0), b = uniform(-10.0, 10.0);
    if (a > b) std::swap(a, b);
    double c = uniform(-10.0, 10.0), d = uniform(-10.0, 10.0);
    if (c > d) std::swap(c, d);
    Interval x(a, b), y(c, d);
    const double px = uniform(a, b), py = uniform(c, d);
    CHECK((x + y).contains(px + py));
    CHECK((x - y).contains(px - py));
    CHECK((x * y).contains(px * py));
    if (c > 0.0 || d < 0.0) CHECK((x / y).contains(px / py));
  }
}

TEST_CASE("box operations") {
  Box b({Interval(0.0, 2.0), Interval(0.0, 1.0)});
  CHECK(b.volume() == doctest::Approx(2.0));
  CHECK(b.max_diam_side() == 0);
  auto [l, r] = b.bisect();
  CHECK(l.side(0) == Interval(0.0, 1.0));
  CHECK(r.side(0) == Interval(1.0, 2.0));
  CHECK(l.side(1) == Interval(0.0, 1.0));
  auto mid = b.midpoint();
  CHECK(mid[0] == doctest::Approx(1.0));
  CHECK(mid[1] == doctest::Approx(0.5));
  double pt[2] = {0.5, 0.5};
  CHECK(b.contains(pt));

  // Ties on max diameter go to the lowest index.
  Box tie({Interval(0.0, 1.0), Interval(0.0, 1.0)});
  CHECK(tie.max_diam_side() == 0);

  Interval v = b.volume_enclosure();
  CHECK(v.lo <= 2.0);
  CHECK(v.hi >= 2.0);
}

TEST_CASE("thin boxes and splittability") {
  double pt[1] = {0.25};
  Box t = Box::thin(pt);
  CHECK(t.side(0).lo == 0.25);
  CHECK(t.side(0).hi == 0.25);
  CHECK(!t.splittable());
  CHECK(Box({Interval(0.0, 1.0)}).splittable());
}
