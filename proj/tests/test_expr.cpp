#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mrs/demo.hpp"
#include "mrs/expr.hpp"

using namespace mrs;

TEST_CASE("parse and evaluate simple expressions") {
  auto e = ExprDag::parse("x0^2 + 2*x0 + 1");
  CHECK(e.arity() == 1);
  double x[1] = {3.0};
  CHECK(e.eval_real(x) == doctest::Approx(16.0));

  auto f = ExprDag::parse("sin(x0) * exp(x1) - x2 / 4");
  CHECK(f.arity() == 3);
  double y[3] = {1.0, 0.5, 2.0};
  CHECK(f.eval_real(y) == doctest::Approx(std::sin(1.0) * std::exp(0.5) - 0.5));

  auto g = ExprDag::parse("-x0^2");  // exponent binds tighter than unary minus
  double z[1] = {2.0};
  CHECK(g.eval_real(z) == doctest::Approx(-4.0));

  auto h = ExprDag::parse("2");
  CHECK(h.arity() == 0);
  CHECK(h.eval_real({}) == doctest::Approx(2.0));
}

TEST_CASE("explicit arity pads missing variables") {
  auto e = ExprDag::parse("x0 + 1", 3);
  CHECK(e.arity() == 3);
  double x[3] = {2.0, 9.0, 9.0};
  CHECK(e.eval_real(x) == doctest::Approx(3.0));
}

TEST_CASE("parse errors carry a position") {
  CHECK_THROWS_AS(ExprDag::parse("x0 +"), ParseError);
  CHECK_THROWS_AS(ExprDag::parse("foo(x0)"), ParseError);
  CHECK_THROWS_AS(ExprDag::parse("x0 ^ x1"), ParseError);  // exponent must be a literal
  CHECK_THROWS_AS(ExprDag::parse("(x0"), ParseError);
  try {
    ExprDag::parse("x0 + @");
    CHECK(false);
  } catch (const ParseError& err) {
    CHECK(err.position == 5);
  }
}

TEST_CASE("common subexpressions are shared") {
  auto shared = ExprDag::parse("sin(x0) + sin(x0)");
  auto distinct = ExprDag::parse("sin(x0) + cos(x0)");
  CHECK(shared.node_count() < distinct.node_count());
  double x[1] = {0.7};
  CHECK(shared.eval_real(x) == doctest::Approx(2.0 * std::sin(0.7)));
}

TEST_CASE("natural extension contains sampled values") {
  std::mt19937_64 gen(99);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * ((gen() >> 11) * 0x1.0p-53);
  };
  auto e = ExprDag::parse("x0*sin(3*x0) + exp(x1/4) - x1^2/10");
  for (int trial = 0; trial < 2000; ++trial) {
    double a = uniform(-5.0, 5.0), b = uniform(-5.0, 5.0);
    if (a > b) std::swap(a, b);
    double c = uniform(-5.0, 5.0), d = uniform(-5.0, 5.0);
    if (c > d) std::swap(c, d);
    Box box({Interval(a, b), Interval(c, d)});
    Interval enc = e.eval_interval(box);
    for (int k = 0; k < 10; ++k) {
      double pt[2] = {uniform(a, b), uniform(c, d)};
      CHECK(enc.contains(e.eval_real(pt)));
    }
  }
}

TEST_CASE("domain errors propagate from the extension") {
  auto e = ExprDag::parse("log(x0)");
  CHECK_THROWS_AS(e.eval_interval(Box({Interval(-1.0, 1.0)})), DomainError);
  auto f = ExprDag::parse("1/x0");
  CHECK_THROWS_AS(f.eval_interval(Box({Interval(-1.0, 1.0)})), DivisorContainsZero);
}

TEST_CASE("mesh refinement tightens and stays nested") {
  auto e = demo_raw_expr();
  Box dom = demo_domain();
  Interval prev = e.eval_interval(dom);
  for (int k : {2, 4, 8, 16, 32, 64}) {
    Interval cur = e.mesh_refine_enclosure(dom, k);
    CHECK(prev.contains(cur));
    prev = cur;
  }
  // Dense samples remain inside the finest enclosure.
  for (int i = 0; i <= 10000; ++i) {
    double pt[1] = {-10.0 + 16.0 * i / 10000.0};
    CHECK(prev.contains(e.eval_real(pt)));
  }
}

TEST_CASE("demo expressions agree with the hand-written sum") {
  auto raw = demo_raw_expr();
  auto shifted = demo_shifted_expr();
  for (double x : {-9.5, -3.0, 0.0, 1.7, 5.9}) {
    double expect = 0.0;
    for (int k = 1; k <= 5; ++k) expect -= k * x * std::sin(k * (x - 3.0) / 3.0);
    double pt[1] = {x};
    CHECK(raw.eval_real(pt) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(shifted.eval_real(pt) == doctest::Approx(expect + demo_shift()).epsilon(1e-12));
  }
}
