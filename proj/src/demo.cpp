#include "mrs/demo.hpp"

namespace mrs {

namespace {

const char* kRawExpr =
    "-(x0*sin((x0-3)/3)"
    " + 2*x0*sin(2*(x0-3)/3)"
    " + 3*x0*sin(3*(x0-3)/3)"
    " + 4*x0*sin(4*(x0-3)/3)"
    " + 5*x0*sin(5*(x0-3)/3))";

}  // namespace

ExprDag demo_raw_expr() { return ExprDag::parse(kRawExpr); }

ExprDag demo_shifted_expr() {
  // |raw| <= (1+2+3+4+5)*|x| <= 150 on [-10,6], so the shift keeps the shape
  // nonnegative over the whole domain.
  return ExprDag::parse(std::string("150 + ") + kRawExpr);
}

Box demo_domain() { return Box({Interval(-10.0, 6.0)}); }

double demo_shift() { return 150.0; }

std::shared_ptr<const TargetShape> make_demo_target(const std::string& name) {
  if (name != "fig2") throw DomainError("unknown demo target: " + name);
  auto t = std::make_shared<TargetShape>();
  t->pieces.push_back(
      TargetPiece{"fig2", demo_domain(), std::make_shared<ExprShape>(demo_shifted_expr()), 1.0});
  return t;
}

}  // namespace mrs
