#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrs/box.hpp"
#include "mrs/interval.hpp"

namespace mrs {

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

enum class NodeKind { constant, variable, add, sub, mul, div, neg, std_fn, int_pow };

struct ExprNode {
  NodeKind kind;
  double value = 0.0;  // constant
  int a = -1;          // left / only child
  int b = -1;          // right child
  StdFn fn = StdFn::exp;
  int exponent = 0;    // int_pow
};

// An elementary function as a flat, topologically ordered DAG.  Shared
// subexpressions are deduplicated by structural hashing at build time, so the
// same node is evaluated once per sweep.  DAGs are immutable after parse;
// concurrent evaluation is fine with independent scratch buffers.
class ExprDag {
 public:
  // Grammar: numbers, variables x0..x{n-1}, + - * / ^<int>, unary minus,
  // function calls exp/log/sqrt/sin/cos/tan/atan/abs, parentheses.
  // '^' takes an integer literal exponent and binds tighter than unary minus.
  static ExprDag parse(std::string_view text);
  static ExprDag parse(std::string_view text, int arity);

  int arity() const { return arity_; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<ExprNode>& nodes() const { return nodes_; }
  int root() const { return root_; }

  // Single forward pass in topological order.
  double eval_real(std::span<const double> x) const;
  double eval_real(std::span<const double> x, std::vector<double>& scratch) const;

  // Natural interval extension: every node evaluated with its interval
  // counterpart.  Throws DomainError/DivisorContainsZero when the extension
  // is not well-defined on the box.
  Interval eval_interval(const Box& x, RoundingMode m = RoundingMode::outward) const;
  Interval eval_interval(const Box& x, RoundingMode m, std::vector<Interval>& scratch) const;

  // Uniform k-way subdivision along each side; hull of the per-cell
  // enclosures.  Nested inside eval_interval(x) by inclusion isotony.
  Interval mesh_refine_enclosure(const Box& x, int k, RoundingMode m = RoundingMode::outward) const;

 private:
  friend class ExprBuilder;
  std::vector<ExprNode> nodes_;
  int root_ = -1;
  int arity_ = 0;
};

}  // namespace mrs
