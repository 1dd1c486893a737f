#pragma once

#include <memory>
#include <string>

#include "mrs/engine.hpp"

namespace mrs {

// Built-in 1-D demo target: a five-term sine mixture on [-10, 6] with strong
// multimodality.  The raw form takes both signs; the shifted form adds a
// constant so it is a valid (nonnegative) target shape.
ExprDag demo_raw_expr();
ExprDag demo_shifted_expr();
Box demo_domain();
double demo_shift();

// Shifted demo target wrapped as a single-piece TargetShape.
std::shared_ptr<const TargetShape> make_demo_target(const std::string& name);

}  // namespace mrs
