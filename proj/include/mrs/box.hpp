#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mrs/interval.hpp"

namespace mrs {

// n-dimensional product of intervals.  Dimension is fixed at construction.
class Box {
 public:
  Box() = default;  // dimensionless placeholder
  explicit Box(std::vector<Interval> sides);
  static Box thin(std::span<const double> point);

  std::size_t dim() const { return sides_.size(); }
  const Interval& side(std::size_t k) const { return sides_[k]; }
  const std::vector<Interval>& sides() const { return sides_; }

  // Product of side diameters.
  double volume(RoundingMode m = RoundingMode::fast) const;
  // [volume rounded down, volume rounded up]; used for rigorous mass sums.
  Interval volume_enclosure() const;

  // Index of the side with maximal diameter; ties go to the lowest index.
  std::size_t max_diam_side() const;
  std::vector<double> midpoint() const;
  bool contains(std::span<const double> point) const;

  // A box is splittable when the widest side has a representable interior
  // midpoint.
  bool splittable() const;
  // Split the max-diameter side at its midpoint.  The two halves share the
  // midpoint as a closed boundary and their union is exactly this box.
  std::pair<Box, Box> bisect() const;

 private:
  std::vector<Interval> sides_;
};

}  // namespace mrs
