#include "mrs/box.hpp"

#include <stdexcept>

namespace mrs {

Box::Box(std::vector<Interval> sides) : sides_(std::move(sides)) {
  if (sides_.empty()) throw DomainError("box must have dimension >= 1");
}

Box Box::thin(std::span<const double> point) {
  std::vector<Interval> s;
  s.reserve(point.size());
  for (double x : point) s.push_back(Interval::point(x));
  return Box(std::move(s));
}

double Box::volume(RoundingMode m) const {
  double v = 1.0;
  for (const auto& s : sides_) v *= diameter(s, m);
  return v;
}

Interval Box::volume_enclosure() const {
  double lo = 1.0, hi = 1.0;
  for (const auto& s : sides_) {
    double d = s.hi - s.lo;
    lo = mul_down(lo, next_down(d) < 0.0 ? d : next_down(d));
    hi = mul_up(hi, next_up(d));
    if (lo < 0.0) lo = 0.0;
  }
  return Interval(lo, hi);
}

std::size_t Box::max_diam_side() const {
  std::size_t best = 0;
  double best_d = sides_[0].hi - sides_[0].lo;
  for (std::size_t k = 1; k < sides_.size(); ++k) {
    double d = sides_[k].hi - sides_[k].lo;
    if (d > best_d) {
      best = k;
      best_d = d;
    }
  }
  return best;
}

std::vector<double> Box::midpoint() const {
  std::vector<double> m;
  m.reserve(sides_.size());
  for (const auto& s : sides_) m.push_back(s.mid());
  return m;
}

bool Box::contains(std::span<const double> point) const {
  if (point.size() != sides_.size()) return false;
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    if (!sides_[k].contains(point[k])) return false;
  }
  return true;
}

bool Box::splittable() const {
  const Interval& s = sides_[max_diam_side()];
  double m = s.mid();
  return s.lo < m && m < s.hi;
}

std::pair<Box, Box> Box::bisect() const {
  std::size_t k = max_diam_side();
  const Interval& s = sides_[k];
  double m = s.mid();
  if (!(s.lo < m && m < s.hi)) throw DomainError("box side too thin to bisect");
  std::vector<Interval> left = sides_;
  std::vector<Interval> right = sides_;
  left[k] = Interval(s.lo, m);
  right[k] = Interval(m, s.hi);
  return {Box(std::move(left)), Box(std::move(right))};
}

}  // namespace mrs
