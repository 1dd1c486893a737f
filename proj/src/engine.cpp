#include "mrs/engine.hpp"

#include <algorithm>
#include <cmath>

namespace mrs {

namespace {

constexpr int kMaxSplitRetries = 40;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Max-heap order: highest priority first, ties to the earliest creation.
bool heap_less(const PartitionPiece& a, const PartitionPiece& b) {
  if (a.priority != b.priority) return a.priority < b.priority;
  return a.creation_index > b.creation_index;
}

}  // namespace

AliasTable AliasTable::build(std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw DegenerateProposal();
  double total = 0.0;
  for (double w : weights) {
    if (std::isnan(w) || w < 0.0) throw DomainError("alias weights must be nonnegative");
    if (std::isinf(w)) throw DegenerateProposal();
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateProposal();

  AliasTable t;
  t.cutoff_.assign(n, 1.0);
  t.alias_.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.alias_[i] = i;

  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] * n / total;
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) (scaled[i] < 1.0 ? small : large).push_back(i);

  while (!small.empty() && !large.empty()) {
    std::size_t s = small.back();
    small.pop_back();
    std::size_t l = large.back();
    t.cutoff_[s] = scaled[s];
    t.alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers keep cutoff 1 and alias to themselves.
  return t;
}

std::size_t AliasTable::draw(Rng& rng) const {
  const std::size_t n = cutoff_.size();
  std::size_t i = std::min(n - 1, static_cast<std::size_t>(rng.uniform01() * n));
  return rng.uniform01() < cutoff_[i] ? i : alias_[i];
}

PartitionPiece Partition::make_piece(int target_index, const Box& box, const Interval& enc) {
  const TargetPiece& tp = target_->pieces[static_cast<std::size_t>(target_index)];
  PartitionPiece p;
  p.target_index = target_index;
  p.box = box;
  p.enclosure = enc;
  p.creation_index = next_creation_++;
  const double v = box.volume();
  const double hi_pos = std::max(0.0, enc.hi);
  if (std::isinf(hi_pos)) {
    // Saturated upper bound: must be refined away before sampling.
    p.env_height = kInf;
    p.upper_mass = v > 0.0 ? kInf : 0.0;
    p.priority = v > 0.0 ? kInf : 0.0;
  } else {
    p.env_height = mul_up(tp.weight, hi_pos);
    p.upper_mass = v * p.env_height;
    p.priority = v * (enc.hi - enc.lo);
  }
  p.lower_mass = mul_down(v, mul_down(tp.weight, std::max(0.0, enc.lo)));
  if (p.lower_mass < 0.0) p.lower_mass = 0.0;
  p.lower_mass = std::min(p.lower_mass, p.upper_mass);
  return p;
}

void Partition::eval_box(int target_index, const Box& box, const Interval* parent, int depth,
                         std::vector<PartitionPiece>& out) {
  const TargetPiece& tp = target_->pieces[static_cast<std::size_t>(target_index)];
  Interval enc;
  try {
    enc = tp.shape->eval_interval(box, mode_);
  } catch (const DomainError&) {
    // The extension is not well-defined here; try smaller boxes.
    if (depth >= kMaxSplitRetries || !box.splittable()) throw EnclosureFailure(box);
    auto [a, b] = box.bisect();
    eval_box(target_index, a, parent, depth + 1, out);
    eval_box(target_index, b, parent, depth + 1, out);
    return;
  }
  if (parent != nullptr) {
    // The true range over a sub-box is inside the parent enclosure, so
    // clipping keeps rigor and makes refinement nesting exact.
    enc.lo = std::max(enc.lo, parent->lo);
    enc.hi = std::min(enc.hi, parent->hi);
    if (enc.lo > enc.hi) enc = *parent;
  }
  out.push_back(make_piece(target_index, box, enc));
}

void Partition::push_piece(PartitionPiece p) {
  if (std::isinf(p.upper_mass)) ++unresolved_;
  sums_dirty_ = true;
  pieces_.push_back(std::move(p));
  std::push_heap(pieces_.begin(), pieces_.end(), heap_less);
}

PartitionPiece Partition::pop_top() {
  std::pop_heap(pieces_.begin(), pieces_.end(), heap_less);
  PartitionPiece p = std::move(pieces_.back());
  pieces_.pop_back();
  if (std::isinf(p.upper_mass)) --unresolved_;
  sums_dirty_ = true;
  return p;
}

void Partition::recompute_sums() const {
  if (!sums_dirty_) return;
  double up = 0.0;
  double down = 0.0;
  for (const auto& p : pieces_) {
    up = std::isinf(up) || std::isinf(p.upper_mass) ? kInf : add_up(up, p.upper_mass);
    down = add_down(down, p.lower_mass);
  }
  if (down < 0.0) down = 0.0;
  // Cap by the previous report: each refinement only tightens the envelope,
  // so the old bounds remain valid and the reported totals stay monotone.
  sum_upper_ = std::min(sum_upper_, up);
  sum_lower_ = std::max(sum_lower_, down);
  if (sum_lower_ > sum_upper_) sum_lower_ = sum_upper_;
  sums_dirty_ = false;
}

Partition::Partition(std::shared_ptr<const TargetShape> target, RoundingMode mode)
    : target_(std::move(target)), mode_(mode) {
  if (!target_ || target_->pieces.empty()) throw DomainError("target shape has no pieces");
  std::vector<PartitionPiece> initial;
  for (std::size_t i = 0; i < target_->pieces.size(); ++i) {
    eval_box(static_cast<int>(i), target_->pieces[i].domain, nullptr, 0, initial);
  }
  for (auto& p : initial) push_piece(std::move(p));
}

bool Partition::refine_step() {
  if (pieces_.empty()) return false;
  if (!(pieces_.front().priority > 0.0)) return false;
  PartitionPiece top = pop_top();
  if (!top.box.splittable()) {
    top.priority = -1.0;  // resolution floor reached; park it
    push_piece(std::move(top));
    return true;
  }
  auto [left, right] = top.box.bisect();
  std::vector<PartitionPiece> kids;
  try {
    eval_box(top.target_index, left, &top.enclosure, 0, kids);
    eval_box(top.target_index, right, &top.enclosure, 0, kids);
  } catch (...) {
    push_piece(std::move(top));  // keep the partition consistent
    throw;
  }

  // Rounding guards: in real arithmetic the children can never carry more
  // upper mass or less lower mass than the parent (their enclosures are
  // clipped to the parent's and their volumes sum to the parent's exactly).
  // Nudge the floating-point masses so the invariant holds bit-for-bit.
  bool finite = !std::isinf(top.upper_mass);
  for (const auto& k : kids) finite = finite && !std::isinf(k.upper_mass);
  if (finite) {
    double um_sum = 0.0, lm_sum = 0.0;
    for (const auto& k : kids) {
      um_sum += k.upper_mass;
      lm_sum += k.lower_mass;
    }
    if (um_sum > top.upper_mass) {
      double excess = um_sum - top.upper_mass;
      for (auto& k : kids) {
        double slack = k.upper_mass - k.lower_mass;
        double cut = std::min(excess, slack);
        k.upper_mass -= cut;
        excess -= cut;
        if (excess <= 0.0) break;
      }
    }
    if (lm_sum < top.lower_mass) {
      double deficit = top.lower_mass - lm_sum;
      for (auto& k : kids) {
        double slack = k.upper_mass - k.lower_mass;
        double bump = std::min(deficit, slack);
        k.lower_mass += bump;
        deficit -= bump;
        if (deficit <= 0.0) break;
      }
    }
  }
  for (auto& k : kids) push_piece(std::move(k));
  return true;
}

void Partition::refine_to_boxes(std::size_t budget) {
  while (pieces_.size() < budget) {
    if (!refine_step()) break;
  }
}

void Partition::refine_to_accept_bound(double target_bound, std::size_t max_boxes) {
  // The bound check is a full scan, so amortize it over batches of steps that
  // grow with the partition.
  while (acceptance_lower_bound() < target_bound && pieces_.size() < max_boxes) {
    const std::size_t batch = pieces_.size() / 16 + 1;
    bool progressed = false;
    for (std::size_t i = 0; i < batch && pieces_.size() < max_boxes; ++i) {
      if (!refine_step()) break;
      progressed = true;
    }
    if (!progressed) break;
  }
}

double Partition::sum_upper_mass() const {
  if (unresolved_ > 0) return kInf;
  recompute_sums();
  return sum_upper_;
}

double Partition::sum_lower_mass() const {
  recompute_sums();
  return sum_lower_;
}

Interval Partition::np_enclosure() const {
  double lo_sum = 0.0;
  double hi_sum = 0.0;
  for (const auto& p : pieces_) {
    const double w = target_->pieces[static_cast<std::size_t>(p.target_index)].weight;
    const Interval v = p.box.volume_enclosure();
    lo_sum = add_down(lo_sum, mul_down(v.lo, mul_down(w, std::max(0.0, p.enclosure.lo))));
    if (lo_sum < 0.0) lo_sum = 0.0;
    if (std::isinf(hi_sum) || std::isinf(p.enclosure.hi)) {
      hi_sum = kInf;
    } else {
      hi_sum = add_up(hi_sum, mul_up(v.hi, mul_up(w, std::max(0.0, p.enclosure.hi))));
    }
  }
  Interval fresh(lo_sum, hi_sum);
  if (np_cached_) {
    if (auto r = intersect(fresh, np_cache_)) fresh = *r;
  }
  np_cache_ = fresh;
  np_cached_ = true;
  return fresh;
}

double Partition::acceptance_lower_bound() const {
  if (unresolved_ > 0) return 0.0;
  recompute_sums();
  if (!(sum_upper_ > 0.0) || std::isinf(sum_upper_)) return 0.0;
  double b = div_down(sum_lower_, sum_upper_);
  return std::clamp(b, 0.0, 1.0);
}

double Partition::envelope_at(const std::string& label, std::span<const double> theta) const {
  const PartitionPiece* owner = nullptr;
  for (const auto& p : pieces_) {
    if (target_->pieces[static_cast<std::size_t>(p.target_index)].label != label) continue;
    if (!p.box.contains(theta)) continue;
    if (owner == nullptr || p.creation_index < owner->creation_index) owner = &p;
  }
  if (owner == nullptr) throw OutOfDomain();
  return owner->env_height;
}

Partition build_uniform_partition_impl(std::shared_ptr<const TargetShape> target,
                                       std::size_t cells_per_side, RoundingMode mode) {
  if (cells_per_side < 1) throw DomainError("cells_per_side must be >= 1");
  Partition part;
  part.target_ = std::move(target);
  part.mode_ = mode;
  const std::size_t k = cells_per_side;
  for (std::size_t ti = 0; ti < part.target_->pieces.size(); ++ti) {
    const Box& domain = part.target_->pieces[ti].domain;
    const std::size_t n = domain.dim();
    std::vector<std::size_t> idx(n, 0);
    std::vector<Interval> cell(n);
    for (;;) {
      for (std::size_t d = 0; d < n; ++d) {
        const Interval& s = domain.side(d);
        double w = (s.hi - s.lo) / static_cast<double>(k);
        double lo = (idx[d] == 0) ? s.lo : s.lo + static_cast<double>(idx[d]) * w;
        double hi = (idx[d] == k - 1) ? s.hi : s.lo + static_cast<double>(idx[d] + 1) * w;
        if (lo > hi) lo = hi;
        cell[d] = Interval(lo, hi);
      }
      std::vector<PartitionPiece> out;
      part.eval_box(static_cast<int>(ti), Box(cell), nullptr, 0, out);
      for (auto& p : out) part.push_piece(std::move(p));
      std::size_t d = 0;
      while (d < n && ++idx[d] == k) {
        idx[d] = 0;
        ++d;
      }
      if (d == n) break;
    }
  }
  return part;
}

Partition build_uniform_partition(std::shared_ptr<const TargetShape> target,
                                  std::size_t cells_per_side, RoundingMode mode) {
  return build_uniform_partition_impl(std::move(target), cells_per_side, mode);
}

std::pair<std::size_t, std::vector<double>> proposal_sample(const Partition& p,
                                                            const AliasTable& alias, Rng& rng) {
  std::size_t i = alias.draw(rng);
  const Box& box = p.pieces()[i].box;
  std::vector<double> theta(box.dim());
  for (std::size_t d = 0; d < box.dim(); ++d) {
    const Interval& s = box.side(d);
    double x = s.lo + rng.uniform01() * (s.hi - s.lo);
    theta[d] = std::clamp(x, s.lo, s.hi);
  }
  return {i, std::move(theta)};
}

SampleRun rejection_sample(const Partition& partition, const SamplerConfig& config) {
  if (partition.unresolved_count() > 0) {
    for (const auto& p : partition.pieces()) {
      if (std::isinf(p.upper_mass)) throw EnclosureFailure(p.box);
    }
  }
  const auto& pieces = partition.pieces();
  std::vector<double> weights(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) weights[i] = pieces[i].upper_mass;
  AliasTable alias = AliasTable::build(weights);

  Rng rng(config.seed);
  SampleRun run;
  run.samples.reserve(config.n_samples);
  std::uint64_t total_trials = 0;
  std::uint64_t total_indet = 0;

  for (std::size_t s = 0; s < config.n_samples; ++s) {
    std::uint64_t trials = 0;
    std::uint64_t indet = 0;
    bool success = false;
    while (trials < config.trials_max) {
      ++trials;
      auto [i, theta] = proposal_sample(partition, alias, rng);
      const PartitionPiece& piece = pieces[i];
      const TargetPiece& tp = partition.target().pieces[static_cast<std::size_t>(piece.target_index)];
      const double height = piece.env_height * rng.uniform01();
      bool decided = false;
      bool accept = false;
      try {
        Interval thin = tp.shape->eval_interval(Box::thin(theta), partition.mode());
        const double lo_w = mul_down(tp.weight, std::max(0.0, thin.lo));
        const double hi_w = mul_up(tp.weight, std::max(0.0, thin.hi));
        if (height <= lo_w) {
          decided = true;
          accept = true;
        } else if (height > hi_w) {
          decided = true;
        }
      } catch (const DomainError&) {
        // Point evaluation failed (e.g. exactly on a singular boundary);
        // treat as an undecidable test.
      }
      if (!decided) ++indet;
      if (accept) {
        SampleRecord rec;
        rec.target_index = piece.target_index;
        rec.theta = std::move(theta);
        rec.trials = trials;
        rec.indeterminate = indet;
        run.samples.push_back(std::move(rec));
        success = true;
        break;
      }
    }
    total_trials += trials;
    total_indet += indet;
    if (!success) {
      run.report.trials_exhausted = true;
      break;
    }
  }

  run.report.np_enclosure = partition.np_enclosure();
  run.report.envelope_integral = partition.sum_upper_mass();
  run.report.pieces = partition.size();
  run.report.total_trials = total_trials;
  run.report.total_indeterminate = total_indet;
  run.report.accept_rate =
      total_trials > 0 ? static_cast<double>(run.samples.size()) / static_cast<double>(total_trials)
                       : 0.0;
  run.report.accept_lower_bound = partition.acceptance_lower_bound();
  run.report.seed = config.seed;
  run.report.rng_draws = rng.draws();
  return run;
}

}  // namespace mrs
