#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrs/box.hpp"
#include "mrs/expr.hpp"
#include "mrs/interval.hpp"

namespace mrs {

struct EnclosureFailure : std::runtime_error {
  explicit EnclosureFailure(Box b)
      : std::runtime_error("no usable range enclosure on a sub-box"), box(std::move(b)) {}
  Box box;
};

struct DegenerateProposal : std::runtime_error {
  DegenerateProposal() : std::runtime_error("proposal has zero total mass") {}
};

struct OutOfDomain : std::runtime_error {
  OutOfDomain() : std::runtime_error("point lies outside every partition piece") {}
};

// A target shape evaluable at real points and over boxes.  eval_interval must
// return an enclosure of the true range; an infinite upper bound is allowed
// as explicit overflow saturation and marks the box as needing refinement
// before any sampling can happen.
class ShapeFn {
 public:
  virtual ~ShapeFn() = default;
  virtual double eval_real(std::span<const double> theta) const = 0;
  virtual Interval eval_interval(const Box& box, RoundingMode m) const = 0;
};

// Adapter running an ExprDag as a target shape.  Holds per-instance scratch,
// so one instance must not be evaluated from two threads at once.
class ExprShape : public ShapeFn {
 public:
  explicit ExprShape(ExprDag dag) : dag_(std::move(dag)) {}
  double eval_real(std::span<const double> theta) const override {
    return dag_.eval_real(theta, real_scratch_);
  }
  Interval eval_interval(const Box& box, RoundingMode m) const override {
    return dag_.eval_interval(box, m, iv_scratch_);
  }
  const ExprDag& dag() const { return dag_; }

 private:
  ExprDag dag_;
  mutable std::vector<double> real_scratch_;
  mutable std::vector<Interval> iv_scratch_;
};

// One labeled piece of the target domain (e.g. one tree topology).  weight
// multiplies the piece's proposal mass, which realizes a uniform prior over
// labels when all weights are equal.
struct TargetPiece {
  std::string label;
  Box domain;
  std::shared_ptr<const ShapeFn> shape;
  double weight = 1.0;
};

struct TargetShape {
  std::vector<TargetPiece> pieces;
};

struct PartitionPiece {
  int target_index = 0;
  Box box;
  Interval enclosure;          // encloses the shape's range over box
  double env_height = 0.0;     // weight * max(0, enclosure.hi), rounded up
  double priority = 0.0;       // v(box) * d(enclosure)
  double upper_mass = 0.0;     // v(box) * env_height
  double lower_mass = 0.0;     // v(box) * weight * max(0, enclosure.lo), rounded down
  std::uint64_t creation_index = 0;
};

// Deterministic pseudo-random stream (mt19937_64; uniforms built from the top
// 53 bits so results are bit-identical across platforms and library versions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform01() {
    ++draws_;
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 gen_;
  std::uint64_t draws_ = 0;
};

// Walker/Vose alias table: O(n) build, O(1) draw, draw probability of entry i
// equal to weights[i] / sum(weights).
class AliasTable {
 public:
  static AliasTable build(std::span<const double> weights);
  std::size_t draw(Rng& rng) const;
  std::size_t size() const { return cutoff_.size(); }
  double cutoff(std::size_t i) const { return cutoff_[i]; }
  std::size_t alias(std::size_t i) const { return alias_[i]; }

 private:
  std::vector<double> cutoff_;
  std::vector<std::size_t> alias_;
};

// Adaptive partition of the target domain with its simple-function envelope.
// Refinement always bisects the piece maximizing v(box) * d(enclosure), per
// step, via a priority queue; ties go to the earlier-created piece.
class Partition {
 public:
  Partition(std::shared_ptr<const TargetShape> target, RoundingMode mode = RoundingMode::outward);

  // One pop-bisect-push refinement.  Returns false when nothing useful is
  // left to split (top priority is not positive).
  bool refine_step();
  // Refine until the partition holds `budget` pieces (or nothing is left to
  // split).  budget == 1 leaves the original domain boxes untouched.
  void refine_to_boxes(std::size_t budget);
  // Refine until acceptance_lower_bound() >= target_bound, giving up at
  // max_boxes pieces.
  void refine_to_accept_bound(double target_bound, std::size_t max_boxes);

  const std::vector<PartitionPiece>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  const TargetShape& target() const { return *target_; }
  RoundingMode mode() const { return mode_; }

  double sum_upper_mass() const;
  double sum_lower_mass() const;
  // Number of pieces whose upper bound is saturated (infinite); they must be
  // refined away before sampling.
  std::size_t unresolved_count() const { return unresolved_; }

  // [sum of lower masses, sum of upper masses], outward-rounded, intersected
  // with every enclosure reported earlier so successive reports are nested.
  Interval np_enclosure() const;
  // sum_lower / sum_upper, rounded down; a rigorous lower bound on the
  // acceptance probability.
  double acceptance_lower_bound() const;

  // Envelope value at a point of the labeled domain.  A point on a shared
  // face belongs to the piece with the lowest creation index.
  double envelope_at(const std::string& label, std::span<const double> theta) const;

 private:
  friend Partition build_uniform_partition_impl(std::shared_ptr<const TargetShape>, std::size_t,
                                                RoundingMode);
  Partition() = default;
  PartitionPiece make_piece(int target_index, const Box& box, const Interval& enclosure);
  void eval_box(int target_index, const Box& box, const Interval* parent, int depth,
                std::vector<PartitionPiece>& out);
  void push_piece(PartitionPiece p);
  PartitionPiece pop_top();
  void recompute_sums() const;

  std::shared_ptr<const TargetShape> target_;
  RoundingMode mode_ = RoundingMode::outward;
  std::vector<PartitionPiece> pieces_;  // max-heap by (priority, -creation)
  // Mass totals are recomputed on demand with directed rounding and capped by
  // the previous report; refinement only tightens the envelope, so the caps
  // stay valid and make the reported totals monotone by construction.
  mutable bool sums_dirty_ = true;
  mutable double sum_upper_ = std::numeric_limits<double>::infinity();
  mutable double sum_lower_ = 0.0;
  std::size_t unresolved_ = 0;
  std::uint64_t next_creation_ = 0;
  mutable bool np_cached_ = false;
  mutable Interval np_cache_;
};

// Uniform k-per-side subdivision of every domain piece (k^n boxes each); used
// for mesh-asymptotics studies where adaptivity would get in the way.
Partition build_uniform_partition(std::shared_ptr<const TargetShape> target,
                                  std::size_t cells_per_side,
                                  RoundingMode mode = RoundingMode::outward);

// Draw one point from the partition proposal: a piece with probability
// proportional to its upper mass, then a uniform point in its box.
std::pair<std::size_t, std::vector<double>> proposal_sample(const Partition& p,
                                                            const AliasTable& alias, Rng& rng);

struct SampleRecord {
  int target_index = 0;
  std::vector<double> theta;
  std::uint64_t trials = 0;         // proposals consumed for this sample
  std::uint64_t indeterminate = 0;  // undecidable accept tests along the way
};

struct RunReport {
  Interval np_enclosure;
  double envelope_integral = 0.0;  // N_fq = sum of upper masses
  std::size_t pieces = 0;
  double accept_rate = 0.0;
  double accept_lower_bound = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t rng_draws = 0;
  std::uint64_t total_trials = 0;
  std::uint64_t total_indeterminate = 0;
  bool trials_exhausted = false;
};

struct SamplerConfig {
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  std::uint64_t trials_max = 1000000;
};

struct SampleRun {
  std::vector<SampleRecord> samples;
  RunReport report;
};

// The von Neumann accept/reject loop over the partition envelope.  Accepts
// only when the height is at or below the rigorous lower bound of the
// shape's thin-interval value; undecidable tests count as rejections and are
// tallied.  When trials_max proposals fail to yield a sample, the run stops
// and the partial results are returned with trials_exhausted set.
SampleRun rejection_sample(const Partition& partition, const SamplerConfig& config);

}  // namespace mrs
