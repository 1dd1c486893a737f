#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrs/engine.hpp"

namespace mrs::phylo {

// Nucleotide state order is (t, c, a, g) throughout.
inline constexpr std::array<char, 4> kNucChars = {'t', 'c', 'a', 'g'};
int nuc_index(char c);  // -1 for anything outside acgt

// Distinct aligned columns with multiplicities: the sufficient statistics of
// the sequence data under site independence.
struct SitePatternData {
  std::vector<std::string> taxa;
  struct Pattern {
    std::vector<std::uint8_t> column;  // one state index per taxon
    std::uint64_t count = 0;
  };
  std::vector<Pattern> patterns;

  std::uint64_t total_sites() const;
  void validate() const;
};

// TSV pattern file: `#taxa:<comma-separated names>` header, then
// `<pattern>\t<count>` rows.
SitePatternData read_patterns(std::istream& in);
SitePatternData read_patterns_file(const std::string& path);
void write_patterns(std::ostream& out, const SitePatternData& d);

// Column counting over an aligned set of sequences (acgt only, equal
// lengths); output patterns are sorted lexicographically.
SitePatternData patterns_from_alignment(const std::vector<std::string>& names,
                                        const std::vector<std::string>& seqs);

// FASTA reader for pre-aligned input.
std::pair<std::vector<std::string>, std::vector<std::string>> read_fasta(std::istream& in);

struct SubstModel {
  enum class Kind { jc, hky };
  Kind kind = Kind::jc;
  std::array<double, 4> freqs = {0.25, 0.25, 0.25, 0.25};  // (t, c, a, g)
  double kappa = 1.0;

  static SubstModel jc();
  static SubstModel hky(const std::array<double, 4>& freqs, double kappa);
  // Convert an expected transition/transversion ratio R into the rate-ratio
  // kappa for the given frequencies.
  static double kappa_from_tstv(double tstv, const std::array<double, 4>& freqs);
};

using RealMatrix = std::array<std::array<double, 4>, 4>;
using IntervalMatrix = std::array<std::array<Interval, 4>, 4>;

// Transition probabilities for branch length t, measured in expected
// substitutions per site (the rate matrix is normalized to unit mean rate).
RealMatrix transition(const SubstModel& m, double t);
IntervalMatrix transition(const SubstModel& m, const Interval& t, RoundingMode rm);

// Star-tree likelihood of one 3-taxon site pattern:
//   sum_r pi_r P(t1)[r][x1] P(t2)[r][x2] P(t3)[r][x3].
double triplet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 3>& pattern,
                               double t1, double t2, double t3);
Interval triplet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 3>& pattern,
                                 const Interval& t1, const Interval& t2, const Interval& t3,
                                 RoundingMode rm);

// The three unrooted quartet topologies, named by the taxon paired with the
// first one.
enum class QuartetTopology { t12_34, t13_24, t14_23 };
const char* topology_name(QuartetTopology t);
std::optional<QuartetTopology> topology_from_name(const std::string& name);

// Quartet likelihood with leaf branches t[0..3] (by taxon) and internal
// branch t[4].
double quartet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 4>& pattern,
                               QuartetTopology topo, const std::array<double, 5>& t);
Interval quartet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 4>& pattern,
                                 QuartetTopology topo, const std::array<Interval, 5>& t,
                                 RoundingMode rm);

// Branch lengths of the rooted, clocked triplet given split time tau1, root
// time tau0 and tip fraction gamma, in order (fossil tip, ingroup tip,
// internal edge, outgroup tip).
std::array<double, 4> clocked_triplet_branches(double tau1, double tau0, double gamma = 1.0);

// Rooted, clocked triplet with parameters (tau1 = ingroup tip time,
// delta = root time - tau1, gamma = first-taxon tip fraction).  Taxon order
// in the data is (ingroup fossil tip, ingroup tip, outgroup); branch lengths
// are gamma*tau1 and tau1 for the ingroup tips, delta for the internal edge
// and tau1 + delta for the outgroup tip.
double clocked_triplet_site_likelihood(const SubstModel& m,
                                       const std::array<std::uint8_t, 3>& pattern, double tau1,
                                       double delta, double gamma);
Interval clocked_triplet_site_likelihood(const SubstModel& m,
                                         const std::array<std::uint8_t, 3>& pattern,
                                         const Interval& tau1, const Interval& delta,
                                         const Interval& gamma, RoundingMode rm);

// Test harness: sum of the site likelihood over all 4^n patterns (must be 1).
double pattern_likelihood_normalization(const SubstModel& m, std::span<const double> branches,
                                        int n_taxa, QuartetTopology topo = QuartetTopology::t12_34);

enum class TreeClass {
  unrooted_triplet,        // theta = (t1, t2, t3)
  clocked_triplet,         // theta = (tau1, delta)
  clocked_triplet_fossil,  // theta = (tau1, delta, gamma)
  unrooted_quartet,        // theta = (t1..t4, t_internal), 3 topology pieces
};
int param_count(TreeClass c);
std::optional<TreeClass> tree_class_from_name(const std::string& name);
const char* tree_class_name(TreeClass c);

// Posterior target shape for a dataset: product over patterns of
// L(pattern|theta)^count, computed as exp(sum count*log L - C) with a fixed
// per-dataset constant C so the shape stays in floating-point range.  The
// quartet class yields three equally weighted topology pieces sharing one C.
std::shared_ptr<const TargetShape> make_phylo_target(const SitePatternData& data, TreeClass cls,
                                                     const SubstModel& model, double branch_lo,
                                                     double branch_hi);

struct DivergenceResult {
  double ratio = 0.0;                // ingroup split time / root time
  std::optional<double> fossil_date; // (1-gamma)*tau1 / tau0, fossil class only
};

// Human-readable divergence summary of one sample.  For the unrooted class
// the tree is midpoint-rooted first: the root sits at the midpoint of the
// longest leaf-to-leaf path (ties broken toward the outgroup edge, which for
// triplets never changes the result), the root time is half that path and
// the split time is the root time minus the root-to-center distance.
// Returns nullopt when the root time vanishes.
std::optional<DivergenceResult> divergence_ratio(TreeClass cls, std::span<const double> theta);

}  // namespace mrs::phylo
