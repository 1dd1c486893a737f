#include "mrs/phylo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace mrs::phylo {

int nuc_index(char c) {
  switch (std::tolower(static_cast<unsigned char>(c))) {
    case 't': return 0;
    case 'c': return 1;
    case 'a': return 2;
    case 'g': return 3;
    default: return -1;
  }
}

std::uint64_t SitePatternData::total_sites() const {
  std::uint64_t n = 0;
  for (const auto& p : patterns) n += p.count;
  return n;
}

void SitePatternData::validate() const {
  if (taxa.size() != 3 && taxa.size() != 4)
    throw DomainError("site pattern data must have 3 or 4 taxa");
  std::map<std::vector<std::uint8_t>, bool> seen;
  for (const auto& p : patterns) {
    if (p.column.size() != taxa.size())
      throw DomainError("pattern column length does not match taxa count");
    if (p.count == 0) throw DomainError("pattern count must be positive");
    for (auto s : p.column)
      if (s > 3) throw DomainError("pattern state out of range");
    if (!seen.emplace(p.column, true).second) throw DomainError("duplicate site pattern");
  }
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string pattern_text(const std::vector<std::uint8_t>& column) {
  std::string t;
  for (auto s : column) t += kNucChars[s];
  return t;
}

}  // namespace

SitePatternData read_patterns(std::istream& in) {
  SitePatternData d;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (!have_header) {
      const std::string prefix = "#taxa:";
      if (line.rfind(prefix, 0) != 0)
        throw DomainError("pattern file must start with a '#taxa:' header line");
      std::stringstream names(line.substr(prefix.size()));
      std::string name;
      while (std::getline(names, name, ',')) {
        name = trim(name);
        if (name.empty()) throw DomainError("empty taxon name in pattern file header");
        d.taxa.push_back(name);
      }
      have_header = true;
      continue;
    }
    if (line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) tab = line.find(' ');
    if (tab == std::string::npos)
      throw DomainError("pattern row must be '<pattern>\\t<count>': " + line);
    std::string pat = trim(line.substr(0, tab));
    std::string cnt = trim(line.substr(tab + 1));
    SitePatternData::Pattern p;
    for (char c : pat) {
      int s = nuc_index(c);
      if (s < 0) throw DomainError("invalid nucleotide in pattern: " + pat);
      p.column.push_back(static_cast<std::uint8_t>(s));
    }
    try {
      std::size_t pos = 0;
      p.count = std::stoull(cnt, &pos);
      if (pos != cnt.size()) throw std::invalid_argument(cnt);
    } catch (const std::exception&) {
      throw DomainError("invalid pattern count: " + cnt);
    }
    d.patterns.push_back(std::move(p));
  }
  if (!have_header) throw DomainError("empty pattern file");
  d.validate();
  return d;
}

SitePatternData read_patterns_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open pattern file: " + path);
  return read_patterns(in);
}

void write_patterns(std::ostream& out, const SitePatternData& d) {
  out << "#taxa:";
  for (std::size_t i = 0; i < d.taxa.size(); ++i) out << (i ? "," : "") << d.taxa[i];
  out << "\n";
  for (const auto& p : d.patterns) out << pattern_text(p.column) << "\t" << p.count << "\n";
}

SitePatternData patterns_from_alignment(const std::vector<std::string>& names,
                                        const std::vector<std::string>& seqs) {
  if (names.size() != seqs.size()) throw DomainError("taxa/sequence count mismatch");
  if (names.size() != 3 && names.size() != 4)
    throw DomainError("alignment must have 3 or 4 sequences");
  const std::size_t len = seqs[0].size();
  if (len == 0) throw DomainError("empty alignment");
  for (const auto& s : seqs)
    if (s.size() != len) throw DomainError("aligned sequences must have equal length");

  std::map<std::string, std::uint64_t> counts;
  for (std::size_t site = 0; site < len; ++site) {
    std::string col;
    for (const auto& s : seqs) {
      int idx = nuc_index(s[site]);
      if (idx < 0)
        throw DomainError(std::string("invalid character in alignment: '") + s[site] + "'");
      col += kNucChars[idx];
    }
    ++counts[col];
  }
  SitePatternData d;
  d.taxa = names;
  for (const auto& [col, n] : counts) {
    SitePatternData::Pattern p;
    for (char c : col) p.column.push_back(static_cast<std::uint8_t>(nuc_index(c)));
    p.count = n;
    d.patterns.push_back(std::move(p));
  }
  d.validate();
  return d;
}

std::pair<std::vector<std::string>, std::vector<std::string>> read_fasta(std::istream& in) {
  std::vector<std::string> names;
  std::vector<std::string> seqs;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '>') {
      names.push_back(trim(line.substr(1)));
      seqs.emplace_back();
    } else {
      if (seqs.empty()) throw DomainError("FASTA data before first header");
      seqs.back() += line;
    }
  }
  if (names.empty()) throw DomainError("empty FASTA input");
  return {std::move(names), std::move(seqs)};
}

namespace {

void validate_model(const SubstModel& m) {
  double sum = 0.0;
  for (double f : m.freqs) {
    if (!(f > 0.0)) throw DomainError("base frequencies must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DomainError("base frequencies must sum to 1");
  if (!(m.kappa > 0.0)) throw DomainError("kappa must be positive");
}

}  // namespace

SubstModel SubstModel::jc() { return SubstModel{}; }

SubstModel SubstModel::hky(const std::array<double, 4>& freqs, double kappa) {
  SubstModel m;
  m.kind = Kind::hky;
  m.freqs = freqs;
  m.kappa = kappa;
  validate_model(m);
  return m;
}

double SubstModel::kappa_from_tstv(double tstv, const std::array<double, 4>& freqs) {
  // Expected-rate ratio R = kappa * (pi_T pi_C + pi_A pi_G) / (pi_Y pi_R).
  double tc_ag = freqs[0] * freqs[1] + freqs[2] * freqs[3];
  double yr = (freqs[0] + freqs[1]) * (freqs[2] + freqs[3]);
  if (!(tstv > 0.0) || !(tc_ag > 0.0)) throw DomainError("invalid ts/tv conversion inputs");
  return tstv * yr / tc_ag;
}

namespace {

// group 0 = pyrimidines (t, c); group 1 = purines (a, g).
inline int group_of(int s) { return s >= 2 ? 1 : 0; }

struct HkyConsts {
  std::array<double, 4> f;
  std::array<double, 4> big_pi;  // group frequency of each state
  double kappa = 1.0;
  double beta = 1.0;  // rate normalization: mean rate 1
};

HkyConsts hky_consts(const SubstModel& m) {
  validate_model(m);
  HkyConsts c;
  c.f = m.freqs;
  c.kappa = m.kind == SubstModel::Kind::jc ? 1.0 : m.kappa;
  if (m.kind == SubstModel::Kind::jc) c.f = {0.25, 0.25, 0.25, 0.25};
  double py = c.f[0] + c.f[1];
  double pr = c.f[2] + c.f[3];
  for (int j = 0; j < 4; ++j) c.big_pi[j] = group_of(j) ? pr : py;
  double mu = 2.0 * c.kappa * (c.f[0] * c.f[1] + c.f[2] * c.f[3]) + 2.0 * py * pr;
  c.beta = 1.0 / mu;
  return c;
}

}  // namespace

RealMatrix transition(const SubstModel& m, double t) {
  if (!(t >= 0.0)) throw DomainError("branch length must be nonnegative");
  const HkyConsts c = hky_consts(m);
  const double e2 = std::exp(-c.beta * t);
  RealMatrix p;
  for (int j = 0; j < 4; ++j) {
    const double fj = c.f[j];
    const double pij = c.big_pi[j];
    const double e3 = std::exp(-c.beta * t * (1.0 + pij * (c.kappa - 1.0)));
    for (int i = 0; i < 4; ++i) {
      double v;
      if (group_of(i) != group_of(j)) {
        v = fj * (1.0 - e2);
      } else if (i == j) {
        v = fj + fj * (1.0 / pij - 1.0) * e2 + ((pij - fj) / pij) * e3;
      } else {
        v = fj + fj * (1.0 / pij - 1.0) * e2 - (fj / pij) * e3;
      }
      p[i][j] = v;
    }
  }
  return p;
}

IntervalMatrix transition(const SubstModel& m, const Interval& t, RoundingMode rm) {
  if (!(t.lo >= 0.0)) throw DomainError("branch length must be nonnegative");
  const HkyConsts c = hky_consts(m);
  const Interval one = Interval::point(1.0);
  const Interval unit(0.0, 1.0);
  const Interval beta = Interval::point(c.beta);
  const Interval km1 = Interval::point(c.kappa - 1.0);
  const Interval e2 = apply_std(StdFn::exp, neg(mul(beta, t, rm)), rm);
  IntervalMatrix p;
  for (int j = 0; j < 4; ++j) {
    const Interval fj = Interval::point(c.f[j]);
    const Interval pij = Interval::point(c.big_pi[j]);
    const Interval factor = add(one, mul(pij, km1, rm), rm);
    const Interval e3 =
        apply_std(StdFn::exp, neg(mul(mul(beta, t, rm), factor, rm)), rm);
    const Interval a = mul(fj, sub(div(one, pij, rm), one, rm), rm);  // fj*(1/Pi - 1)
    for (int i = 0; i < 4; ++i) {
      Interval v(0.0, 0.0);
      if (group_of(i) != group_of(j)) {
        v = mul(fj, sub(one, e2, rm), rm);
      } else if (i == j) {
        v = add(add(fj, mul(a, e2, rm), rm),
                mul(div(sub(pij, fj, rm), pij, rm), e3, rm), rm);
      } else {
        v = sub(add(fj, mul(a, e2, rm), rm), mul(div(fj, pij, rm), e3, rm), rm);
      }
      auto clipped = intersect(v, unit);
      if (!clipped) throw DomainError("transition probability enclosure left [0,1]");
      p[i][j] = *clipped;
    }
  }
  return p;
}

double triplet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 3>& pattern,
                               double t1, double t2, double t3) {
  const HkyConsts c = hky_consts(m);
  const RealMatrix p1 = transition(m, t1);
  const RealMatrix p2 = transition(m, t2);
  const RealMatrix p3 = transition(m, t3);
  double sum = 0.0;
  for (int r = 0; r < 4; ++r)
    sum += c.f[r] * p1[r][pattern[0]] * p2[r][pattern[1]] * p3[r][pattern[2]];
  return sum;
}

Interval triplet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 3>& pattern,
                                 const Interval& t1, const Interval& t2, const Interval& t3,
                                 RoundingMode rm) {
  const HkyConsts c = hky_consts(m);
  const IntervalMatrix p1 = transition(m, t1, rm);
  const IntervalMatrix p2 = transition(m, t2, rm);
  const IntervalMatrix p3 = transition(m, t3, rm);
  Interval sum(0.0, 0.0);
  for (int r = 0; r < 4; ++r) {
    Interval term = mul(Interval::point(c.f[r]), p1[r][pattern[0]], rm);
    term = mul(term, p2[r][pattern[1]], rm);
    term = mul(term, p3[r][pattern[2]], rm);
    sum = add(sum, term, rm);
  }
  return Interval(std::clamp(sum.lo, 0.0, 1.0), std::clamp(sum.hi, 0.0, 1.0));
}

const char* topology_name(QuartetTopology t) {
  switch (t) {
    case QuartetTopology::t12_34: return "12|34";
    case QuartetTopology::t13_24: return "13|24";
    case QuartetTopology::t14_23: return "14|23";
  }
  return "?";
}

std::optional<QuartetTopology> topology_from_name(const std::string& name) {
  if (name == "12|34") return QuartetTopology::t12_34;
  if (name == "13|24") return QuartetTopology::t13_24;
  if (name == "14|23") return QuartetTopology::t14_23;
  return std::nullopt;
}

namespace {

// Leaf assignment (a,b | c,d) of a topology, as taxon indices.
std::array<int, 4> topology_pairs(QuartetTopology t) {
  switch (t) {
    case QuartetTopology::t12_34: return {0, 1, 2, 3};
    case QuartetTopology::t13_24: return {0, 2, 1, 3};
    case QuartetTopology::t14_23: return {0, 3, 1, 2};
  }
  return {0, 1, 2, 3};
}

}  // namespace

double quartet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 4>& pattern,
                               QuartetTopology topo, const std::array<double, 5>& t) {
  const HkyConsts c = hky_consts(m);
  const auto [a, b, cc, dd] = topology_pairs(topo);
  std::array<RealMatrix, 4> leaf;
  for (int k = 0; k < 4; ++k) leaf[k] = transition(m, t[k]);
  const RealMatrix pint = transition(m, t[4]);
  double sum = 0.0;
  for (int u = 0; u < 4; ++u) {
    double inner = 0.0;
    for (int v = 0; v < 4; ++v)
      inner += pint[u][v] * leaf[cc][v][pattern[cc]] * leaf[dd][v][pattern[dd]];
    sum += c.f[u] * leaf[a][u][pattern[a]] * leaf[b][u][pattern[b]] * inner;
  }
  return sum;
}

Interval quartet_site_likelihood(const SubstModel& m, const std::array<std::uint8_t, 4>& pattern,
                                 QuartetTopology topo, const std::array<Interval, 5>& t,
                                 RoundingMode rm) {
  const HkyConsts c = hky_consts(m);
  const auto [a, b, cc, dd] = topology_pairs(topo);
  std::array<IntervalMatrix, 4> leaf;
  for (int k = 0; k < 4; ++k) leaf[k] = transition(m, t[k], rm);
  const IntervalMatrix pint = transition(m, t[4], rm);
  Interval sum(0.0, 0.0);
  for (int u = 0; u < 4; ++u) {
    Interval inner(0.0, 0.0);
    for (int v = 0; v < 4; ++v) {
      Interval term = mul(pint[u][v], leaf[cc][v][pattern[cc]], rm);
      term = mul(term, leaf[dd][v][pattern[dd]], rm);
      inner = add(inner, term, rm);
    }
    Interval term = mul(Interval::point(c.f[u]), leaf[a][u][pattern[a]], rm);
    term = mul(term, leaf[b][u][pattern[b]], rm);
    term = mul(term, inner, rm);
    sum = add(sum, term, rm);
  }
  return Interval(std::clamp(sum.lo, 0.0, 1.0), std::clamp(sum.hi, 0.0, 1.0));
}

std::array<double, 4> clocked_triplet_branches(double tau1, double tau0, double gamma) {
  if (!(tau1 >= 0.0) || !(tau0 >= tau1)) throw DomainError("clocked triplet needs 0 <= tau1 <= tau0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0,1]");
  return {gamma * tau1, tau1, tau0 - tau1, tau0};
}

double clocked_triplet_site_likelihood(const SubstModel& m,
                                       const std::array<std::uint8_t, 3>& pattern, double tau1,
                                       double delta, double gamma) {
  if (!(tau1 >= 0.0) || !(delta >= 0.0)) throw DomainError("clocked times must be nonnegative");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0,1]");
  const HkyConsts c = hky_consts(m);
  const RealMatrix p_fossil = transition(m, gamma * tau1);
  const RealMatrix p_tip = transition(m, tau1);
  const RealMatrix p_int = transition(m, delta);
  const RealMatrix p_out = transition(m, tau1 + delta);
  double sum = 0.0;
  for (int r = 0; r < 4; ++r) {
    double inner = 0.0;
    for (int mm = 0; mm < 4; ++mm)
      inner += p_int[r][mm] * p_fossil[mm][pattern[0]] * p_tip[mm][pattern[1]];
    sum += c.f[r] * p_out[r][pattern[2]] * inner;
  }
  return sum;
}

Interval clocked_triplet_site_likelihood(const SubstModel& m,
                                         const std::array<std::uint8_t, 3>& pattern,
                                         const Interval& tau1, const Interval& delta,
                                         const Interval& gamma, RoundingMode rm) {
  if (!(tau1.lo >= 0.0) || !(delta.lo >= 0.0))
    throw DomainError("clocked times must be nonnegative");
  if (!(gamma.lo >= 0.0 && gamma.hi <= 1.0)) throw DomainError("gamma must lie in [0,1]");
  const HkyConsts c = hky_consts(m);
  const IntervalMatrix p_fossil = transition(m, mul(gamma, tau1, rm), rm);
  const IntervalMatrix p_tip = transition(m, tau1, rm);
  const IntervalMatrix p_int = transition(m, delta, rm);
  const IntervalMatrix p_out = transition(m, add(tau1, delta, rm), rm);
  Interval sum(0.0, 0.0);
  for (int r = 0; r < 4; ++r) {
    Interval inner(0.0, 0.0);
    for (int mm = 0; mm < 4; ++mm) {
      Interval term = mul(p_int[r][mm], p_fossil[mm][pattern[0]], rm);
      term = mul(term, p_tip[mm][pattern[1]], rm);
      inner = add(inner, term, rm);
    }
    Interval term = mul(Interval::point(c.f[r]), p_out[r][pattern[2]], rm);
    term = mul(term, inner, rm);
    sum = add(sum, term, rm);
  }
  return Interval(std::clamp(sum.lo, 0.0, 1.0), std::clamp(sum.hi, 0.0, 1.0));
}

double pattern_likelihood_normalization(const SubstModel& m, std::span<const double> branches,
                                        int n_taxa, QuartetTopology topo) {
  double sum = 0.0;
  if (n_taxa == 3) {
    if (branches.size() != 3) throw DomainError("triplet normalization needs 3 branches");
    for (int p = 0; p < 64; ++p) {
      std::array<std::uint8_t, 3> pat = {static_cast<std::uint8_t>(p & 3),
                                         static_cast<std::uint8_t>((p >> 2) & 3),
                                         static_cast<std::uint8_t>((p >> 4) & 3)};
      sum += triplet_site_likelihood(m, pat, branches[0], branches[1], branches[2]);
    }
  } else if (n_taxa == 4) {
    if (branches.size() != 5) throw DomainError("quartet normalization needs 5 branches");
    std::array<double, 5> t;
    std::copy(branches.begin(), branches.end(), t.begin());
    for (int p = 0; p < 256; ++p) {
      std::array<std::uint8_t, 4> pat = {
          static_cast<std::uint8_t>(p & 3), static_cast<std::uint8_t>((p >> 2) & 3),
          static_cast<std::uint8_t>((p >> 4) & 3), static_cast<std::uint8_t>((p >> 6) & 3)};
      sum += quartet_site_likelihood(m, pat, topo, t);
    }
  } else {
    throw DomainError("normalization supports 3 or 4 taxa");
  }
  return sum;
}

int param_count(TreeClass c) {
  switch (c) {
    case TreeClass::unrooted_triplet: return 3;
    case TreeClass::clocked_triplet: return 2;
    case TreeClass::clocked_triplet_fossil: return 3;
    case TreeClass::unrooted_quartet: return 5;
  }
  return 0;
}

const char* tree_class_name(TreeClass c) {
  switch (c) {
    case TreeClass::unrooted_triplet: return "unrooted-triplet";
    case TreeClass::clocked_triplet: return "clocked-triplet";
    case TreeClass::clocked_triplet_fossil: return "clocked-triplet-fossil";
    case TreeClass::unrooted_quartet: return "unrooted-quartet";
  }
  return "?";
}

std::optional<TreeClass> tree_class_from_name(const std::string& name) {
  for (TreeClass c : {TreeClass::unrooted_triplet, TreeClass::clocked_triplet,
                      TreeClass::clocked_triplet_fossil, TreeClass::unrooted_quartet})
    if (name == tree_class_name(c)) return c;
  return std::nullopt;
}

namespace {

constexpr double kExpOverflow = 709.0;  // exp() overflows just above this
constexpr double kExpLoCap = 700.0;

// Posterior shape of one labeled tree piece: exp(sum_patterns count * log
// L(pattern | theta) - log_offset), evaluated pointwise and over boxes.
class PhyloShape : public ShapeFn {
 public:
  PhyloShape(SubstModel model, SitePatternData data, TreeClass cls, QuartetTopology topo,
             double log_offset)
      : model_(std::move(model)),
        data_(std::move(data)),
        cls_(cls),
        topo_(topo),
        log_offset_(log_offset) {}

  double log_likelihood(std::span<const double> theta) const {
    double ll = 0.0;
    for (const auto& p : data_.patterns) {
      double site = site_likelihood(p.column, theta);
      ll += static_cast<double>(p.count) * std::log(site);
    }
    return ll;
  }

  double eval_real(std::span<const double> theta) const override {
    if (data_.patterns.empty()) return std::exp(-log_offset_);
    return std::exp(log_likelihood(theta) - log_offset_);
  }

  Interval eval_interval(const Box& box, RoundingMode rm) const override {
    if (static_cast<int>(box.dim()) != param_count(cls_))
      throw DomainError("box dimension does not match tree class");
    double acc_lo = 0.0;
    double acc_hi = 0.0;
    bool lower_dead = false;
    for (const auto& p : data_.patterns) {
      const Interval site = site_likelihood(p.column, box, rm);
      const double count = static_cast<double>(p.count);
      if (site.hi <= 0.0) return Interval(0.0, 0.0);
      const double log_hi = apply_std(StdFn::log, Interval::point(site.hi), rm).hi;
      acc_hi = add_up(acc_hi, mul_up(count, log_hi));
      if (lower_dead) continue;
      if (site.lo <= 0.0) {
        lower_dead = true;
      } else {
        const double log_lo = apply_std(StdFn::log, Interval::point(site.lo), rm).lo;
        acc_lo = add_down(acc_lo, mul_down(count, log_lo));
      }
    }
    const double arg_hi = sub_up(acc_hi, log_offset_);
    double hi;
    if (arg_hi > kExpOverflow) {
      hi = std::numeric_limits<double>::infinity();  // saturation: refine me
    } else {
      hi = apply_std(StdFn::exp, Interval::point(arg_hi), rm).hi;
    }
    double lo = 0.0;
    if (!lower_dead) {
      const double arg_lo = std::min(sub_down(acc_lo, log_offset_), kExpLoCap);
      lo = apply_std(StdFn::exp, Interval::point(arg_lo), rm).lo;
    }
    if (lo > hi) lo = hi;
    return Interval(lo, hi);
  }

 private:
  double site_likelihood(const std::vector<std::uint8_t>& col,
                         std::span<const double> theta) const {
    switch (cls_) {
      case TreeClass::unrooted_triplet:
        return triplet_site_likelihood(model_, {col[0], col[1], col[2]}, theta[0], theta[1],
                                       theta[2]);
      case TreeClass::clocked_triplet:
        return clocked_triplet_site_likelihood(model_, {col[0], col[1], col[2]}, theta[0],
                                               theta[1], 1.0);
      case TreeClass::clocked_triplet_fossil:
        return clocked_triplet_site_likelihood(model_, {col[0], col[1], col[2]}, theta[0],
                                               theta[1], theta[2]);
      case TreeClass::unrooted_quartet: {
        std::array<double, 5> t;
        std::copy(theta.begin(), theta.end(), t.begin());
        return quartet_site_likelihood(model_, {col[0], col[1], col[2], col[3]}, topo_, t);
      }
    }
    throw DomainError("unknown tree class");
  }

  Interval site_likelihood(const std::vector<std::uint8_t>& col, const Box& box,
                           RoundingMode rm) const {
    switch (cls_) {
      case TreeClass::unrooted_triplet:
        return triplet_site_likelihood(model_, {col[0], col[1], col[2]}, box.side(0), box.side(1),
                                       box.side(2), rm);
      case TreeClass::clocked_triplet:
        return clocked_triplet_site_likelihood(model_, {col[0], col[1], col[2]}, box.side(0),
                                               box.side(1), Interval::point(1.0), rm);
      case TreeClass::clocked_triplet_fossil:
        return clocked_triplet_site_likelihood(model_, {col[0], col[1], col[2]}, box.side(0),
                                               box.side(1), box.side(2), rm);
      case TreeClass::unrooted_quartet: {
        std::array<Interval, 5> t = {box.side(0), box.side(1), box.side(2), box.side(3),
                                     box.side(4)};
        return quartet_site_likelihood(model_, {col[0], col[1], col[2], col[3]}, topo_, t, rm);
      }
    }
    throw DomainError("unknown tree class");
  }

  SubstModel model_;
  SitePatternData data_;
  TreeClass cls_;
  QuartetTopology topo_;
  double log_offset_;
};

// Which sides of a class's parameter box are branch-length-like (searched on a
// log grid) versus linear fractions like gamma.
bool log_scaled_dim(TreeClass cls, int dim) {
  return !(cls == TreeClass::clocked_triplet_fossil && dim == 2);
}

std::vector<double> grid_theta(TreeClass cls, const Box& domain, std::span<const double> u) {
  std::vector<double> theta(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const Interval& side = domain.side(k);
    if (log_scaled_dim(cls, static_cast<int>(k)) && side.lo > 0.0) {
      const double llo = std::log(side.lo);
      const double lhi = std::log(side.hi);
      theta[k] = std::exp(llo + u[k] * (lhi - llo));
    } else {
      theta[k] = side.lo + u[k] * (side.hi - side.lo);
    }
    theta[k] = std::clamp(theta[k], side.lo, side.hi);
  }
  return theta;
}

// Deterministic search for (approximately) the maximum log-likelihood over
// the pieces: a coarse grid pass followed by shrinking local scans.  The
// result only has to land within the exp() range of the true maximum; the
// engine's saturation handling covers the rest.
double find_log_offset(const std::vector<std::pair<const PhyloShape*, Box>>& pieces,
                       TreeClass cls) {
  double best = -std::numeric_limits<double>::infinity();
  const PhyloShape* best_shape = nullptr;
  Box best_domain = pieces.front().second;
  std::vector<double> best_u;

  const int dim = static_cast<int>(pieces.front().second.dim());
  const int g = dim <= 2 ? 33 : (dim == 3 ? 17 : 9);
  std::vector<int> idx(dim, 0);
  std::vector<double> u(dim, 0.0);
  for (const auto& [shape, domain] : pieces) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      for (int k = 0; k < dim; ++k) u[k] = static_cast<double>(idx[k]) / (g - 1);
      const auto theta = grid_theta(cls, domain, u);
      const double ll = shape->log_likelihood(theta);
      if (std::isfinite(ll) && ll > best) {
        best = ll;
        best_shape = shape;
        best_domain = domain;
        best_u = u;
      }
      int k = 0;
      while (k < dim && ++idx[k] == g) idx[k++] = 0;
      if (k == dim) break;
    }
  }
  if (!best_shape) return 0.0;

  double width = 1.0 / (g - 1);
  for (int round = 0; round < 10; ++round) {
    const int s = 5;
    std::fill(idx.begin(), idx.end(), 0);
    std::vector<double> center = best_u;
    while (true) {
      for (int k = 0; k < dim; ++k) {
        const double off = width * (static_cast<double>(idx[k]) / (s - 1) * 2.0 - 1.0);
        u[k] = std::clamp(center[k] + off, 0.0, 1.0);
      }
      const auto theta = grid_theta(cls, best_domain, u);
      const double ll = best_shape->log_likelihood(theta);
      if (std::isfinite(ll) && ll > best) {
        best = ll;
        best_u = u;
      }
      int k = 0;
      while (k < dim && ++idx[k] == s) idx[k++] = 0;
      if (k == dim) break;
    }
    width *= 0.4;
  }
  return best;
}

}  // namespace

std::shared_ptr<const TargetShape> make_phylo_target(const SitePatternData& data, TreeClass cls,
                                                     const SubstModel& model, double branch_lo,
                                                     double branch_hi) {
  data.validate();
  validate_model(model);
  const std::size_t want_taxa = cls == TreeClass::unrooted_quartet ? 4 : 3;
  if (data.taxa.size() != want_taxa)
    throw DomainError("taxa count does not match the requested tree class");
  if (!(branch_lo > 0.0 && branch_lo < branch_hi))
    throw DomainError("need 0 < branch_lo < branch_hi");

  const Interval branch(branch_lo, branch_hi);
  std::vector<Interval> sides(param_count(cls), branch);
  if (cls == TreeClass::clocked_triplet_fossil) sides[2] = Interval(0.0, 1.0);
  const Box domain{sides};

  std::vector<std::shared_ptr<PhyloShape>> shapes;
  std::vector<std::string> labels;
  if (cls == TreeClass::unrooted_quartet) {
    for (QuartetTopology topo :
         {QuartetTopology::t12_34, QuartetTopology::t13_24, QuartetTopology::t14_23}) {
      shapes.push_back(std::make_shared<PhyloShape>(model, data, cls, topo, 0.0));
      labels.push_back(topology_name(topo));
    }
  } else {
    shapes.push_back(std::make_shared<PhyloShape>(model, data, cls, QuartetTopology::t12_34, 0.0));
    labels.push_back(tree_class_name(cls));
  }

  double log_offset = 0.0;
  if (!data.patterns.empty()) {
    std::vector<std::pair<const PhyloShape*, Box>> search;
    for (const auto& s : shapes) search.emplace_back(s.get(), domain);
    log_offset = find_log_offset(search, cls);
  }

  auto target = std::make_shared<TargetShape>();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto shape = std::make_shared<PhyloShape>(
        model, data, cls,
        cls == TreeClass::unrooted_quartet ? *topology_from_name(labels[i])
                                           : QuartetTopology::t12_34,
        log_offset);
    target->pieces.push_back(TargetPiece{labels[i], domain, shape, 1.0});
  }
  return target;
}

std::optional<DivergenceResult> divergence_ratio(TreeClass cls, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != param_count(cls))
    throw DomainError("sample dimension does not match tree class");
  DivergenceResult r;
  switch (cls) {
    case TreeClass::clocked_triplet:
    case TreeClass::clocked_triplet_fossil: {
      const double tau1 = theta[0];
      const double tau0 = theta[0] + theta[1];
      if (!(tau0 > 0.0)) return std::nullopt;
      r.ratio = tau1 / tau0;
      if (cls == TreeClass::clocked_triplet_fossil)
        r.fossil_date = (1.0 - theta[2]) * tau1 / tau0;
      return r;
    }
    case TreeClass::unrooted_triplet: {
      // Paths through the internal node, listed with the outgroup-containing
      // paths first so a tied maximum roots on the outgroup edge.
      const double t0 = theta[0], t1 = theta[1], t2 = theta[2];
      struct Path {
        double length;
        double first_leg;
      };
      const Path paths[3] = {{t0 + t2, t0}, {t1 + t2, t1}, {t0 + t1, t0}};
      const Path* longest = &paths[0];
      for (const Path& p : paths)
        if (p.length > longest->length) longest = &p;
      const double tau0 = longest->length / 2.0;
      if (!(tau0 > 0.0)) return std::nullopt;
      const double d = std::abs(longest->first_leg - tau0);
      r.ratio = (tau0 - d) / tau0;
      return r;
    }
    case TreeClass::unrooted_quartet:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace mrs::phylo
