// mrs command-line front end: pattern-file generation, posterior sampling,
// quantile post-processing and the built-in 1-D demo study.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrs/demo.hpp"
#include "mrs/engine.hpp"
#include "mrs/phylo.hpp"

namespace {

using nlohmann::json;

// Exit codes: 0 success, 1 runtime/data error, 2 usage error (CLI11),
// 3 trials budget exhausted, 4 unresolvable enclosure.
constexpr int kExitError = 1;
constexpr int kExitTrialsExhausted = 3;
constexpr int kExitEnclosureFailure = 4;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::array<double, 4> empirical_freqs(const mrs::phylo::SitePatternData& d) {
  std::array<double, 4> n = {0, 0, 0, 0};
  for (const auto& p : d.patterns)
    for (auto s : p.column) n[s] += static_cast<double>(p.count);
  const double total = n[0] + n[1] + n[2] + n[3];
  if (total <= 0) throw mrs::DomainError("cannot estimate frequencies from empty data");
  for (auto& x : n) x /= total;
  return n;
}

struct SampleOptions {
  std::string model = "jc";
  std::string freqs;  // "t,c,a,g"; empty = empirical for hky
  double kappa = 2.0;
  double tstv = 0.0;  // 0 = unset; overrides kappa when given
  std::string tree = "unrooted-triplet";
  std::string data_path;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double domain_lo = 1e-10;
  double domain_hi = 10.0;
  std::size_t boxes = 0;
  double target_accept = 0.0;
  std::size_t max_boxes = 2000000;
  std::uint64_t trials_max = 1000000;
  std::string rigor = "outward";
  std::string out_csv;
  std::string out_report;
};

mrs::RoundingMode rigor_mode(const std::string& name) {
  if (name == "outward") return mrs::RoundingMode::outward;
  if (name == "fast") return mrs::RoundingMode::fast;
  throw mrs::DomainError("unknown rigor mode: " + name);
}

void write_samples_csv(std::ostream& out, const mrs::TargetShape& target,
                       const std::vector<mrs::SampleRecord>& samples, int dim) {
  out << "topology";
  for (int k = 1; k <= dim; ++k) out << ",theta" << k;
  out << ",trials\n";
  for (const auto& s : samples) {
    out << target.pieces[static_cast<std::size_t>(s.target_index)].label;
    for (double v : s.theta) out << "," << fmt(v);
    out << "," << s.trials << "\n";
  }
}

json report_json(const mrs::RunReport& r, std::size_t samples_written, double wall_s,
                 const json& config) {
  return json{{"np_enclosure", {{"lo", r.np_enclosure.lo}, {"hi", r.np_enclosure.hi}}},
              {"envelope_integral", r.envelope_integral},
              {"pieces", r.pieces},
              {"accept_rate", r.accept_rate},
              {"accept_lower_bound", r.accept_lower_bound},
              {"seed", r.seed},
              {"rng", "mt19937_64"},
              {"rng_draws", r.rng_draws},
              {"total_trials", r.total_trials},
              {"total_indeterminate", r.total_indeterminate},
              {"trials_exhausted", r.trials_exhausted},
              {"samples_written", samples_written},
              {"wall_time_s", wall_s},
              {"config", config}};
}

int run_patterns(const std::string& fasta_path, const std::string& out_path) {
  std::ifstream in(fasta_path);
  if (!in) throw mrs::DomainError("cannot open FASTA file: " + fasta_path);
  auto [names, seqs] = mrs::phylo::read_fasta(in);
  auto data = mrs::phylo::patterns_from_alignment(names, seqs);
  if (out_path.empty()) {
    mrs::phylo::write_patterns(std::cout, data);
  } else {
    std::ofstream out(out_path);
    if (!out) throw mrs::DomainError("cannot write pattern file: " + out_path);
    mrs::phylo::write_patterns(out, data);
  }
  return 0;
}

int run_sample(const SampleOptions& opt) {
  const auto t_start = std::chrono::steady_clock::now();

  auto cls = mrs::phylo::tree_class_from_name(opt.tree);
  if (!cls) throw mrs::DomainError("unknown tree class: " + opt.tree);
  auto data = mrs::phylo::read_patterns_file(opt.data_path);

  mrs::phylo::SubstModel model;
  if (opt.model == "jc") {
    model = mrs::phylo::SubstModel::jc();
  } else if (opt.model == "hky") {
    std::array<double, 4> freqs;
    if (!opt.freqs.empty()) {
      auto v = parse_doubles(opt.freqs);
      if (v.size() != 4) throw mrs::DomainError("--freqs needs 4 comma-separated values (t,c,a,g)");
      std::copy(v.begin(), v.end(), freqs.begin());
    } else {
      freqs = empirical_freqs(data);
    }
    double kappa = opt.kappa;
    if (opt.tstv > 0.0) kappa = mrs::phylo::SubstModel::kappa_from_tstv(opt.tstv, freqs);
    model = mrs::phylo::SubstModel::hky(freqs, kappa);
  } else {
    throw mrs::DomainError("unknown model: " + opt.model);
  }

  const auto mode = rigor_mode(opt.rigor);
  auto target =
      mrs::phylo::make_phylo_target(data, *cls, model, opt.domain_lo, opt.domain_hi);
  mrs::Partition partition(target, mode);
  if (opt.boxes > 0) {
    partition.refine_to_boxes(opt.boxes);
  } else {
    const double bound = opt.target_accept > 0.0 ? opt.target_accept : 0.1;
    partition.refine_to_accept_bound(bound, opt.max_boxes);
  }
  // Saturated pieces cannot be sampled from; spend extra splits to clear them.
  while (partition.unresolved_count() > 0 && partition.size() < opt.max_boxes)
    if (!partition.refine_step()) break;

  mrs::SamplerConfig cfg;
  cfg.n_samples = opt.samples;
  cfg.seed = opt.seed;
  cfg.trials_max = opt.trials_max;
  auto run = mrs::rejection_sample(partition, cfg);

  const int dim = mrs::phylo::param_count(*cls);
  if (opt.out_csv.empty()) {
    write_samples_csv(std::cout, *target, run.samples, dim);
  } else {
    std::ofstream out(opt.out_csv);
    if (!out) throw mrs::DomainError("cannot write samples file: " + opt.out_csv);
    write_samples_csv(out, *target, run.samples, dim);
  }

  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  json config{{"model", opt.model},
              {"freqs", {model.freqs[0], model.freqs[1], model.freqs[2], model.freqs[3]}},
              {"kappa", model.kappa},
              {"tree", opt.tree},
              {"data", opt.data_path},
              {"samples", opt.samples},
              {"seed", opt.seed},
              {"domain_lo", opt.domain_lo},
              {"domain_hi", opt.domain_hi},
              {"boxes", opt.boxes},
              {"target_accept", opt.target_accept},
              {"trials_max", opt.trials_max},
              {"rigor", opt.rigor}};
  json rep = report_json(run.report, run.samples.size(), wall_s, config);
  if (!opt.out_report.empty()) {
    std::ofstream out(opt.out_report);
    if (!out) throw mrs::DomainError("cannot write report file: " + opt.out_report);
    out << rep.dump(2) << "\n";
  } else {
    std::cerr << rep.dump(2) << "\n";
  }
  return run.report.trials_exhausted ? kExitTrialsExhausted : 0;
}

struct SamplesCsv {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> thetas;
};

SamplesCsv read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mrs::DomainError("cannot open samples file: " + path);
  SamplesCsv out;
  std::string line;
  if (!std::getline(in, line)) throw mrs::DomainError("empty samples file");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3) throw mrs::DomainError("malformed samples row: " + line);
    out.labels.push_back(cells.front());
    std::vector<double> theta;
    for (std::size_t i = 1; i + 1 < cells.size(); ++i) theta.push_back(std::stod(cells[i]));
    out.thetas.push_back(std::move(theta));
  }
  if (out.thetas.empty()) throw mrs::DomainError("samples file has no rows");
  return out;
}

// Type-7 empirical quantile (linear interpolation of order statistics).
double quantile7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

int run_quantiles(const std::string& in_path, const std::string& transform, int column,
                  const std::string& q_list) {
  auto csv = read_samples_csv(in_path);
  std::vector<double> values;
  std::vector<double> fossil_dates;
  std::size_t skipped = 0;
  if (transform == "none") {
    const int dim = static_cast<int>(csv.thetas.front().size());
    if (column < 1 || column > dim) throw mrs::DomainError("--column out of range");
    for (const auto& t : csv.thetas) values.push_back(t[static_cast<std::size_t>(column - 1)]);
  } else if (transform == "divergence-ratio") {
    auto cls = mrs::phylo::tree_class_from_name(csv.labels.front());
    if (!cls) {
      // Unlabeled or topology-labeled rows: infer the class from dimension.
      const std::size_t dim = csv.thetas.front().size();
      if (dim == 2) cls = mrs::phylo::TreeClass::clocked_triplet;
      else if (dim == 3) cls = mrs::phylo::TreeClass::unrooted_triplet;
      else throw mrs::DomainError("divergence-ratio transform needs a triplet samples file");
    }
    for (const auto& t : csv.thetas) {
      auto r = mrs::phylo::divergence_ratio(*cls, t);
      if (!r) {
        ++skipped;
        continue;
      }
      values.push_back(r->ratio);
      if (r->fossil_date) fossil_dates.push_back(*r->fossil_date);
    }
    if (skipped > 0)
      std::cerr << "warning: skipped " << skipped << " degenerate samples (zero root time)\n";
    if (values.empty()) throw mrs::DomainError("no usable samples after transform");
  } else {
    throw mrs::DomainError("unknown transform: " + transform);
  }

  auto qs = parse_doubles(q_list);
  if (qs.empty()) throw mrs::DomainError("empty quantile list");
  json out{{"n", values.size()}, {"transform", transform}, {"skipped", skipped}};
  json qj = json::object();
  for (double q : qs) qj[fmt(q)] = quantile7(values, q);
  out["quantiles"] = qj;
  if (!fossil_dates.empty()) {
    json fj = json::object();
    for (double q : qs) fj[fmt(q)] = quantile7(fossil_dates, q);
    out["fossil_date_quantiles"] = fj;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_demo(const std::string& target_name, const std::string& budgets_list, std::size_t samples,
             std::uint64_t seed, const std::string& out_csv) {
  auto target = mrs::make_demo_target(target_name);
  auto budgets = parse_doubles(budgets_list);
  if (budgets.empty()) throw mrs::DomainError("empty budget list");
  std::printf("%10s %10s %22s %22s\n", "budget", "pieces", "accept_lower_bound", "reject_bound");
  mrs::Partition finest(target);
  for (double b : budgets) {
    const auto budget = static_cast<std::size_t>(b);
    mrs::Partition partition(target);
    partition.refine_to_boxes(budget);
    const double bound = partition.acceptance_lower_bound();
    std::printf("%10zu %10zu %22.15g %22.15g\n", budget, partition.size(), bound, 1.0 - bound);
    if (budget >= static_cast<std::size_t>(budgets.back())) finest = std::move(partition);
  }
  if (samples > 0) {
    mrs::SamplerConfig cfg;
    cfg.n_samples = samples;
    cfg.seed = seed;
    auto run = mrs::rejection_sample(finest, cfg);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_csv.empty()) {
      file.open(out_csv);
      if (!file) throw mrs::DomainError("cannot write samples file: " + out_csv);
      out = &file;
    }
    write_samples_csv(*out, *target, run.samples, 1);
    std::cerr << "accept_rate " << fmt(run.report.accept_rate) << " accept_lower_bound "
              << fmt(run.report.accept_lower_bound) << "\n";
    if (run.report.trials_exhausted) return kExitTrialsExhausted;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moore rejection sampler: exact posterior draws via interval envelopes"};
  app.require_subcommand(1);

  // patterns
  std::string fasta_path, patterns_out;
  auto* patterns = app.add_subcommand("patterns", "Count site patterns in an aligned FASTA file");
  patterns->add_option("--fasta", fasta_path, "aligned FASTA input (3 or 4 sequences)")
      ->required();
  patterns->add_option("--out", patterns_out, "output pattern TSV (default stdout)");

  // sample
  SampleOptions so;
  auto* sample = app.add_subcommand("sample", "Draw exact posterior samples for a tree class");
  sample->add_option("--model", so.model, "substitution model: jc | hky")
      ->check(CLI::IsMember({"jc", "hky"}));
  sample->add_option("--freqs", so.freqs, "HKY base frequencies t,c,a,g (default: empirical)");
  sample->add_option("--kappa", so.kappa, "HKY transition/transversion rate ratio");
  sample->add_option("--tstv", so.tstv, "expected ts/tv ratio; converted to kappa when set");
  sample->add_option("--tree", so.tree,
                     "unrooted-triplet | clocked-triplet | clocked-triplet-fossil | "
                     "unrooted-quartet")
      ->required();
  sample->add_option("--data", so.data_path, "pattern TSV file")->required();
  sample->add_option("--samples", so.samples, "number of independent samples");
  sample->add_option("--seed", so.seed, "RNG seed");
  sample->add_option("--domain-lo", so.domain_lo, "branch-length lower bound");
  sample->add_option("--domain-hi", so.domain_hi, "branch-length upper bound");
  sample->add_option("--boxes", so.boxes, "refine the partition to this many boxes");
  sample->add_option("--target-accept", so.target_accept,
                     "refine until the acceptance lower bound reaches this value");
  sample->add_option("--max-boxes", so.max_boxes, "hard cap on partition size");
  sample->add_option("--trials-max", so.trials_max, "proposal budget per sample");
  sample->add_option("--rigor", so.rigor, "outward | fast")
      ->check(CLI::IsMember({"outward", "fast"}));
  sample->add_option("--out", so.out_csv, "samples CSV path (default stdout)");
  sample->add_option("--report", so.out_report, "JSON run report path (default stderr)");

  // quantiles
  std::string q_in, q_transform = "none", q_list = "0.05,0.5,0.95";
  int q_column = 1;
  auto* quantiles = app.add_subcommand("quantiles", "Empirical quantiles of a samples CSV");
  quantiles->add_option("--in", q_in, "samples CSV from the sample subcommand")->required();
  quantiles->add_option("--transform", q_transform, "none | divergence-ratio")
      ->check(CLI::IsMember({"none", "divergence-ratio"}));
  quantiles->add_option("--column", q_column, "1-based theta column when transform is none");
  quantiles->add_option("--q", q_list, "comma-separated quantile levels");

  // demo
  std::string d_target = "fig2",
              d_budgets = "8,16,32,64,128,256,512,1024,2048,4096";
  std::size_t d_samples = 0;
  std::uint64_t d_seed = 0;
  std::string d_out;
  auto* demo = app.add_subcommand("demo", "Built-in 1-D target: bound table and sampling");
  demo->add_option("--target", d_target, "demo target name");
  demo->add_option("--budgets", d_budgets, "comma-separated partition budgets");
  demo->add_option("--samples", d_samples, "samples to draw from the finest partition");
  demo->add_option("--seed", d_seed, "RNG seed");
  demo->add_option("--out", d_out, "samples CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (patterns->parsed()) return run_patterns(fasta_path, patterns_out);
    if (sample->parsed()) return run_sample(so);
    if (quantiles->parsed()) return run_quantiles(q_in, q_transform, q_column, q_list);
    if (demo->parsed()) return run_demo(d_target, d_budgets, d_samples, d_seed, d_out);
  } catch (const mrs::EnclosureFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnclosureFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
