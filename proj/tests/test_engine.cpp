#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "mrs/demo.hpp"
#include "mrs/engine.hpp"
#include "test_util.hpp"

using namespace mrs;

namespace {

std::shared_ptr<const TargetShape> expr_target(const std::string& text, Box domain,
                                               const std::string& label = "t") {
  auto t = std::make_shared<TargetShape>();
  t->pieces.push_back(
      TargetPiece{label, std::move(domain), std::make_shared<ExprShape>(ExprDag::parse(text)), 1.0});
  return t;
}

}  // namespace

TEST_CASE("rng uniforms are deterministic and in [0,1)") {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    double u = a.uniform01();
    CHECK(u == b.uniform01());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(a.draws() == 1000);
}

TEST_CASE("alias table draw frequencies match weights") {
  const std::vector<double> weights = {1.0, 3.0, 0.5, 5.5};
  auto table = AliasTable::build(weights);
  Rng rng(11);
  std::map<std::size_t, int> counts;
  const int n = 400000;
  for (int i = 0; i < n; ++i) ++counts[table.draw(rng)];
  const double total = 10.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double expect = weights[i] / total;
    const double got = static_cast<double>(counts[i]) / n;
    CHECK(std::abs(got - expect) < 4.0 * std::sqrt(expect * (1 - expect) / n));
  }
}

TEST_CASE("alias table rejects degenerate weights") {
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{}), DegenerateProposal);
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{0.0, 0.0}), DegenerateProposal);
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{-1.0, 2.0}), DomainError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(AliasTable::build(std::vector<double>{1.0, inf}), DegenerateProposal);
}

TEST_CASE("partition refinement tightens bounds on the demo target") {
  auto target = make_demo_target("fig2");
  Partition p(target);
  CHECK(p.size() == 1);
  double prev_upper = p.sum_upper_mass();
  double prev_accept = p.acceptance_lower_bound();
  Interval prev_np = p.np_enclosure();
  for (int i = 0; i < 2000; ++i) {
    REQUIRE(p.refine_step());
    double upper = p.sum_upper_mass();
    CHECK(upper <= prev_upper);
    prev_upper = upper;
    Interval np = p.np_enclosure();
    CHECK(prev_np.contains(np));
    prev_np = np;
  }
  CHECK(p.acceptance_lower_bound() > prev_accept);
  CHECK(p.acceptance_lower_bound() > 0.9);
}

TEST_CASE("np enclosure brackets a quadrature estimate") {
  auto target = expr_target("exp(-(x0^2)/2)", Box({Interval(-5.0, 5.0)}));
  Partition p(target);
  p.refine_to_boxes(4000);
  Interval np = p.np_enclosure();
  const double truth = std::sqrt(2.0 * M_PI) *
                       (testutil::norm_cdf(5.0) - testutil::norm_cdf(-5.0));
  CHECK(np.lo <= truth);
  CHECK(np.hi >= truth);
  CHECK(np.hi - np.lo < 0.01);
}

TEST_CASE("uniform partitions have the requested size") {
  auto target = make_demo_target("fig2");
  Partition p = build_uniform_partition(target, 64);
  CHECK(p.size() == 64);
  // 2-D: k^2 cells
  auto t2 = expr_target("exp(-(x0^2)/2 - (x1^2)/2)", Box({Interval(-3.0, 3.0), Interval(-3.0, 3.0)}));
  Partition q = build_uniform_partition(t2, 8);
  CHECK(q.size() == 64);
}

TEST_CASE("refine_to_accept_bound reaches the requested bound") {
  auto target = make_demo_target("fig2");
  Partition p(target);
  p.refine_to_accept_bound(0.95, 100000);
  CHECK(p.acceptance_lower_bound() >= 0.95);
}

TEST_CASE("envelope dominates the shape at random points") {
  auto target = make_demo_target("fig2");
  Partition p(target);
  p.refine_to_boxes(500);
  const auto& shape = *target->pieces[0].shape;
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    double x = -10.0 + 16.0 * rng.uniform01();
    double pt[1] = {x};
    CHECK(p.envelope_at("fig2", pt) >= shape.eval_real(pt));
  }
  double outside[1] = {7.0};
  CHECK_THROWS_AS(p.envelope_at("fig2", outside), OutOfDomain);
}

TEST_CASE("unresolvable domains raise EnclosureFailure") {
  // log has no extension on any box touching zero, no matter how small.
  auto target = expr_target("log(x0)", Box({Interval(-1.0, 1.0)}));
  CHECK_THROWS_AS(Partition{target}, EnclosureFailure);
}

TEST_CASE("rejection sampling is deterministic under a fixed seed") {
  auto target = make_demo_target("fig2");
  Partition p(target);
  p.refine_to_boxes(800);
  SamplerConfig cfg;
  cfg.n_samples = 200;
  cfg.seed = 31;
  auto a = rejection_sample(p, cfg);
  auto b = rejection_sample(p, cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].theta == b.samples[i].theta);
    CHECK(a.samples[i].trials == b.samples[i].trials);
  }
  CHECK(a.report.rng_draws == b.report.rng_draws);
}

TEST_CASE("report totals are consistent") {
  auto target = make_demo_target("fig2");
  Partition p(target);
  p.refine_to_boxes(800);
  SamplerConfig cfg;
  cfg.n_samples = 500;
  cfg.seed = 8;
  auto run = rejection_sample(p, cfg);
  REQUIRE(run.samples.size() == 500);
  CHECK(!run.report.trials_exhausted);
  CHECK(run.report.total_trials >= 500);
  CHECK(run.report.accept_rate ==
        doctest::Approx(500.0 / static_cast<double>(run.report.total_trials)));
  CHECK(run.report.accept_rate >= run.report.accept_lower_bound - 0.05);
  CHECK(run.report.pieces == p.size());
}

TEST_CASE("trials exhaustion is flagged, not fatal") {
  auto target = make_demo_target("fig2");
  Partition p(target);  // single box: acceptance is poor but nonzero
  SamplerConfig cfg;
  cfg.n_samples = 50;
  cfg.seed = 1;
  cfg.trials_max = 1;  // nearly impossible per-sample budget
  auto run = rejection_sample(p, cfg);
  CHECK(run.report.trials_exhausted);
  CHECK(run.samples.size() < 50);
}

TEST_CASE("sampled distribution matches the target (quick KS)") {
  auto target = expr_target("exp(-(x0^2)/2)", Box({Interval(-5.0, 5.0)}));
  Partition p(target);
  p.refine_to_accept_bound(0.9, 100000);
  SamplerConfig cfg;
  cfg.n_samples = 20000;
  cfg.seed = 77;
  auto run = rejection_sample(p, cfg);
  REQUIRE(run.samples.size() == cfg.n_samples);
  std::vector<double> xs;
  for (const auto& s : run.samples) xs.push_back(s.theta[0]);
  const double d = testutil::ks_statistic(
      xs, [](double x) { return testutil::truncnorm_cdf(x, -5.0, 5.0); });
  CHECK(testutil::ks_pvalue(xs.size(), d) > 0.001);
}

TEST_CASE("multi-piece targets use the label weights") {
  // Two constant pieces with weights 1 and 3 over unit boxes: piece 2 must
  // receive about 3/4 of the samples.
  auto t = std::make_shared<TargetShape>();
  t->pieces.push_back(TargetPiece{"a", Box({Interval(0.0, 1.0)}),
                                  std::make_shared<ExprShape>(ExprDag::parse("1", 1)), 1.0});
  t->pieces.push_back(TargetPiece{"b", Box({Interval(0.0, 1.0)}),
                                  std::make_shared<ExprShape>(ExprDag::parse("1", 1)), 3.0});
  Partition p(t);
  p.refine_to_boxes(64);
  SamplerConfig cfg;
  cfg.n_samples = 20000;
  cfg.seed = 13;
  auto run = rejection_sample(p, cfg);
  int from_b = 0;
  for (const auto& s : run.samples) from_b += s.target_index == 1 ? 1 : 0;
  const double frac = static_cast<double>(from_b) / static_cast<double>(run.samples.size());
  CHECK(std::abs(frac - 0.75) < 0.02);
}
