#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "netconform/experiments.hpp"

using namespace netconform;

namespace {

ExperimentConfig small_config(Scenario s) {
  ExperimentConfig cfg;
  cfg.scenario = s;
  cfg.n = 60;
  cfg.replicates = 6;
  cfg.seed = 77;
  cfg.sparsity_exponents = {0.1};
  cfg.population = 100;
  return cfg;
}

void expect_same_reports(const ExperimentResult& a, const ExperimentResult& b) {
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(a.reports[i].method, b.reports[i].method);
    EXPECT_EQ(a.reports[i].cell, b.reports[i].cell);
    EXPECT_EQ(a.reports[i].hits, b.reports[i].hits);
    EXPECT_EQ(a.reports[i].mean_width, b.reports[i].mean_width);
  }
}

}  // namespace

TEST(RandomSplit, DisjointSortedAndSized) {
  RngStream rng(5, 0);
  const auto s = random_split(20, 8, 7, 3, rng);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.calibration.size(), 7u);
  EXPECT_EQ(s.test.size(), 3u);
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.calibration.begin(), s.calibration.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 18u);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  RngStream again(5, 0);
  EXPECT_EQ(random_split(20, 8, 7, 3, again).calibration, s.calibration);
  EXPECT_THROW(random_split(5, 3, 3, 0, rng), Error);
}

TEST(ExperimentConfig, ComparatorLevelDefaults) {
  ExperimentConfig cfg;
  cfg.alpha = 0.2;
  EXPECT_DOUBLE_EQ(cfg.comparator_alpha(), 0.2);
  cfg.scenario = Scenario::sar;
  EXPECT_DOUBLE_EQ(cfg.comparator_alpha(), 0.05);
  cfg.parametric_alpha = 0.1;
  EXPECT_DOUBLE_EQ(cfg.comparator_alpha(), 0.1);
  cfg.parametric_alpha = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig cfg;
  cfg.replicates = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.sar_models = {4};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.sparsity_exponents = {};
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(scenario_from_name("nope"), Error);
  EXPECT_EQ(scenario_from_name("sar"), Scenario::sar);
}

TEST(Summarize, InfiniteWidthsPropagate) {
  const std::vector<TestOutcome> outcomes{{true, 2.0, 0.0}, {false, infinity, 0.0}};
  const auto rep = summarize("m", "c", outcomes, 2);
  EXPECT_EQ(rep.hits, 1);
  EXPECT_EQ(rep.infinite_widths, 1);
  EXPECT_TRUE(std::isinf(rep.mean_width));
  EXPECT_LE(rep.coverage_ci.lower, 0.5);
  EXPECT_GE(rep.coverage_ci.upper, 0.5);
}

TEST(RdpgExperiment, ReportsAndThreadIndependence) {
  auto cfg = small_config(Scenario::rdpg_linear);
  cfg.sparsity_exponents = {0.1, 0.75};
  const auto single = run_experiment(cfg);
  ASSERT_EQ(single.reports.size(), 4u);
  EXPECT_EQ(single.reports[0].method, "conformal");
  EXPECT_EQ(single.reports[1].method, "parametric_normal");
  EXPECT_EQ(single.reports[2].cell, "nu=n^-0.75");
  for (const auto& r : single.reports) EXPECT_EQ(r.total, r.replicates);
  cfg.threads = 2;
  expect_same_reports(single, run_experiment(cfg));
}

TEST(RdpgExperiment, ConformalCoverageNearNominal) {
  auto cfg = small_config(Scenario::rdpg_linear);
  cfg.n = 80;
  cfg.replicates = 150;
  cfg.test_per_replicate = 4;
  const auto res = run_experiment(cfg);
  const auto& conf = res.reports[0];
  ASSERT_GT(conf.total, 400);
  const double se = std::sqrt(0.09 / conf.total);
  EXPECT_GE(conf.coverage, 0.9 - 3 * se);
  EXPECT_LE(conf.coverage, 0.9 + 1.0 / 41 + 3 * se);
}

TEST(SarExperiment, OneReportPairPerModel) {
  auto cfg = small_config(Scenario::sar);
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.reports.size(), 6u);
  EXPECT_EQ(res.reports[0].cell, "model=1;nu=n^-0.1");
  EXPECT_EQ(res.reports[5].cell, "model=3;nu=n^-0.1");
  EXPECT_EQ(res.reports[5].method, "parametric_normal");
  cfg.threads = 3;
  expect_same_reports(res, run_experiment(cfg));
}

TEST(HeteroscedasticExperiment, RecordsAndCurves) {
  auto cfg = small_config(Scenario::heteroscedastic);
  cfg.replicates = 4;
  cfg.test_per_replicate = 5;
  cfg.curve_points = 11;
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.reports.size(), 3u);
  EXPECT_EQ(res.records.size(), 3u * 4u * 5u);
  EXPECT_EQ(res.curves.size(), 3u * 11u);
  for (const auto& c : res.curves)
    if (c.defined) {
      EXPECT_GE(c.coverage_smooth, 0.0);
      EXPECT_LE(c.coverage_smooth, 1.0);
    }
}

TEST(ClassificationExperiment, SetsAreNonEmpty) {
  auto cfg = small_config(Scenario::synthetic_classification);
  cfg.n = 80;
  cfg.test_per_replicate = 5;
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.reports.size(), 3u);
  for (const auto& r : res.reports) {
    EXPECT_GE(r.mean_width, 1.0);
    EXPECT_LE(r.mean_width, 2.0);
  }
}

TEST(ExperimentSeeds, DifferentSeedsDiffer) {
  auto cfg = small_config(Scenario::rdpg_linear);
  const auto a = run_experiment(cfg);
  cfg.seed = 78;
  const auto b = run_experiment(cfg);
  EXPECT_NE(a.reports[0].mean_width, b.reports[0].mean_width);
}
