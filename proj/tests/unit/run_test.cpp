#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dynns/analysis.hpp"
#include "dynns/run.hpp"
#include "test_support.hpp"

using namespace dynns;
using fixtures::chains_run;

TEST(LiveCounts, HandBuiltChains) {
  // Two prior threads; the first continues past the second's death.
  const auto run = chains_run({{1.0, 3.0}, {2.0}});
  EXPECT_EQ(live_point_counts(run), (std::vector<int>{2, 2, 1}));
  const auto lx = log_prior_volumes(run);
  ASSERT_EQ(lx.size(), 3u);
  EXPECT_DOUBLE_EQ(lx[0], -0.5);
  EXPECT_DOUBLE_EQ(lx[1], -1.0);
  EXPECT_DOUBLE_EQ(lx[2], -2.0);
}

TEST(LiveCounts, EmptyRunGivesEmptyCounts) {
  EXPECT_TRUE(live_point_counts(NestedRun({}, fixtures::gauss10())).empty());
}

TEST(LiveCounts, MatchesBruteForceDefinition) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 7, 4);
  const auto counts = live_point_counts(run);
  for (std::size_t i = 0; i < run.size(); ++i) EXPECT_EQ(counts[i], fixtures::alive_at(run, run[i].log_l)) << i;
}

TEST(LiveCounts, StandardRunWithoutFinalPoints) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 25, 1, false);
  for (int c : live_point_counts(run)) ASSERT_EQ(c, 25);
  EXPECT_EQ(run.open_threads().size(), 25u);
}

TEST(LiveCounts, StandardRunFinalPointsDecrease) {
  const int n = 25;
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), n, 1, true);
  const auto c = live_point_counts(run);
  const std::size_t tail = c.size() - n;
  for (std::size_t i = 0; i < tail; ++i) ASSERT_EQ(c[i], n);
  for (int k = 0; k < n; ++k) EXPECT_EQ(c[tail + k], n - k);
}

TEST(Volumes, ConstantCounts) {
  const auto lx = log_prior_volumes(std::vector<int>(100, 1));
  for (int i = 0; i < 100; ++i) EXPECT_DOUBLE_EQ(lx[i], -(i + 1.0));
  const auto l100 = log_prior_volumes(std::vector<int>(100, 100));
  EXPECT_NEAR(l100[99], -1.0, 1e-13);
}

TEST(Weights, SinglePoint) {
  const auto w = point_log_weights(std::vector<int>{1});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR(std::exp(w[0]), 0.5, 1e-15);
}

TEST(Weights, GeometricVolumes) {
  const auto w = point_log_weights(std::vector<int>{1, 1, 1});
  const double a = std::exp(-1.0);
  EXPECT_NEAR(std::exp(w[1]), 0.5 * a * (1.0 - a * a), 1e-15);
  EXPECT_NEAR(std::exp(w[0]), 0.5 * (1.0 - a * a), 1e-15);
  EXPECT_NEAR(std::exp(w[2]), 0.5 * a * a, 1e-15);
}

TEST(Weights, Telescoping) {
  // With X_0 = 1 and X_{N+1} = 0 the weights sum to (1 + X_1 - X_N) / 2.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> nk(1, 40), len(1, 300);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> counts(len(rng));
    for (int& c : counts) c = nk(rng);
    const auto lx = log_prior_volumes(counts);
    const auto w = point_log_weights(counts);
    double sum = 0.0;
    for (double x : w) sum += std::exp(x);
    const double expected = 0.5 * (1.0 + std::exp(lx.front()) - std::exp(lx.back()));
    ASSERT_NEAR(sum, expected, 1e-12);
    ASSERT_LE(sum, 1.0 + 1e-15);
  }
}

TEST(PosteriorWeights, Simplex) {
  const auto one = chains_run({{-3.0}});
  EXPECT_NEAR(posterior_weights(one)[0], 1.0, 1e-15);

  // n = 1 throughout: ln w_1 = ln(1 - e^-2) - ln 2, ln w_2 = -1 - ln 2.
  const double lw1 = std::log1p(-std::exp(-2.0)) - std::log(2.0);
  const double lw2 = -1.0 - std::log(2.0);
  const auto two = chains_run({{0.0, lw1 - lw2}});
  const auto p = posterior_weights(two);
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);

  const auto big = fixtures::small_standard_run(gaussian_model(3, 10.0), 80, 9);
  ASSERT_GE(big.size(), 1000u);
  double s = 0.0;
  for (double x : posterior_weights(big)) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Combine, CountsAddAcrossRuns) {
  const auto m = gaussian_model(3, 10.0);
  const auto a = fixtures::small_standard_run(m, 100, 1, false);
  const auto b = fixtures::small_standard_run(m, 100, 2, false);
  const auto c = combine_runs({a, b});
  EXPECT_EQ(c.size(), a.size() + b.size());
  const auto counts = live_point_counts(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    ASSERT_EQ(counts[i], fixtures::alive_at(a, c[i].log_l) + fixtures::alive_at(b, c[i].log_l));
    ASSERT_EQ(counts[i], 200);  // open threads keep both runs at 100 to the end
  }
}

TEST(Combine, CountsAddWithFinalPointsAndPartialThreads) {
  const auto m = gaussian_model(3, 10.0);
  const auto a = fixtures::small_standard_run(m, 13, 5);
  const auto b = chains_run({{-20.0, -15.0, -9.0}, {-12.0, -11.5}}, {-25.0, -14.0}, m);
  const auto c = combine_runs({a, b, a});
  const auto counts = live_point_counts(c);
  // The duplicated run ties every likelihood; the first point of a tie sees
  // all threads alive, later ones one fewer each.
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i == 0 || c[i - 1].log_l != c[i].log_l) {
      ASSERT_EQ(counts[i], 2 * fixtures::alive_at(a, c[i].log_l) + fixtures::alive_at(b, c[i].log_l)) << i;
    }
  }
}

TEST(Combine, WithEmptyIsIdentity) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 10, 3);
  const auto c = combine_runs({run, NestedRun({}, run.model())});
  ASSERT_EQ(c.size(), run.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(c[i].log_l, run[i].log_l);
    EXPECT_EQ(c[i].thread_id, run[i].thread_id);
  }
  EXPECT_EQ(live_point_counts(c), live_point_counts(run));
}

TEST(Combine, RejectsModelMismatch) {
  const auto a = fixtures::small_standard_run(gaussian_model(3, 10.0), 5, 1);
  const auto b = fixtures::small_standard_run(gaussian_model(4, 10.0), 5, 1);
  EXPECT_THROW(combine_runs({a, b}), std::invalid_argument);
}

TEST(Combine, SplitRoundTripIsExact) {
  for (bool keep : {true, false}) {
    const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 30, 6, keep);
    const auto threads = split_into_threads(run);
    ASSERT_EQ(threads.size(), 30u);
    std::vector<NestedRun> parts;
    for (const auto& t : threads) {
      EXPECT_EQ(t.start_log_l, kNegInf);
      parts.push_back(run_from_threads({t}, run.model()));
    }
    const auto back = combine_runs(parts);
    EXPECT_EQ(live_point_counts(back), live_point_counts(run));
    EXPECT_EQ(point_log_weights(back), point_log_weights(run));
    const auto rebuilt = run_from_threads(threads, run.model());
    EXPECT_EQ(live_point_counts(rebuilt), live_point_counts(run));
  }
}

TEST(Combine, OrderDoesNotChangeEstimates) {
  const auto m = gaussian_model(3, 10.0);
  const auto a = fixtures::small_standard_run(m, 11, 1);
  const auto b = fixtures::small_standard_run(m, 17, 2);
  const auto c = fixtures::small_standard_run(m, 5, 3);
  const auto ids = default_estimators();
  const auto e1 = estimate_all(combine_runs({a, b, c}), ids);
  const auto e2 = estimate_all(combine_runs({c, a, b}), ids);
  const auto e3 = estimate_all(combine_runs({combine_runs({b, c}), a}), ids);
  EXPECT_EQ(e1, e2);
  EXPECT_EQ(e1, e3);
}

TEST(Threads, PartialThreadsStartMidRun) {
  const auto run = chains_run({{1.0, 2.0, 5.0}, {3.0, 4.0}}, {kNegInf, 2.5});
  const auto threads = split_into_threads(run);
  ASSERT_EQ(threads.size(), 2u);
  EXPECT_EQ(threads[1].start_log_l, 2.5);
  EXPECT_EQ(threads[1].points.size(), 2u);
  EXPECT_EQ(live_point_counts(run), (std::vector<int>{1, 1, 2, 2, 1}));
}

TEST(RunInvariants, RejectsInvalidPoints) {
  EXPECT_THROW(chains_run({{1.0, 1.0}}), std::invalid_argument);  // no strict increase
  EXPECT_THROW(chains_run({{1.0}}, {2.0}), std::invalid_argument);  // below its birth
  SamplePoint p;
  p.log_l = 0.0;
  p.radius = 1.0;
  p.theta1 = 1.5;
  EXPECT_THROW(NestedRun({p}, fixtures::gauss10()), std::invalid_argument);
  // Broken chain: second point's birth is not the first point's likelihood.
  SamplePoint a, b;
  a.log_l = 1.0;
  b.log_l = 2.0;
  b.birth_log_l = 0.5;
  EXPECT_THROW(NestedRun({a, b}, fixtures::gauss10()), std::invalid_argument);
}

TEST(Volumes, ExpectedVolumeMatchesTruth) {
  // Standardised residual of E[ln X] against the generator's volume.
  const auto m = gaussian_model(3, 10.0);
  std::vector<double> z;
  for (int r = 0; r < 100; ++r) {
    const auto run = fixtures::small_standard_run(m, 50, 1000 + r, false);
    const auto counts = live_point_counts(run);
    const auto lx = log_prior_volumes(counts);
    for (std::size_t i : {run.size() / 4, run.size() / 2, run.size() - 1}) {
      double var = 0.0;
      for (std::size_t k = 0; k <= i; ++k) var += 1.0 / (double(counts[k]) * counts[k]);
      z.push_back((lx[i] - run[i].true_log_x) / std::sqrt(var));
    }
  }
  EXPECT_NEAR(fixtures::mean_of(z), 0.0, 5.0 * fixtures::std_error_of(z));
}
