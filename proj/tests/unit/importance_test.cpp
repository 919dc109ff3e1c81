#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dynns/importance.hpp"
#include "dynns/savitzky_golay.hpp"
#include "test_support.hpp"

using namespace dynns;

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST(EvidenceImportance, HandCases) {
  EXPECT_EQ(importance_evidence(std::vector<double>{-2.0}, std::vector<int>{1}), std::vector<double>{1.0});
  const auto two = importance_evidence(std::vector<double>{-1.0, -1.0}, std::vector<int>{5, 5});
  EXPECT_NEAR(two[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two[1], 1.0 / 3.0, 1e-15);
  EXPECT_THROW(importance_evidence(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
}

TEST(EvidenceImportance, InvariantToScalingCounts) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 20, 1);
  const auto lm = log_posterior_masses(run);
  auto counts = live_point_counts(run);
  const auto a = importance_evidence(lm, counts);
  for (int& c : counts) c *= 2;
  const auto b = importance_evidence(lm, counts);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-14);
}

TEST(EvidenceImportance, MatchesTailSumDefinition) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 9, 3);
  const auto lm = log_posterior_masses(run);
  const auto counts = live_point_counts(run);
  std::vector<double> brute(run.size());
  for (std::size_t i = 0; i < run.size(); ++i) {
    double tail = 0.0;
    for (std::size_t k = i; k < run.size(); ++k) tail += std::exp(lm[k]);
    brute[i] = tail / counts[i];
  }
  const double s = sum(brute);
  const auto imp = importance_evidence(run);
  for (std::size_t i = 0; i < run.size(); ++i) ASSERT_NEAR(imp[i], brute[i] / s, 1e-12);
}

TEST(ExactEvidenceImportance, HandCases) {
  EXPECT_NEAR(importance_evidence_exact(std::vector<double>{-4.0}, std::vector<int>{1})[0], 1.0, 1e-15);
  // n_i = 1 and equal masses m: Z_{>i} = (2m, m, 0).
  const auto imp = importance_evidence_exact(std::vector<double>{0.0, 0.0, 0.0}, std::vector<int>{1, 1, 1});
  const double c = std::pow(3.0, 1.5);
  const std::vector<double> raw{2.0 / c * 2.0 + 1.0 / c, 2.0 / c * 1.0 + 1.0 / c, 1.0 / c};
  const double s = sum(raw);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(imp[i], raw[i] / s, 1e-12);
}

TEST(ExactEvidenceImportance, ApproachesStandardForLargeCounts) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 100, 4, false);
  const auto a = importance_evidence(run);
  const auto b = importance_evidence_exact(run);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > 1e-6 * a[0]) {
      ASSERT_NEAR(b[i] / a[i], 1.0, 0.05) << i;
    }
}

TEST(ExactEvidenceImportance, ArgmaxUsuallyAgrees) {
  // Runs with n_i >= 20 that vary: a constant-20 run plus threads spanning
  // random contour ranges. Early tail sums are equal to double precision, so
  // an index counts as a maximiser when within rounding of the maximum.
  const auto m = gaussian_model(3, 10.0);
  std::mt19937_64 pick(9);
  auto is_argmax = [](const std::vector<double>& v, std::size_t i) {
    const double top = *std::max_element(v.begin(), v.end());
    return v[i] >= top * (1.0 - 1e-12);
  };
  int agree = 0;
  for (int r = 0; r < 200; ++r) {
    const auto base = fixtures::small_standard_run(m, 20, 300 + r, false);
    Rng rng = make_rng(700 + r);
    std::vector<Thread> extra;
    std::uniform_int_distribution<std::size_t> at(0, base.size() - 2);
    for (int k = 0; k < 15; ++k) {
      std::size_t a = at(pick), b = at(pick);
      if (a > b) std::swap(a, b);
      if (a == b) ++b;
      extra.push_back(sample_thread(m, base[a].log_l, base[a].true_log_x, base[b].log_l, rng, k));
    }
    const auto run = combine_runs({base, run_from_threads(extra, m)});
    const auto a = importance_evidence(run);
    const auto b = importance_evidence_exact(run);
    const auto ia = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
    const auto ib = static_cast<std::size_t>(std::max_element(b.begin(), b.end()) - b.begin());
    agree += is_argmax(b, ia) || is_argmax(a, ib);
  }
  EXPECT_GE(agree, 190);
}

TEST(ParamImportance, EqualsPosteriorWeights) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 80, 5);
  ASSERT_GE(run.size(), 1000u);
  const auto a = importance_param(run);
  const auto p = posterior_weights(run);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], p[i], 1e-14);
  EXPECT_NEAR(sum(a), 1.0, 1e-12);
}

TEST(ParamImportance, UniformLikelihoodFollowsWeights) {
  const std::vector<int> counts{3, 3, 2, 1};
  const auto lw = point_log_weights(counts);
  const auto imp = importance_param(lw);
  double s = 0.0;
  for (double x : lw) s += std::exp(x);
  for (std::size_t i = 0; i < lw.size(); ++i) EXPECT_NEAR(imp[i], std::exp(lw[i]) / s, 1e-15);
}

TEST(TunedImportance, Cases) {
  const std::vector<double> lm{-1.0, -1.0};
  EXPECT_THROW(importance_tuned(lm, {0.3, 0.3}, 0.3), std::domain_error);
  const auto sym = importance_tuned(lm, {-0.7, 0.7}, 0.0);
  EXPECT_NEAR(sym[0], 0.5, 1e-15);
  EXPECT_NEAR(sym[1], 0.5, 1e-15);
  EXPECT_THROW(importance_tuned(lm, {1.0}, 0.0), std::invalid_argument);
}

TEST(TunedImportance, DegenerateFallsBackToParam) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 10, 6);
  GoalConfig g{1.0, ImportanceVariant::Tuned, TunedTarget::Theta1};
  const std::vector<double> flat(run.size(), 2.0);
  const auto prof = combined_importance(log_posterior_masses(run), live_point_counts(run), flat, g);
  const auto p = importance_param(run);
  for (std::size_t i = 0; i < p.size(); ++i) ASSERT_NEAR(prof.combined[i], p[i], 1e-15);
}

TEST(CombinedImportance, Interpolates) {
  const auto run = fixtures::small_standard_run(gaussian_model(3, 10.0), 15, 7);
  const auto z = importance_evidence(run);
  const auto p = importance_param(run);
  const auto g0 = combined_importance(run, {0.0}).combined;
  const auto g1 = combined_importance(run, {1.0}).combined;
  const auto gq = combined_importance(run, {0.25}).combined;
  for (std::size_t i = 0; i < run.size(); ++i) {
    ASSERT_EQ(g0[i], z[i]);
    ASSERT_EQ(g1[i], p[i]);
    ASSERT_NEAR(gq[i], 0.75 * z[i] + 0.25 * p[i], 1e-16);
    ASSERT_GE(gq[i], 0.0);
  }
  EXPECT_NEAR(sum(gq), 1.0, 1e-12);
  EXPECT_THROW(combined_importance(run, {1.5}), std::invalid_argument);
}

TEST(SavitzkyGolay, ReproducesCubics) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  for (int window : {5, 7, 21, 41}) {
    const double a = c(rng), b = c(rng), q = c(rng), d = c(rng);
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) {
      const double x = 0.1 * i;
      v[i] = a + b * x + q * x * x + d * x * x * x;
    }
    const auto s = savitzky_golay_smooth(v, window, 3);
    for (int i = 0; i < 100; ++i) ASSERT_NEAR(s[i], v[i], 1e-10 * std::max(1.0, std::fabs(v[i]))) << window << " " << i;
  }
}

TEST(SavitzkyGolay, ConstantUnchanged) {
  const std::vector<double> v(30, 4.25);
  for (double x : savitzky_golay_smooth(v, 11, 3)) EXPECT_NEAR(x, 4.25, 1e-13);
}

TEST(SavitzkyGolay, LinearFitOfStepIsLocalMean) {
  const std::vector<double> v{0, 0, 0, 0, 1, 1, 1, 1};
  const auto s = savitzky_golay_smooth(v, 5, 1);
  // Window centred at index 3 holds {0,0,0,1,1}; the fitted line at the
  // centre equals the mean 0.4 because the abscissae are symmetric.
  EXPECT_NEAR(s[3], 0.4, 1e-14);
  EXPECT_NEAR(s[4], 0.6, 1e-14);
}

TEST(SavitzkyGolay, ShortInputPassesThroughAndBadArgsThrow) {
  const std::vector<double> v{1.0, 5.0, 2.0};
  EXPECT_EQ(savitzky_golay_smooth(v, 5, 3), v);
  EXPECT_THROW(savitzky_golay_smooth(v, 4, 3), std::invalid_argument);
  EXPECT_THROW(savitzky_golay_smooth(v, 3, 3), std::invalid_argument);
  EXPECT_THROW(savitzky_golay_smooth(v, 3, -1), std::invalid_argument);
}
