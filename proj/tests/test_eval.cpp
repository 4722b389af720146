// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mgrr/eval.hpp"

using namespace mgrr;
using namespace mgrr::eval;

namespace {

using Bits = std::vector<std::uint8_t>;

// Counts every (positive, negative) pair.
double auc_pairs(const std::vector<double>& s, const Bits& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

MetricReport report_with(std::vector<double> f1) {
  MetricReport r;
  r.f1 = f1;
  r.accuracy.assign(f1.size(), 0.5);
  r.auc.assign(f1.size(), 0.5);
  double s = 0;
  for (double v : f1) s += v;
  r.avg_f1 = s / static_cast<double>(f1.size());
  return r;
}

}  // namespace

TEST(F1, HandExample) {
  // tp = 3, fp = 1, fn = 2.
  const Bits pred = {1, 1, 1, 1, 0, 0, 0}, truth = {1, 1, 1, 0, 1, 1, 0};
  EXPECT_NEAR(f1_frame(pred, truth), 2.0 / 3.0, 1e-12);
}

TEST(F1, DegenerateCases) {
  EXPECT_EQ(f1_frame(Bits{0, 0}, Bits{0, 0}), 0.0);
  EXPECT_EQ(f1_frame(Bits{1, 1}, Bits{1, 1}), 1.0);
  EXPECT_THROW(f1_frame(Bits{1}, Bits{1, 0}), InputError);
}

TEST(Accuracy, HandExample) {
  EXPECT_DOUBLE_EQ(accuracy(Bits{1, 0, 1, 0}, Bits{1, 1, 1, 0}), 0.75);
  EXPECT_THROW(accuracy(Bits{}, Bits{}), InputError);
}

TEST(Auc, HandExample) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  EXPECT_DOUBLE_EQ(auc(s, Bits{0, 0, 1, 1}), 0.75);
}

TEST(Auc, TiesCountHalf) {
  const std::vector<double> s = {0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(auc(s, Bits{0, 1, 0, 1}), 0.5);
}

TEST(Auc, MatchesPairCountingOnRandomInstances) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 5), len(2, 40);
  for (int t = 0; t < 100; ++t) {
    const int n = len(rng);
    std::vector<double> s(n);
    Bits y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = level(rng) / 5.0;  // coarse grid forces ties
      y[i] = std::bernoulli_distribution(0.4)(rng);
    }
    y[0] = 1;
    y[1] = 0;
    ASSERT_NEAR(auc(s, y), auc_pairs(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(50), t(50);
  Bits y(50);
  for (int i = 0; i < 50; ++i) {
    s[i] = u(rng);
    t[i] = std::exp(3 * s[i]) - 7;
    y[i] = i % 3 == 0;
  }
  EXPECT_NEAR(auc(s, y), auc(t, y), 1e-15);
  std::vector<double> flipped(s);
  for (auto& v : flipped) v = -v;
  EXPECT_NEAR(auc(flipped, y), 1.0 - auc(s, y), 1e-12);
}

TEST(Auc, SingleClassIsUndefined) {
  const std::vector<double> s = {0.2, 0.7};
  EXPECT_THROW(auc(s, Bits{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auc(s, Bits{0, 0}), UndefinedMetricError);
}

TEST(Ranks, Midranks) {
  const std::vector<double> v = {3, 1, 3, 2, 3};
  EXPECT_EQ(midranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Spearman, MatchesPearsonOfMidranks) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 6);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> a(25), b(25);
    for (int i = 0; i < 25; ++i) {
      a[i] = level(rng);
      b[i] = a[i] + level(rng);
    }
    EXPECT_NEAR(spearman(a, b), pearson(midranks(a), midranks(b)), 1e-12);
  }
}

TEST(Spearman, MonotoneAndReversed) {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {1, 4, 9, 16, 25}, c = {5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(a, b), 1.0, 1e-15);
  EXPECT_NEAR(spearman(a, c), -1.0, 1e-15);
  const std::vector<double> flat = {1, 1, 1, 1, 1};
  EXPECT_THROW(spearman(a, flat), UndefinedMetricError);
}

TEST(LandmarkError, HandExample) {
  // Each point is off by (3, 4) with d_o = 100: 5 / 100 = 5 %.
  const std::vector<std::vector<double>> p = {{3, 4, 13, 14}}, t = {{0, 0, 10, 10}};
  const std::vector<double> d = {100};
  EXPECT_NEAR(mean_landmark_error(p, t, d), 5.0, 1e-12);
  const std::vector<double> zero = {0};
  EXPECT_THROW(mean_landmark_error(p, t, zero), InputError);
}

TEST(Evaluate, ThresholdAndUndefinedAuc) {
  std::vector<Prediction> preds(4);
  std::vector<SampleRecord> samples(4);
  const double p0[] = {0.9, 0.2, 0.6, 0.4};
  for (int s = 0; s < 4; ++s) {
    preds[s].p_final = {p0[s], 0.7};
    preds[s].landmarks = {0, 0};
    samples[s].labels = {static_cast<std::uint8_t>(s % 2 == 0), 1};
    samples[s].landmarks = {0, 0};
  }
  const auto r = evaluate(preds, samples);
  EXPECT_DOUBLE_EQ(r.f1[0], 1.0);
  EXPECT_DOUBLE_EQ(r.accuracy[0], 1.0);
  EXPECT_DOUBLE_EQ(*r.auc[0], 1.0);
  EXPECT_FALSE(r.auc[1].has_value());
  EXPECT_DOUBLE_EQ(r.avg_auc, 1.0);
  EXPECT_DOUBLE_EQ(r.avg_f1, 1.0);
  EXPECT_EQ(r.mean_landmark_error_pct, 0.0);
  std::ostringstream os;
  print_report(os, r);
  EXPECT_NE(os.str().find("excluded from average: AU 2"), std::string::npos);
}

TEST(Ablation, DeltaAgainstFirstRow) {
  const auto t = ablation_report({{"base", report_with({0.631, 0.631})}, {"full", report_with({0.682, 0.682})}});
  EXPECT_NEAR(t.delta_avg_f1[0], 0.0, 1e-12);
  EXPECT_NEAR(t.delta_avg_f1[1], 5.1, 1e-9);
  const auto path = std::filesystem::temp_directory_path() / "mgrr_test_ablation.csv";
  write_ablation_csv(path, t);
  std::ifstream is(path);
  std::string head, first, second;
  std::getline(is, head);
  std::getline(is, first);
  std::getline(is, second);
  EXPECT_EQ(head, "config,f1_au1,f1_au2,avg_f1,delta_avg_f1,avg_acc,avg_auc");
  EXPECT_NE(second.find("68.20,+5.10"), std::string::npos) << second;
  EXPECT_THROW(ablation_report({{"only", report_with({0.5})}}), InputError);
}
