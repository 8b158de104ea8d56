#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "fewshot/metrics.hpp"

using namespace fewshot;

namespace {

// O(n^2) pairwise counting: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auroc(const ScoreMatrix& s, const std::vector<int>& truth, std::size_t c) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (static_cast<std::size_t>(truth[i]) != c) continue;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (static_cast<std::size_t>(truth[j]) == c) continue;
      pairs += 1.0;
      if (s(i, c) > s(j, c)) wins += 1.0;
      else if (s(i, c) == s(j, c)) wins += 0.5;
    }
  }
  return wins / pairs;
}

ScoreMatrix column_matrix(const std::vector<std::vector<double>>& cols) {
  ScoreMatrix m(cols.front().size(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t i = 0; i < cols[c].size(); ++i) m(i, c) = cols[c][i];
  }
  return m;
}

}  // namespace

TEST(MacroAccuracy, Examples) {
  EXPECT_EQ(macro_accuracy(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1}, 2).value, 1.0);
  // Class 0 fully right (1 sample), class 1 fully wrong (5 samples).
  const auto r = macro_accuracy(std::vector<int>{0, 0, 0, 0, 0, 0}, std::vector<int>{0, 1, 1, 1, 1, 1}, 2);
  EXPECT_EQ(r.value, 0.5);
  EXPECT_EQ(r.per_class, (std::vector<double>{1.0, 0.0}));
  EXPECT_THROW(macro_accuracy(std::vector<int>{0}, std::vector<int>{0}, 2), MissingClassError);
  EXPECT_THROW(macro_accuracy(std::vector<int>{0, 1}, std::vector<int>{0}, 2), std::invalid_argument);
}

TEST(MacroAccuracy, RelabelingAndImbalanceInvariance) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n_way = 2 + rng() % 4;
    std::vector<int> truth;
    std::vector<int> pred;
    for (std::size_t c = 0; c < n_way; ++c) {
      for (std::size_t i = 0; i < 1 + rng() % 6; ++i) {
        truth.push_back(static_cast<int>(c));
        pred.push_back(static_cast<int>(rng() % n_way));
      }
    }
    const double base = macro_accuracy(pred, truth, n_way).value;

    std::vector<int> perm(n_way);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pt(truth.size());
    std::vector<int> pp(pred.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      pt[i] = perm[static_cast<std::size_t>(truth[i])];
      pp[i] = perm[static_cast<std::size_t>(pred[i])];
    }
    EXPECT_NEAR(macro_accuracy(pp, pt, n_way).value, base, 1e-15);

    // Duplicating every sample of one class keeps its recall, hence the macro value.
    const int dup = static_cast<int>(rng() % n_way);
    auto dt = truth;
    auto dp = pred;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == dup) dt.push_back(truth[i]), dp.push_back(pred[i]);
    }
    EXPECT_NEAR(macro_accuracy(dp, dt, n_way).value, base, 1e-15);
  }
}

TEST(MacroAuroc, Examples) {
  const std::vector<int> truth = {1, 0, 1, 0};
  EXPECT_EQ(macro_auroc(column_matrix({{0, 1, 0, 1}, {1, 0, 1, 0}}), truth, 2), 1.0);
  EXPECT_EQ(macro_auroc(column_matrix({{0.3, 0.3, 0.3, 0.3}, {0.7, 0.7, 0.7, 0.7}}), truth, 2), 0.5);

  // Positives {0.9, 0.7}, negatives {0.8, 0.1}: pairs (0.9>0.8, 0.9>0.1, 0.7<0.8, 0.7>0.1) -> 3/4.
  const std::vector<double> class1 = {0.9, 0.8, 0.7, 0.1};
  std::vector<double> class0(4);
  for (std::size_t i = 0; i < 4; ++i) class0[i] = 1.0 - class1[i];
  const auto s = column_matrix({class0, class1});
  EXPECT_EQ(binary_auroc(class1, {true, false, true, false}), 0.75);
  EXPECT_EQ(macro_auroc(s, truth, 2), 0.75);
}

TEST(MacroAuroc, MissingPositivesOrNegatives) {
  EXPECT_THROW(macro_auroc(column_matrix({{0.1, 0.2}, {0.9, 0.8}}), std::vector<int>{0, 0}, 2),
               MissingClassError);
}

TEST(MacroAuroc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n_way = 2 + rng() % 3;
    const std::size_t n = n_way + rng() % (200 - n_way + 1);
    std::vector<int> truth(n);
    for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<int>(i < n_way ? i : rng() % n_way);
    std::shuffle(truth.begin(), truth.end(), rng);
    ScoreMatrix s(n, n_way);
    const std::uint64_t levels = 2 + rng() % 12;  // coarse grid forces ties
    for (auto& v : s.data()) v = static_cast<double>(rng() % levels) / static_cast<double>(levels);
    double oracle = 0.0;
    for (std::size_t c = 0; c < n_way; ++c) oracle += pairwise_auroc(s, truth, c);
    oracle /= static_cast<double>(n_way);
    EXPECT_NEAR(macro_auroc(s, truth, n_way), oracle, 1e-12);
  }
}

TEST(MacroAuroc, InvariantUnderStrictlyIncreasingTransforms) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int t = 0; t < 100; ++t) {
    const std::size_t size = 10 + rng() % 50;
    std::vector<int> truth(size);
    for (std::size_t i = 0; i < size; ++i) truth[i] = static_cast<int>(i % 3);
    ScoreMatrix s(size, 3);
    for (auto& v : s.data()) v = std::round(n(rng) * 4.0) / 4.0;
    auto transformed = s;
    const double a = 0.1 + static_cast<double>(rng() % 10);
    for (auto& v : transformed.data()) v = std::exp(a * v) + std::atan(v);
    EXPECT_EQ(macro_auroc(s, truth, 3), macro_auroc(transformed, truth, 3));
  }
}

TEST(Aggregate, Examples) {
  EpisodeResult one;
  one.macro_accuracy = 0.7;
  one.macro_auroc = 0.8;
  auto [acc, auc] = aggregate(std::vector<EpisodeResult>{one});
  EXPECT_EQ(acc.mean, 0.7);
  EXPECT_EQ(acc.ci95_halfwidth, 0.0);
  EXPECT_EQ(auc.mean, 0.8);

  EpisodeResult a;
  EpisodeResult b;
  a.macro_accuracy = 0.4;
  b.macro_accuracy = 0.6;
  std::tie(acc, auc) = aggregate(std::vector<EpisodeResult>{a, b});
  EXPECT_DOUBLE_EQ(acc.mean, 0.5);
  EXPECT_NEAR(acc.std_dev, std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(acc.ci95_halfwidth, 1.96 * std::sqrt(0.02) / std::sqrt(2.0), 1e-15);

  const std::vector<double> constant(7, 0.1);
  EXPECT_EQ(summarize(constant).std_dev, 0.0);
  EXPECT_EQ(summarize(constant).mean, 0.1);
  EXPECT_THROW(aggregate(std::vector<EpisodeResult>{}), MetricError);
}

TEST(EvaluateEpisode, CountsAndConsistency) {
  const auto s = column_matrix({{0.9, 0.2, 0.6, 0.1}, {0.1, 0.8, 0.4, 0.9}});
  const auto r = evaluate_episode(3, s, std::vector<int>{0, 1, 1, 1}, 2);
  EXPECT_EQ(r.episode_index, 3u);
  EXPECT_EQ(r.n_total, 4u);
  EXPECT_EQ(r.n_correct, 3u);
  EXPECT_DOUBLE_EQ(r.macro_accuracy, (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_DOUBLE_EQ(r.macro_accuracy, (r.per_class_accuracy[0] + r.per_class_accuracy[1]) / 2.0);
}
