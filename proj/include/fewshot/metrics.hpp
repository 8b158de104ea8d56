#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fewshot/classifiers.hpp"

namespace fewshot {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A class has no positive (or no negative) samples in the ground truth.
class MissingClassError : public MetricError {
 public:
  explicit MissingClassError(int local_class, const char* what);
};

struct EpisodeResult {
  std::uint64_t episode_index = 0;
  double macro_accuracy = 0.0;
  double macro_auroc = 0.0;
  std::vector<double> per_class_accuracy;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
};

struct Aggregate {
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single value.
  double std_dev = 0.0;
  /// 1.96 * std_dev / sqrt(episodes).
  double ci95_halfwidth = 0.0;
  std::size_t episodes = 0;
};

struct MacroAccuracy {
  double value = 0.0;
  std::vector<double> per_class;
};

/// Unweighted mean of per-class recall.
MacroAccuracy macro_accuracy(std::span<const int> predictions, std::span<const int> truth,
                             std::size_t n_way);

/// Binary AUROC of `scores` for positives `is_positive`, ties counted half.
/// Rank-sum with midranks, O(n log n).
double binary_auroc(std::span<const double> scores, const std::vector<bool>& is_positive);

/// Mean over classes of the one-vs-rest AUROC of each score column.
double macro_auroc(const ScoreMatrix& scores, std::span<const int> truth, std::size_t n_way);

EpisodeResult evaluate_episode(std::uint64_t episode_index, const ScoreMatrix& scores,
                               std::span<const int> truth, std::size_t n_way);

/// (accuracy aggregate, auroc aggregate).
std::pair<Aggregate, Aggregate> aggregate(std::span<const EpisodeResult> results);

Aggregate summarize(std::span<const double> values);

}  // namespace fewshot
