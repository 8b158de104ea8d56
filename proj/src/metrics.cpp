#include "fewshot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fewshot {

MissingClassError::MissingClassError(int local_class, const char* what)
    : MetricError("class " + std::to_string(local_class) + " has no " + what +
                  " samples in the ground truth") {}

MacroAccuracy macro_accuracy(std::span<const int> predictions, std::span<const int> truth,
                             std::size_t n_way) {
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("predictions and truth differ in length");
  }
  std::vector<std::size_t> hits(n_way, 0);
  std::vector<std::size_t> totals(n_way, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto y = static_cast<std::size_t>(truth[i]);
    if (y >= n_way) throw std::out_of_range("truth label outside [0, n_way)");
    ++totals[y];
    if (predictions[i] == truth[i]) ++hits[y];
  }
  MacroAccuracy out;
  out.per_class.resize(n_way);
  for (std::size_t c = 0; c < n_way; ++c) {
    if (totals[c] == 0) throw MissingClassError(static_cast<int>(c), "positive");
    out.per_class[c] = static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
  }
  out.value = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) /
              static_cast<double>(n_way);
  return out;
}

double binary_auroc(std::span<const double> scores, const std::vector<bool>& is_positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks (1-based); every rank sum is a multiple of 0.5 and exact in double.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (is_positive[order[t]]) {
        positive_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("AUROC needs both positives and negatives");
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double macro_auroc(const ScoreMatrix& scores, std::span<const int> truth, std::size_t n_way) {
  if (scores.rows() != truth.size()) throw std::invalid_argument("score rows != truth length");
  if (scores.cols() != n_way) throw std::invalid_argument("score columns != n_way");
  std::vector<double> column(truth.size());
  double total = 0.0;
  for (std::size_t c = 0; c < n_way; ++c) {
    std::vector<bool> positive(truth.size());
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      positive[i] = static_cast<std::size_t>(truth[i]) == c;
      n_pos += positive[i] ? 1 : 0;
      column[i] = scores(i, c);
    }
    if (n_pos == 0) throw MissingClassError(static_cast<int>(c), "positive");
    if (n_pos == truth.size()) throw MissingClassError(static_cast<int>(c), "negative");
    total += binary_auroc(column, positive);
  }
  return total / static_cast<double>(n_way);
}

EpisodeResult evaluate_episode(std::uint64_t episode_index, const ScoreMatrix& scores,
                               std::span<const int> truth, std::size_t n_way) {
  const auto predicted = predicted_labels(scores);
  auto acc = macro_accuracy(predicted, truth, n_way);
  EpisodeResult r;
  r.episode_index = episode_index;
  r.macro_accuracy = acc.value;
  r.per_class_accuracy = std::move(acc.per_class);
  r.macro_auroc = macro_auroc(scores, truth, n_way);
  r.n_total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) r.n_correct += predicted[i] == truth[i] ? 1 : 0;
  return r;
}

Aggregate summarize(std::span<const double> values) {
  if (values.empty()) throw MetricError("cannot aggregate an empty result list");
  Aggregate a;
  a.episodes = values.size();
  const double n = static_cast<double>(values.size());
  const bool constant = std::all_of(values.begin(), values.end(),
                                    [&](double v) { return v == values.front(); });
  a.mean = constant ? values.front() : std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (!constant) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std_dev = std::sqrt(ss / (n - 1.0));
  }
  a.ci95_halfwidth = 1.96 * a.std_dev / std::sqrt(n);
  return a;
}

std::pair<Aggregate, Aggregate> aggregate(std::span<const EpisodeResult> results) {
  std::vector<double> acc;
  std::vector<double> auc;
  acc.reserve(results.size());
  auc.reserve(results.size());
  for (const auto& r : results) {
    acc.push_back(r.macro_accuracy);
    auc.push_back(r.macro_auroc);
  }
  return {summarize(acc), summarize(auc)};
}

}  // namespace fewshot
