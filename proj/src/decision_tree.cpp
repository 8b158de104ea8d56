#include <algorithm>
#include <numeric>

#include "fewshot/classifiers.hpp"

namespace fewshot {

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of sum_c count_c^2 / n_child; larger = purer
};

int majority(const std::vector<std::size_t>& counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

double purity_term(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (std::size_t c : counts) s += static_cast<double>(c) * static_cast<double>(c);
  return s / static_cast<double>(total);
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const TreeConfig& config) : data_(data), config_(config) {}

  TreeModel build() {
    model_.n_way = data_.n_way;
    model_.dim = data_.dim();
    std::vector<std::size_t> all(data_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return std::move(model_);
  }

 private:
  std::vector<std::size_t> count_classes(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> counts(data_.n_way, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(data_.labels[r])];
    return counts;
  }

  // Exhaustive search over features (ascending) and midpoint thresholds
  // (ascending). Minimizing weighted Gini equals maximizing the purity score;
  // only a strictly better score replaces the incumbent.
  SplitChoice best_split(const std::vector<std::size_t>& rows) const {
    SplitChoice best;
    const std::size_t n = rows.size();
    std::vector<std::pair<double, int>> column(n);
    for (std::size_t f = 0; f < data_.dim(); ++f) {
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = {data_.features(rows[i], f), data_.labels[rows[i]]};
      }
      std::sort(column.begin(), column.end());
      std::vector<std::size_t> left(data_.n_way, 0);
      std::vector<std::size_t> right(data_.n_way, 0);
      for (const auto& [v, y] : column) ++right[static_cast<std::size_t>(y)];
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto y = static_cast<std::size_t>(column[i].second);
        ++left[y];
        --right[y];
        if (column[i].first == column[i + 1].first) continue;
        const double score = purity_term(left, i + 1) + purity_term(right, n - i - 1);
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          const double lo = column[i].first;
          const double hi = column[i + 1].first;
          const double mid = lo + 0.5 * (hi - lo);
          best.threshold = mid < hi ? mid : lo;  // adjacent doubles
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(model_.nodes.size());
    model_.nodes.emplace_back();
    auto counts = count_classes(rows);
    const bool pure = std::count_if(counts.begin(), counts.end(),
                                    [](std::size_t c) { return c > 0; }) <= 1;
    const bool depth_reached = config_.max_depth && depth >= *config_.max_depth;

    SplitChoice split;
    if (!pure && !depth_reached && rows.size() >= config_.min_split) split = best_split(rows);

    model_.nodes[id].label = majority(counts);
    model_.nodes[id].class_counts = std::move(counts);
    if (split.feature < 0) return id;  // leaf: pure, stopped, or all vectors identical

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    const auto f = static_cast<std::size_t>(split.feature);
    for (std::size_t r : rows) {
      (data_.features(r, f) <= split.threshold ? left_rows : right_rows).push_back(r);
    }
    const int left = grow(left_rows, depth + 1);
    const int right = grow(right_rows, depth + 1);
    auto& node = model_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  const TrainingSet& data_;
  const TreeConfig& config_;
  TreeModel model_;
};

}  // namespace

const TreeNode& TreeModel::leaf_for(std::span<const double> x) const {
  if (x.size() != dim) throw DimensionError(dim, x.size());
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) {
    const auto f = static_cast<std::size_t>(node->feature);
    node = &nodes[static_cast<std::size_t>(x[f] <= node->threshold ? node->left : node->right)];
  }
  return *node;
}

std::size_t TreeModel::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& node = nodes[static_cast<std::size_t>(id)];
    if (!node.is_leaf()) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

TreeModel train_tree(const TrainingSet& support, const TreeConfig& config) {
  if (support.size() == 0) throw ClassifierError("decision tree needs a non-empty support set");
  return TreeBuilder(support, config).build();
}

}  // namespace fewshot
