#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fewshot/classifiers.hpp"
#include "test_support.hpp"

using namespace fewshot;
using fewshot::testing::make_set;
using fewshot::testing::random_set;

namespace {

double tree_training_accuracy(const TreeModel& tree, const TrainingSet& data) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hit += tree.leaf_for(data.features.row(i)).label == data.labels[i] ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

}  // namespace

TEST(DecisionTree, PureSupportIsSingleLeaf) {
  const auto tree = train_tree(make_set({{1, 2}, {3, 4}, {5, 6}}, {1, 1, 1}, 2), TreeConfig{});
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_TRUE(tree.nodes[0].is_leaf());
  EXPECT_EQ(tree.nodes[0].label, 1);
}

TEST(DecisionTree, OneDimensionalForcedSplit) {
  const auto data = make_set({{0.0}, {1.0}}, {0, 1}, 2);
  const auto tree = train_tree(data, TreeConfig{});
  ASSERT_EQ(tree.nodes.size(), 3u);
  EXPECT_EQ(tree.nodes[0].feature, 0);
  EXPECT_GT(tree.nodes[0].threshold, 0.0);
  EXPECT_LT(tree.nodes[0].threshold, 1.0);
  EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, 0.5);
  EXPECT_EQ(tree_training_accuracy(tree, data), 1.0);
}

TEST(DecisionTree, TiesPreferLowestFeatureThenThreshold) {
  // Features 0 and 1 both separate perfectly; feature 0 must win.
  const auto data = make_set({{0, 0}, {1, 1}}, {0, 1}, 2);
  EXPECT_EQ(train_tree(data, TreeConfig{}).nodes[0].feature, 0);
  // Within a feature, two thresholds give equal impurity; the lower wins.
  const auto data2 = make_set({{0}, {1}, {2}}, {0, 1, 0}, 2);
  EXPECT_DOUBLE_EQ(train_tree(data2, TreeConfig{}).nodes[0].threshold, 0.5);
}

TEST(DecisionTree, StoppingRules) {
  std::mt19937_64 rng(3);
  const auto data = random_set(rng, 3, 10, 4);
  TreeConfig depth_one;
  depth_one.max_depth = 1;
  EXPECT_LE(train_tree(data, depth_one).depth(), 1u);
  TreeConfig stump;
  stump.max_depth = 0;
  const auto leaf = train_tree(data, stump);
  EXPECT_EQ(leaf.nodes.size(), 1u);
  EXPECT_EQ(leaf.nodes[0].class_counts, (std::vector<std::size_t>{10, 10, 10}));
  EXPECT_EQ(leaf.nodes[0].label, 0);  // three-way count tie
  TreeConfig big_min;
  big_min.min_split = 31;
  EXPECT_EQ(train_tree(data, big_min).nodes.size(), 1u);
}

TEST(DecisionTree, PerfectTrainingAccuracyWithoutDuplicates) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto data = random_set(rng, 2 + rng() % 4, 1 + rng() % 8, 1 + rng() % 6);
    const auto tree = train_tree(data, TreeConfig{});
    EXPECT_EQ(tree_training_accuracy(tree, data), 1.0);
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) EXPECT_LT(static_cast<std::size_t>(node.feature), data.dim());
    }
  }
}

TEST(DecisionTree, XorNeedsZeroGainFirstSplit) {
  const auto data = make_set({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {0, 0, 1, 1}, 2);
  EXPECT_EQ(tree_training_accuracy(train_tree(data, TreeConfig{}), data), 1.0);
}

TEST(DecisionTree, IdenticalVectorsWithConflictingLabelsStop) {
  const auto data = make_set({{1, 1}, {1, 1}, {1, 1}}, {0, 1, 1}, 2);
  const auto tree = train_tree(data, TreeConfig{});
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.nodes[0].label, 1);
  const auto scores = predict_scores(TrainedClassifier{tree}, data.features);
  EXPECT_DOUBLE_EQ(scores(0, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(scores(0, 1), 2.0 / 3.0);
}

TEST(DecisionTree, EveryLeafReachable) {
  std::mt19937_64 rng(5);
  const auto data = random_set(rng, 3, 6, 3);
  const auto tree = train_tree(data, TreeConfig{});
  std::set<const TreeNode*> reached;
  for (std::size_t i = 0; i < data.size(); ++i) reached.insert(&tree.leaf_for(data.features.row(i)));
  std::size_t leaves = 0;
  for (const auto& node : tree.nodes) leaves += node.is_leaf() ? 1 : 0;
  EXPECT_EQ(reached.size(), leaves);
}

TEST(DecisionTree, EmptySupportThrows) {
  EXPECT_THROW(train_tree(make_set({}, {}, 2), TreeConfig{}), ClassifierError);
}
