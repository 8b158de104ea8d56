#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fewshot/episode_sampler.hpp"

namespace fewshot {

class ClassifierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A class in [0, n_way) has no support sample.
class EmptyClassError : public ClassifierError {
 public:
  explicit EmptyClassError(int local_class);
};

class DimensionError : public ClassifierError {
 public:
  DimensionError(std::size_t expected, std::size_t actual);
};

/// The solver could not find a finite objective value, even after
/// exhausting step-size backtracking.
class NonFiniteLossError : public ClassifierError {
 public:
  using ClassifierError::ClassifierError;
};

class NeighborCountError : public ClassifierError {
 public:
  NeighborCountError(std::size_t k, std::size_t memory_size);
};

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Labeled samples in episode-local class indices.
struct TrainingSet {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::uint64_t> record_ids;
  std::size_t n_way = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

TrainingSet support_set(const Episode& episode);
Matrix query_features(const Episode& episode);

/// Per-query class scores, higher = more likely. rows = queries, cols = n_way.
using ScoreMatrix = Matrix;

struct Prediction {
  int label = 0;
  std::vector<double> scores;
};

/// Index of the maximum, lowest index on ties.
int argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// Nearest prototype

struct PrototypeModel {
  /// Row c is the mean support vector of class c.
  Matrix prototypes;
};

PrototypeModel compute_prototypes(const TrainingSet& support);

double euclidean_distance(std::span<const double> p, std::span<const double> q);

/// label = argmin_c d(query, V_c) (lowest index on ties); scores_c = -d(query, V_c).
Prediction classify_prototype(const PrototypeModel& model, std::span<const double> query);

// ---------------------------------------------------------------------------
// Linear models (multinomial logistic regression, one-vs-rest linear SVM)

struct SolverConfig {
  /// Regularization strength; nullopt resolves to 1 / support size.
  std::optional<double> l2_strength;
  std::size_t max_iters = 1000;
  /// Convergence threshold on the gradient norm.
  double tolerance = 1e-6;
  /// Initial step. Halved on every rejected step, doubled after an accepted one.
  double learning_rate = 1.0;

  void validate() const;
  double resolved_l2(std::size_t support_size) const;
};

struct FitDiagnostic {
  std::size_t iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
};

enum class LinearKind { kLogistic, kSvm };

struct LinearModel {
  Matrix weights;  // n_way x dim
  std::vector<double> bias;
  LinearKind kind = LinearKind::kLogistic;
  FitDiagnostic diagnostic;

  std::vector<double> logits(std::span<const double> x) const;
};

/// Parameter block (W, b) used by the objective functions.
struct LinearParams {
  Matrix weights;
  std::vector<double> bias;

  LinearParams() = default;
  LinearParams(std::size_t n_way, std::size_t dim) : weights(n_way, dim), bias(n_way, 0.0) {}
};

/// Mean softmax cross-entropy + lambda/2 (||W||^2 + ||b||^2). Fills `grad`
/// (same shape as params) when non-null.
double logistic_objective(const TrainingSet& data, const LinearParams& params, double lambda,
                          LinearParams* grad = nullptr);

/// Sum over classes c of the one-vs-rest binary objective
///   mean_i max(0, 1 - y_ic (w_c . x_i + b_c)) + lambda/2 (||w_c||^2 + b_c^2),
/// y_ic = +1 if label_i == c else -1. `grad` receives a subgradient (hinge
/// terms exactly at the margin contribute zero).
double ovr_hinge_objective(const TrainingSet& data, const LinearParams& params, double lambda,
                           LinearParams* grad = nullptr);

LinearModel train_logistic(const TrainingSet& support, const SolverConfig& config);
LinearModel train_svm(const TrainingSet& support, const SolverConfig& config);

// ---------------------------------------------------------------------------
// CART decision tree (Gini impurity)

struct TreeConfig {
  /// nullopt = grow until pure.
  std::optional<std::size_t> max_depth;
  std::size_t min_split = 2;
};

struct TreeNode {
  /// -1 on leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;   // x[feature] <= threshold
  int right = -1;  // x[feature] >  threshold
  std::vector<std::size_t> class_counts;
  int label = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t n_way = 0;
  std::size_t dim = 0;

  const TreeNode& leaf_for(std::span<const double> x) const;
  std::size_t depth() const;
};

TreeModel train_tree(const TrainingSet& support, const TreeConfig& config);

// ---------------------------------------------------------------------------
// k-nearest neighbors

struct NeighborModel {
  TrainingSet memory;
  std::size_t k = 1;
};

NeighborModel make_neighbor_model(TrainingSet support, std::size_t k);

/// Majority vote of the k nearest support samples. Distance ties go to the
/// lower record_id, vote ties to the lower class. scores_c = share of votes.
Prediction classify_knn(const NeighborModel& model, std::span<const double> query);

// ---------------------------------------------------------------------------
// Uniform facade

enum class ClassifierKind { kPrototype, kLogistic, kSvm, kTree, kKnn };

ClassifierKind parse_classifier_kind(const std::string& name);
std::string to_string(ClassifierKind kind);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::kPrototype;
  SolverConfig solver;
  TreeConfig tree;
  std::size_t knn_k = 1;
};

using TrainedClassifier = std::variant<PrototypeModel, LinearModel, TreeModel, NeighborModel>;

TrainedClassifier fit_classifier(const ClassifierConfig& config, const TrainingSet& support);

/// prototype: negative distances; linear: logits Wx + b; tree: leaf class
/// frequencies; knn: vote fractions.
ScoreMatrix predict_scores(const TrainedClassifier& classifier, const Matrix& queries);

/// Row-wise argmax of a score matrix.
std::vector<int> predicted_labels(const ScoreMatrix& scores);

}  // namespace fewshot
