#include "fewshot/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fewshot {

EmptyClassError::EmptyClassError(int local_class)
    : ClassifierError("class " + std::to_string(local_class) + " has no support samples") {}

DimensionError::DimensionError(std::size_t expected, std::size_t actual)
    : ClassifierError("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                      std::to_string(actual)) {}

NeighborCountError::NeighborCountError(std::size_t k, std::size_t memory_size)
    : ClassifierError("k = " + std::to_string(k) + " must be in [1, " +
                      std::to_string(memory_size) + "]") {}

TrainingSet support_set(const Episode& episode) {
  TrainingSet set;
  set.n_way = episode.n_way();
  const std::size_t dim = episode.support.empty() ? 0 : episode.support.front().vector.size();
  set.features = Matrix(episode.support.size(), dim);
  for (std::size_t i = 0; i < episode.support.size(); ++i) {
    const auto& rec = episode.support[i];
    std::copy(rec.vector.begin(), rec.vector.end(), set.features.row(i).begin());
    set.labels.push_back(episode.local_label(rec));
    set.record_ids.push_back(rec.record_id);
  }
  return set;
}

Matrix query_features(const Episode& episode) {
  const std::size_t dim = episode.query.empty() ? 0 : episode.query.front().vector.size();
  Matrix q(episode.query.size(), dim);
  for (std::size_t i = 0; i < episode.query.size(); ++i) {
    std::copy(episode.query[i].vector.begin(), episode.query[i].vector.end(), q.row(i).begin());
  }
  return q;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

// ---------------------------------------------------------------------------

PrototypeModel compute_prototypes(const TrainingSet& support) {
  PrototypeModel model{Matrix(support.n_way, support.dim())};
  std::vector<std::size_t> counts(support.n_way, 0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const auto c = static_cast<std::size_t>(support.labels[i]);
    ++counts[c];
    auto row = model.prototypes.row(c);
    const auto x = support.features.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += x[k];
  }
  for (std::size_t c = 0; c < support.n_way; ++c) {
    if (counts[c] == 0) throw EmptyClassError(static_cast<int>(c));
    for (auto& v : model.prototypes.row(c)) v /= static_cast<double>(counts[c]);
  }
  return model;
}

double euclidean_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError(p.size(), q.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double d = p[k] - q[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Prediction classify_prototype(const PrototypeModel& model, std::span<const double> query) {
  if (query.size() != model.prototypes.cols()) {
    throw DimensionError(model.prototypes.cols(), query.size());
  }
  Prediction out;
  out.scores.resize(model.prototypes.rows());
  for (std::size_t c = 0; c < model.prototypes.rows(); ++c) {
    out.scores[c] = -euclidean_distance(query, model.prototypes.row(c));
  }
  out.label = argmax(out.scores);
  return out;
}

// ---------------------------------------------------------------------------

NeighborModel make_neighbor_model(TrainingSet support, std::size_t k) {
  if (k < 1 || k > support.size()) throw NeighborCountError(k, support.size());
  if (support.record_ids.size() != support.size()) {
    support.record_ids.resize(support.size());
    std::iota(support.record_ids.begin(), support.record_ids.end(), std::uint64_t{0});
  }
  return NeighborModel{std::move(support), k};
}

Prediction classify_knn(const NeighborModel& model, std::span<const double> query) {
  const auto& mem = model.memory;
  if (model.k < 1 || model.k > mem.size()) throw NeighborCountError(model.k, mem.size());
  if (query.size() != mem.dim()) throw DimensionError(mem.dim(), query.size());

  std::vector<std::pair<double, std::uint64_t>> order;
  std::vector<int> label_of(mem.size());
  order.reserve(mem.size());
  for (std::size_t i = 0; i < mem.size(); ++i) {
    order.emplace_back(euclidean_distance(query, mem.features.row(i)), i);
  }
  // (distance, record_id) ordering; position i is remapped to its record id below.
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return mem.record_ids[a.second] < mem.record_ids[b.second];
  });

  Prediction out;
  out.scores.assign(mem.n_way, 0.0);
  for (std::size_t j = 0; j < model.k; ++j) {
    out.scores[static_cast<std::size_t>(mem.labels[order[j].second])] += 1.0;
  }
  for (auto& s : out.scores) s /= static_cast<double>(model.k);
  out.label = argmax(out.scores);
  return out;
}

// ---------------------------------------------------------------------------

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "prototype" || name == "protonet") return ClassifierKind::kPrototype;
  if (name == "logistic" || name == "lr") return ClassifierKind::kLogistic;
  if (name == "svm") return ClassifierKind::kSvm;
  if (name == "tree" || name == "dt") return ClassifierKind::kTree;
  if (name == "knn" || name == "nn") return ClassifierKind::kKnn;
  throw std::invalid_argument("unknown classifier '" + name +
                              "' (expected prototype|logistic|svm|tree|knn)");
}

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kPrototype: return "prototype";
    case ClassifierKind::kLogistic: return "logistic";
    case ClassifierKind::kSvm: return "svm";
    case ClassifierKind::kTree: return "tree";
    case ClassifierKind::kKnn: return "knn";
  }
  return "unknown";
}

TrainedClassifier fit_classifier(const ClassifierConfig& config, const TrainingSet& support) {
  switch (config.kind) {
    case ClassifierKind::kPrototype: return compute_prototypes(support);
    case ClassifierKind::kLogistic: return train_logistic(support, config.solver);
    case ClassifierKind::kSvm: return train_svm(support, config.solver);
    case ClassifierKind::kTree: return train_tree(support, config.tree);
    case ClassifierKind::kKnn: return make_neighbor_model(support, config.knn_k);
  }
  throw std::logic_error("unhandled classifier kind");
}

namespace {

struct ScoreVisitor {
  const Matrix& queries;

  ScoreMatrix operator()(const PrototypeModel& m) const {
    ScoreMatrix s(queries.rows(), m.prototypes.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      const auto p = classify_prototype(m, queries.row(i));
      std::copy(p.scores.begin(), p.scores.end(), s.row(i).begin());
    }
    return s;
  }

  ScoreMatrix operator()(const LinearModel& m) const {
    ScoreMatrix s(queries.rows(), m.weights.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      const auto z = m.logits(queries.row(i));
      std::copy(z.begin(), z.end(), s.row(i).begin());
    }
    return s;
  }

  ScoreMatrix operator()(const TreeModel& m) const {
    ScoreMatrix s(queries.rows(), m.n_way);
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      const auto& leaf = m.leaf_for(queries.row(i));
      const double total = static_cast<double>(
          std::accumulate(leaf.class_counts.begin(), leaf.class_counts.end(), std::size_t{0}));
      for (std::size_t c = 0; c < m.n_way; ++c) {
        s(i, c) = static_cast<double>(leaf.class_counts[c]) / total;
      }
    }
    return s;
  }

  ScoreMatrix operator()(const NeighborModel& m) const {
    ScoreMatrix s(queries.rows(), m.memory.n_way);
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      const auto p = classify_knn(m, queries.row(i));
      std::copy(p.scores.begin(), p.scores.end(), s.row(i).begin());
    }
    return s;
  }
};

}  // namespace

ScoreMatrix predict_scores(const TrainedClassifier& classifier, const Matrix& queries) {
  return std::visit(ScoreVisitor{queries}, classifier);
}

std::vector<int> predicted_labels(const ScoreMatrix& scores) {
  std::vector<int> labels(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) labels[i] = argmax(scores.row(i));
  return labels;
}

}  // namespace fewshot
