#include <algorithm>
#include <cmath>
#include <limits>

#include "fewshot/classifiers.hpp"

namespace fewshot {

void SolverConfig::validate() const {
  if (l2_strength && !(*l2_strength >= 0.0)) throw std::invalid_argument("l2_strength must be >= 0");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
}

double SolverConfig::resolved_l2(std::size_t support_size) const {
  if (l2_strength) return *l2_strength;
  return 1.0 / static_cast<double>(std::max<std::size_t>(support_size, 1));
}

std::vector<double> LinearModel::logits(std::span<const double> x) const {
  if (x.size() != weights.cols()) throw DimensionError(weights.cols(), x.size());
  std::vector<double> z(bias);
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    const auto w = weights.row(c);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += w[k] * x[k];
    z[c] += s;
  }
  return z;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double squared_norm(const LinearParams& p) {
  double s = 0.0;
  for (double v : p.weights.data()) s += v * v;
  for (double v : p.bias) s += v * v;
  return s;
}

void zero_like(const LinearParams& params, LinearParams& out) {
  out = LinearParams(params.weights.rows(), params.weights.cols());
}

// out = params - step * direction
void axpy_into(const LinearParams& params, double step, const LinearParams& direction,
               LinearParams& out) {
  out = params;
  auto w = out.weights.data();
  const auto dw = direction.weights.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * dw[i];
  for (std::size_t c = 0; c < out.bias.size(); ++c) out.bias[c] -= step * direction.bias[c];
}

void add_ridge(const LinearParams& params, double lambda, LinearParams& grad) {
  auto g = grad.weights.data();
  const auto w = params.weights.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * w[i];
  for (std::size_t c = 0; c < grad.bias.size(); ++c) grad.bias[c] += lambda * params.bias[c];
}

void check_support(const TrainingSet& data) {
  if (data.n_way < 2) throw std::invalid_argument("linear models need n_way >= 2");
  std::vector<bool> seen(data.n_way, false);
  for (int label : data.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= data.n_way) {
      throw std::out_of_range("support label outside [0, n_way)");
    }
    seen[static_cast<std::size_t>(label)] = true;
  }
  for (std::size_t c = 0; c < data.n_way; ++c) {
    if (!seen[c]) throw EmptyClassError(static_cast<int>(c));
  }
}

enum class Acceptance { kArmijo, kDecrease };

// Gradient (or subgradient) descent from zero with backtracking. Only steps
// that lower the objective are accepted, so the iterate is always the best
// point seen.
template <typename Objective>
LinearParams descend(const TrainingSet& data, const SolverConfig& config, Acceptance acceptance,
                     Objective&& objective, FitDiagnostic& diag) {
  constexpr int kMaxHalvings = 60;
  constexpr double kArmijo = 1e-4;

  LinearParams params(data.n_way, data.dim());
  LinearParams grad;
  LinearParams trial;
  LinearParams trial_grad;
  double f = objective(params, &grad);
  diag.initial_objective = f;
  double step = config.learning_rate;

  std::size_t iter = 0;
  double gnorm = std::sqrt(squared_norm(grad));
  for (; iter < config.max_iters; ++iter) {
    if (!std::isfinite(f) || !std::isfinite(gnorm)) {
      throw NonFiniteLossError("non-finite objective or gradient at iteration " +
                               std::to_string(iter));
    }
    if (gnorm <= config.tolerance) {
      diag.converged = true;
      break;
    }
    bool accepted = false;
    bool any_finite = false;
    for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
      axpy_into(params, step, grad, trial);
      const double ft = objective(trial, &trial_grad);
      if (!std::isfinite(ft)) continue;
      any_finite = true;
      const double target =
          acceptance == Acceptance::kArmijo ? f - kArmijo * step * gnorm * gnorm : f;
      if (ft <= target && ft < f) {
        std::swap(params, trial);
        std::swap(grad, trial_grad);
        f = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_finite) {
        throw NonFiniteLossError("objective non-finite for every backtracked step at iteration " +
                                 std::to_string(iter));
      }
      // No descent along the (sub)gradient at floating-point resolution.
      break;
    }
    gnorm = std::sqrt(squared_norm(grad));
    step *= 2.0;
  }
  if (gnorm <= config.tolerance) diag.converged = true;
  diag.iterations = iter;
  diag.final_objective = f;
  diag.gradient_norm = gnorm;
  return params;
}

}  // namespace

double logistic_objective(const TrainingSet& data, const LinearParams& params, double lambda,
                          LinearParams* grad) {
  const std::size_t n = data.size();
  const std::size_t n_way = params.weights.rows();
  if (grad) zero_like(params, *grad);
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> z(n_way);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.features.row(i);
    for (std::size_t c = 0; c < n_way; ++c) z[c] = dot(params.weights.row(c), x) + params.bias[c];
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < n_way; ++c) sum += std::exp(z[c] - zmax);
    const double lse = zmax + std::log(sum);
    const auto y = static_cast<std::size_t>(data.labels[i]);
    loss += lse - z[y];
    if (grad) {
      for (std::size_t c = 0; c < n_way; ++c) {
        const double coeff = (std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0)) * inv_n;
        auto g = grad->weights.row(c);
        for (std::size_t k = 0; k < x.size(); ++k) g[k] += coeff * x[k];
        grad->bias[c] += coeff;
      }
    }
  }
  if (grad) add_ridge(params, lambda, *grad);
  return loss * inv_n + 0.5 * lambda * squared_norm(params);
}

double ovr_hinge_objective(const TrainingSet& data, const LinearParams& params, double lambda,
                           LinearParams* grad) {
  const std::size_t n = data.size();
  const std::size_t n_way = params.weights.rows();
  if (grad) zero_like(params, *grad);
  const double inv_n = 1.0 / static_cast<double>(n);

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.features.row(i);
    for (std::size_t c = 0; c < n_way; ++c) {
      const double y = static_cast<std::size_t>(data.labels[i]) == c ? 1.0 : -1.0;
      const double margin = y * (dot(params.weights.row(c), x) + params.bias[c]);
      if (margin < 1.0) {
        loss += 1.0 - margin;
        if (grad) {
          auto g = grad->weights.row(c);
          for (std::size_t k = 0; k < x.size(); ++k) g[k] -= y * x[k] * inv_n;
          grad->bias[c] -= y * inv_n;
        }
      }
    }
  }
  if (grad) add_ridge(params, lambda, *grad);
  return loss * inv_n + 0.5 * lambda * squared_norm(params);
}

LinearModel train_logistic(const TrainingSet& support, const SolverConfig& config) {
  config.validate();
  check_support(support);
  const double lambda = config.resolved_l2(support.size());
  LinearModel model;
  model.kind = LinearKind::kLogistic;
  auto params = descend(
      support, config, Acceptance::kArmijo,
      [&](const LinearParams& p, LinearParams* g) { return logistic_objective(support, p, lambda, g); },
      model.diagnostic);
  model.weights = std::move(params.weights);
  model.bias = std::move(params.bias);
  return model;
}

LinearModel train_svm(const TrainingSet& support, const SolverConfig& config) {
  config.validate();
  check_support(support);
  const double lambda = config.resolved_l2(support.size());
  LinearModel model;
  model.kind = LinearKind::kSvm;
  auto params = descend(
      support, config, Acceptance::kDecrease,
      [&](const LinearParams& p, LinearParams* g) { return ovr_hinge_objective(support, p, lambda, g); },
      model.diagnostic);
  model.weights = std::move(params.weights);
  model.bias = std::move(params.bias);
  return model;
}

}  // namespace fewshot
