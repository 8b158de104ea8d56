#pragma once

#include <span>
#include <vector>

#include "fewshot/episode_sampler.hpp"

namespace fewshot {

struct PreprocessConfig {
  bool l2_normalize = false;
  /// Norm floor; vectors shorter than this are divided by epsilon instead.
  double epsilon = 1e-12;

  void validate() const;
};

/// v / max(||v||_2, epsilon). Throws std::domain_error on non-finite input.
std::vector<double> l2_normalize(std::span<const double> vector, double epsilon = 1e-12);

/// Applies the configured embedding-space transforms to every support and
/// query vector of an episode. Identity when nothing is enabled.
Episode apply_preprocess(Episode episode, const PreprocessConfig& config);

}  // namespace fewshot
