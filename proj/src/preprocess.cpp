#include "fewshot/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fewshot {

void PreprocessConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("preprocess epsilon must be > 0");
}

std::vector<double> l2_normalize(std::span<const double> vector, double epsilon) {
  double norm2 = 0.0;
  for (double x : vector) {
    if (!std::isfinite(x)) throw std::domain_error("l2_normalize: non-finite input");
    norm2 += x * x;
  }
  const double scale = 1.0 / std::max(std::sqrt(norm2), epsilon);
  std::vector<double> out(vector.begin(), vector.end());
  for (auto& x : out) x *= scale;
  return out;
}

Episode apply_preprocess(Episode episode, const PreprocessConfig& config) {
  config.validate();
  if (!config.l2_normalize) return episode;
  for (auto* set : {&episode.support, &episode.query}) {
    for (auto& rec : *set) rec.vector = l2_normalize(rec.vector, config.epsilon);
  }
  return episode;
}

}  // namespace fewshot
