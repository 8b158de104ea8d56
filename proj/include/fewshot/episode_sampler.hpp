#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fewshot/embedding_store.hpp"

namespace fewshot {

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampled class does not have k_shot + q_query groups.
class InsufficientGroupsError : public SamplingError {
 public:
  InsufficientGroupsError(std::uint32_t class_label, std::size_t available, std::size_t required);
  std::uint32_t class_label() const noexcept { return class_label_; }

 private:
  std::uint32_t class_label_;
};

class TooManyWaysError : public SamplingError {
 public:
  TooManyWaysError(std::size_t n_way, std::size_t n_classes);
};

struct EpisodeConfig {
  std::size_t n_way = 2;
  std::size_t k_shot = 1;
  /// Customary default.
  std::size_t q_query = 15;
  /// Support groups contribute every member record instead of one.
  bool aug_expand = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Episode {
  std::uint64_t episode_index = 0;
  std::vector<EmbeddingRecord> support;
  std::vector<EmbeddingRecord> query;
  /// Original class_label -> episode-local index in [0, n_way).
  std::map<std::uint32_t, int> class_map;

  int local_label(const EmbeddingRecord& rec) const { return class_map.at(rec.class_label); }
  std::vector<int> support_labels() const;
  std::vector<int> query_labels() const;
  std::size_t n_way() const noexcept { return class_map.size(); }

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Draws episode `episode_index`. The result depends only on the dataset, the
/// config and the index: every episode owns an RNG stream keyed by
/// (config.seed, episode_index).
///
/// Classes are ordered by their smallest group_id and chosen with a
/// Fisher-Yates prefix; within a class, k_shot + q_query groups are drawn the
/// same way. The first k_shot drawn groups form the support set. Query groups
/// contribute their canonical (lowest record_id) record only.
Episode sample_episode(const EmbeddingDataset& dataset, const EpisodeConfig& config,
                       std::uint64_t episode_index);

std::vector<Episode> sample_episodes(const EmbeddingDataset& dataset, const EpisodeConfig& config,
                                     std::size_t count);

/// JSON array of {episode_index, class_map, support, query} with record ids.
std::string episode_manifest_json(const std::vector<Episode>& episodes);

}  // namespace fewshot
