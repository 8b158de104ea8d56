#include "fewshot/episode_sampler.hpp"

#include <algorithm>
#include <utility>

#include "fewshot/rng.hpp"
#include "json.hpp"

namespace fewshot {

InsufficientGroupsError::InsufficientGroupsError(std::uint32_t class_label, std::size_t available,
                                                 std::size_t required)
    : SamplingError("class " + std::to_string(class_label) + " has " + std::to_string(available) +
                    " groups, episode needs " + std::to_string(required)),
      class_label_(class_label) {}

TooManyWaysError::TooManyWaysError(std::size_t n_way, std::size_t n_classes)
    : SamplingError("n_way " + std::to_string(n_way) + " exceeds the " +
                    std::to_string(n_classes) + " classes in the pool") {}

void EpisodeConfig::validate() const {
  if (n_way < 2) throw std::invalid_argument("n_way must be >= 2");
  if (k_shot < 1) throw std::invalid_argument("k_shot must be >= 1");
  if (q_query < 1) throw std::invalid_argument("q_query must be >= 1");
}

std::vector<int> Episode::support_labels() const {
  std::vector<int> labels;
  labels.reserve(support.size());
  for (const auto& rec : support) labels.push_back(local_label(rec));
  return labels;
}

std::vector<int> Episode::query_labels() const {
  std::vector<int> labels;
  labels.reserve(query.size());
  for (const auto& rec : query) labels.push_back(local_label(rec));
  return labels;
}

namespace {

// Moves a uniformly chosen subset of size `take` into items[0, take), in draw order.
template <typename T>
void fisher_yates_prefix(std::vector<T>& items, std::size_t take, CounterRng& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace

Episode sample_episode(const EmbeddingDataset& dataset, const EpisodeConfig& config,
                       std::uint64_t episode_index) {
  config.validate();
  const auto& index = dataset.class_index();
  if (config.n_way > index.size()) throw TooManyWaysError(config.n_way, index.size());

  // Ordering by smallest group id keeps draws invariant under class relabeling.
  std::vector<std::pair<std::uint64_t, std::uint32_t>> classes;
  classes.reserve(index.size());
  for (const auto& [label, groups] : index) classes.emplace_back(groups.front(), label);
  std::sort(classes.begin(), classes.end());

  CounterRng rng(config.seed, episode_index);
  fisher_yates_prefix(classes, config.n_way, rng);

  Episode episode;
  episode.episode_index = episode_index;
  const std::size_t needed = config.k_shot + config.q_query;
  for (std::size_t local = 0; local < config.n_way; ++local) {
    const std::uint32_t label = classes[local].second;
    episode.class_map.emplace(label, static_cast<int>(local));

    std::vector<std::uint64_t> groups = index.at(label);
    if (groups.size() < needed) throw InsufficientGroupsError(label, groups.size(), needed);
    fisher_yates_prefix(groups, needed, rng);

    for (std::size_t g = 0; g < config.k_shot; ++g) {
      const auto members = dataset.group_members(groups[g]);
      if (config.aug_expand) {
        for (std::size_t pos : members) episode.support.push_back(dataset.record(pos));
      } else {
        episode.support.push_back(dataset.record(members.front()));
      }
    }
    for (std::size_t g = config.k_shot; g < needed; ++g) {
      episode.query.push_back(dataset.record(dataset.group_members(groups[g]).front()));
    }
  }
  return episode;
}

std::vector<Episode> sample_episodes(const EmbeddingDataset& dataset, const EpisodeConfig& config,
                                     std::size_t count) {
  std::vector<Episode> episodes;
  episodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) episodes.push_back(sample_episode(dataset, config, i));
  return episodes;
}

std::string episode_manifest_json(const std::vector<Episode>& episodes) {
  auto manifest = nlohmann::json::array();
  for (const auto& ep : episodes) {
    nlohmann::json class_map = nlohmann::json::object();
    for (const auto& [label, local] : ep.class_map) class_map[std::to_string(label)] = local;
    std::vector<std::uint64_t> support;
    std::vector<std::uint64_t> query;
    for (const auto& rec : ep.support) support.push_back(rec.record_id);
    for (const auto& rec : ep.query) query.push_back(rec.record_id);
    manifest.push_back({{"episode_index", ep.episode_index},
                        {"class_map", std::move(class_map)},
                        {"support", std::move(support)},
                        {"query", std::move(query)}});
  }
  return manifest.dump(2);
}

}  // namespace fewshot
