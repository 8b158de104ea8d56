#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fewshot/classifiers.hpp"
#include "fewshot/config_file.hpp"
#include "fewshot/embedding_store.hpp"
#include "fewshot/episode_sampler.hpp"
#include "fewshot/metrics.hpp"
#include "fewshot/preprocess.hpp"
#include "json.hpp"

namespace fewshot {

inline constexpr const char* kEngineVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

/// Any module failure inside the episode loop, tagged with the episode.
class EpisodeError : public std::runtime_error {
 public:
  EpisodeError(std::uint64_t episode_index, const std::string& cause);
  std::uint64_t episode_index() const noexcept { return episode_index_; }

 private:
  std::uint64_t episode_index_;
};

enum class ReportFormat { kJson, kCsv };

struct DataSource {
  std::optional<std::filesystem::path> path;
  DatasetFormat format = DatasetFormat::kBinary;
  std::optional<SyntheticSpec> synthetic;
};

struct ExperimentConfig {
  std::string label;
  DataSource data;
  EpisodeConfig episode;
  PreprocessConfig preprocess;
  ClassifierConfig classifier;
  /// Customary default.
  std::size_t episodes = 600;
  /// Worker threads for the episode loop (0 = hardware concurrency).
  std::size_t threads = 1;
  std::optional<std::filesystem::path> output_path;
  ReportFormat report_format = ReportFormat::kJson;

  void validate() const;
};

/// Applies `key = value` entries on top of `config`. Unknown keys and
/// unparsable values raise ConfigError.
void apply_entries(ExperimentConfig& config, const KeyValues& entries);

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const KeyValues& overrides = {});

/// Full resolved configuration, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<EpisodeResult> episodes;
  Aggregate accuracy;
  Aggregate auroc;
  std::string engine_version = kEngineVersion;
  double wall_clock_seconds = 0.0;
};

EmbeddingDataset load_source(const DataSource& source);

/// sample -> preprocess -> fit on support -> score queries -> metrics, per
/// episode. Results are ordered by episode index whatever the thread count.
ExperimentReport run_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config, const EmbeddingDataset& dataset);

/// Runs every config independently, in order. Configs that name the same data
/// source share one loaded dataset.
std::vector<ExperimentReport> run_grid(const std::vector<ExperimentConfig>& configs);

/// Single fold of one episode: the fitted classifier's scores on the queries.
EpisodeResult run_episode(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                          std::uint64_t episode_index);

nlohmann::json report_to_json(const ExperimentReport& report);
nlohmann::json grid_to_json(const std::vector<ExperimentReport>& reports);

/// Flattened aggregate table, one row per report.
std::string reports_to_csv(const std::vector<ExperimentReport>& reports);

/// Ablation layout: one row per label, columns k-shot x (Acc, AuRoc) in
/// percent, k ascending.
std::string grid_table_csv(const std::vector<ExperimentReport>& reports);

/// Grid file: base keys, optional `grid.shots = 1,3,5`, then `[row <label>]`
/// sections whose keys override the base. Expands to rows x shots configs,
/// row-major.
std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path,
                                        const KeyValues& overrides = {});
std::vector<ExperimentConfig> expand_grid(const KeyValueDocument& doc,
                                          const KeyValues& overrides = {});

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace fewshot
