#include "fewshot/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace fewshot {

EpisodeError::EpisodeError(std::uint64_t episode_index, const std::string& cause)
    : std::runtime_error("episode " + std::to_string(episode_index) + ": " + cause),
      episode_index_(episode_index) {}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("bad boolean '" + value + "' for " + key);
}

SyntheticSpec& synthetic(ExperimentConfig& c) {
  if (!c.data.synthetic) c.data.synthetic.emplace();
  return *c.data.synthetic;
}

}  // namespace

void apply_entries(ExperimentConfig& c, const KeyValues& entries) {
  for (const auto& [key, value] : entries) {
    const auto sz = [&] { return parse_number<std::size_t>(key, value); };
    const auto real = [&] { return parse_number<double>(key, value); };
    try {
      if (key == "label") c.label = value;
      else if (key == "episodes") c.episodes = sz();
      else if (key == "threads") c.threads = sz();
      else if (key == "output.path") c.output_path = value;
      else if (key == "output.format") {
        if (value == "json") c.report_format = ReportFormat::kJson;
        else if (value == "csv") c.report_format = ReportFormat::kCsv;
        else throw ConfigError("output.format must be json|csv");
      }
      else if (key == "data.path") c.data.path = value;
      else if (key == "data.format") c.data.format = parse_dataset_format(value);
      else if (key == "synthetic.classes") synthetic(c).n_classes = parse_number<std::uint32_t>(key, value);
      else if (key == "synthetic.dim") synthetic(c).dim = sz();
      else if (key == "synthetic.groups_per_class") synthetic(c).groups_per_class = sz();
      else if (key == "synthetic.center_norm") synthetic(c).class_center_norm = real();
      else if (key == "synthetic.noise_sigma") synthetic(c).noise_sigma = real();
      else if (key == "synthetic.seed") synthetic(c).seed = parse_number<std::uint64_t>(key, value);
      else if (key == "synthetic.augment_copies") synthetic(c).augment_copies = sz();
      else if (key == "synthetic.augment_sigma") synthetic(c).augment_sigma = real();
      else if (key == "synthetic.nuisance_rank") synthetic(c).nuisance_rank = sz();
      else if (key == "synthetic.nuisance_sigma") synthetic(c).nuisance_sigma = real();
      else if (key == "episode.n_way") c.episode.n_way = sz();
      else if (key == "episode.k_shot") c.episode.k_shot = sz();
      else if (key == "episode.q_query") c.episode.q_query = sz();
      else if (key == "episode.aug_expand") c.episode.aug_expand = parse_bool(key, value);
      else if (key == "episode.seed") c.episode.seed = parse_number<std::uint64_t>(key, value);
      else if (key == "preprocess.l2_normalize") c.preprocess.l2_normalize = parse_bool(key, value);
      else if (key == "preprocess.epsilon") c.preprocess.epsilon = real();
      else if (key == "classifier") c.classifier.kind = parse_classifier_kind(value);
      else if (key == "solver.l2_strength") {
        if (value == "auto") c.classifier.solver.l2_strength.reset();
        else c.classifier.solver.l2_strength = real();
      }
      else if (key == "solver.max_iters") c.classifier.solver.max_iters = sz();
      else if (key == "solver.tolerance") c.classifier.solver.tolerance = real();
      else if (key == "solver.learning_rate") c.classifier.solver.learning_rate = real();
      else if (key == "tree.max_depth") {
        if (value == "none") c.classifier.tree.max_depth.reset();
        else c.classifier.tree.max_depth = sz();
      }
      else if (key == "tree.min_split") c.classifier.tree.min_split = sz();
      else if (key == "knn.k") c.classifier.knn_k = sz();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
}

void ExperimentConfig::validate() const {
  if (data.path.has_value() == data.synthetic.has_value()) {
    throw ConfigError("exactly one data source required: data.path or synthetic.*");
  }
  if (data.synthetic) data.synthetic->validate();
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  episode.validate();
  preprocess.validate();
  classifier.solver.validate();
  if (classifier.tree.min_split < 2) throw ConfigError("tree.min_split must be >= 2");
  if (classifier.knn_k < 1) throw ConfigError("knn.k must be >= 1");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const KeyValues& overrides) {
  const auto doc = parse_key_values_file(path);
  if (!doc.sections.empty()) throw ConfigError("sections are only allowed in grid files");
  ExperimentConfig config;
  apply_entries(config, doc.base);
  apply_entries(config, overrides);
  config.validate();
  return config;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json data;
  if (c.data.path) {
    data = {{"path", c.data.path->string()}, {"format", to_string(c.data.format)}};
  } else if (c.data.synthetic) {
    const auto& s = *c.data.synthetic;
    data = {{"synthetic",
             {{"classes", s.n_classes},
              {"dim", s.dim},
              {"groups_per_class", s.groups_per_class},
              {"center_norm", s.class_center_norm},
              {"noise_sigma", s.noise_sigma},
              {"seed", s.seed},
              {"augment_copies", s.augment_copies},
              {"augment_sigma", s.augment_sigma},
              {"nuisance_rank", s.nuisance_rank},
              {"nuisance_sigma", s.nuisance_sigma}}}};
  }
  const auto& sol = c.classifier.solver;
  nlohmann::json solver = {{"l2_strength", sol.l2_strength ? nlohmann::json(*sol.l2_strength)
                                                           : nlohmann::json("auto")},
                           {"max_iters", sol.max_iters},
                           {"tolerance", sol.tolerance},
                           {"learning_rate", sol.learning_rate}};
  const auto& tree = c.classifier.tree;
  return {{"label", c.label},
          {"data", data},
          {"episode",
           {{"n_way", c.episode.n_way},
            {"k_shot", c.episode.k_shot},
            {"q_query", c.episode.q_query},
            {"aug_expand", c.episode.aug_expand},
            {"seed", c.episode.seed}}},
          {"preprocess",
           {{"l2_normalize", c.preprocess.l2_normalize}, {"epsilon", c.preprocess.epsilon}}},
          {"classifier", to_string(c.classifier.kind)},
          {"solver", solver},
          {"tree",
           {{"max_depth", tree.max_depth ? nlohmann::json(*tree.max_depth) : nlohmann::json("none")},
            {"min_split", tree.min_split}}},
          {"knn", {{"k", c.classifier.knn_k}}},
          {"episodes", c.episodes},
          {"threads", c.threads},
          {"output",
           {{"path", c.output_path ? c.output_path->string() : std::string{}},
            {"format", c.report_format == ReportFormat::kJson ? "json" : "csv"}}}};
}

// ---------------------------------------------------------------------------
// Execution

EmbeddingDataset load_source(const DataSource& source) {
  if (source.synthetic) return generate_synthetic(*source.synthetic);
  if (source.path) return load_dataset(*source.path, source.format);
  throw ConfigError("no data source configured");
}

EpisodeResult run_episode(const ExperimentConfig& config, const EmbeddingDataset& dataset,
                          std::uint64_t episode_index) {
  try {
    auto episode = apply_preprocess(sample_episode(dataset, config.episode, episode_index),
                                    config.preprocess);
    const auto support = support_set(episode);
    const auto classifier = fit_classifier(config.classifier, support);
    const auto scores = predict_scores(classifier, query_features(episode));
    return evaluate_episode(episode_index, scores, episode.query_labels(), episode.n_way());
  } catch (const EpisodeError&) {
    throw;
  } catch (const std::exception& e) {
    throw EpisodeError(episode_index, e.what());
  }
}

ExperimentReport run_experiment(const ExperimentConfig& config, const EmbeddingDataset& dataset) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.config = config;
  report.episodes.resize(config.episodes);

  std::size_t threads = config.threads == 0 ? std::thread::hardware_concurrency() : config.threads;
  threads = std::clamp<std::size_t>(threads, 1, config.episodes);
  if (threads == 1) {
    for (std::size_t i = 0; i < config.episodes; ++i) report.episodes[i] = run_episode(config, dataset, i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::optional<std::size_t> failed_index;
    std::exception_ptr failure;
    {
      std::vector<std::jthread> workers;
      for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
          for (std::size_t i = next++; i < config.episodes; i = next++) {
            try {
              report.episodes[i] = run_episode(config, dataset, i);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              // Report the lowest failing index, matching serial execution.
              if (!failed_index || i < *failed_index) {
                failed_index = i;
                failure = std::current_exception();
              }
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::tie(report.accuracy, report.auroc) = aggregate(report.episodes);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, load_source(config.data));
}

std::vector<ExperimentReport> run_grid(const std::vector<ExperimentConfig>& configs) {
  std::map<std::string, EmbeddingDataset> cache;
  std::vector<ExperimentReport> reports;
  reports.reserve(configs.size());
  for (const auto& config : configs) {
    config.validate();
    const std::string key = config_to_json(config)["data"].dump();
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, load_source(config.data)).first;
    reports.push_back(run_experiment(config, it->second));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json aggregate_to_json(const Aggregate& a) {
  return {{"mean", a.mean},
          {"std_dev", a.std_dev},
          {"ci95_halfwidth", a.ci95_halfwidth},
          {"episodes", a.episodes}};
}

std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), static_cast<std::size_t>(res.ptr - buf.data())};
}

std::string format_percent(double fraction) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", 100.0 * fraction);
  return buf.data();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
  auto episodes = nlohmann::json::array();
  for (const auto& r : report.episodes) {
    episodes.push_back({{"episode_index", r.episode_index},
                        {"macro_accuracy", r.macro_accuracy},
                        {"macro_auroc", r.macro_auroc},
                        {"per_class_accuracy", r.per_class_accuracy},
                        {"n_correct", r.n_correct},
                        {"n_total", r.n_total}});
  }
  return {{"schema", "fewshot.report"},
          {"schema_version", kReportSchemaVersion},
          {"engine_version", report.engine_version},
          {"config", config_to_json(report.config)},
          {"metadata",
           {{"auroc_averaging", "per-episode macro one-vs-rest, then mean over episodes"},
            {"accuracy_averaging", "per-episode macro recall, then mean over episodes"},
            {"std_dev", "sample (n-1)"},
            {"ci95", "1.96 * std_dev / sqrt(episodes)"}}},
          {"episodes", std::move(episodes)},
          {"aggregates",
           {{"accuracy", aggregate_to_json(report.accuracy)},
            {"auroc", aggregate_to_json(report.auroc)}}},
          {"wall_clock_seconds", report.wall_clock_seconds}};
}

nlohmann::json grid_to_json(const std::vector<ExperimentReport>& reports) {
  auto list = nlohmann::json::array();
  for (const auto& r : reports) list.push_back(report_to_json(r));
  return {{"schema", "fewshot.grid"},
          {"schema_version", kReportSchemaVersion},
          {"engine_version", kEngineVersion},
          {"reports", std::move(list)}};
}

std::string reports_to_csv(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  out << "label,classifier,n_way,k_shot,q_query,l2_normalize,aug_expand,episodes,"
         "accuracy_mean,accuracy_std,accuracy_ci95,auroc_mean,auroc_std,auroc_ci95\n";
  for (const auto& r : reports) {
    const auto& c = r.config;
    out << csv_field(c.label) << ',' << to_string(c.classifier.kind) << ',' << c.episode.n_way
        << ',' << c.episode.k_shot << ',' << c.episode.q_query << ','
        << (c.preprocess.l2_normalize ? "true" : "false") << ','
        << (c.episode.aug_expand ? "true" : "false") << ',' << r.accuracy.episodes << ','
        << format_real(r.accuracy.mean) << ',' << format_real(r.accuracy.std_dev) << ','
        << format_real(r.accuracy.ci95_halfwidth) << ',' << format_real(r.auroc.mean) << ','
        << format_real(r.auroc.std_dev) << ',' << format_real(r.auroc.ci95_halfwidth) << '\n';
  }
  return out.str();
}

std::string grid_table_csv(const std::vector<ExperimentReport>& reports) {
  std::vector<std::size_t> shots;
  std::vector<std::string> labels;
  std::map<std::pair<std::string, std::size_t>, const ExperimentReport*> cell;
  for (const auto& r : reports) {
    const auto k = r.config.episode.k_shot;
    if (std::find(shots.begin(), shots.end(), k) == shots.end()) shots.push_back(k);
    if (std::find(labels.begin(), labels.end(), r.config.label) == labels.end()) {
      labels.push_back(r.config.label);
    }
    cell[{r.config.label, k}] = &r;
  }
  std::sort(shots.begin(), shots.end());

  std::ostringstream out;
  out << "row";
  for (auto k : shots) out << ',' << k << "-shot Acc," << k << "-shot AuRoc";
  out << '\n';
  for (const auto& label : labels) {
    out << csv_field(label);
    for (auto k : shots) {
      const auto it = cell.find({label, k});
      if (it == cell.end()) {
        out << ",,";
      } else {
        out << ',' << format_percent(it->second->accuracy.mean) << ','
            << format_percent(it->second->auroc.mean);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<ExperimentConfig> expand_grid(const KeyValueDocument& doc, const KeyValues& overrides) {
  KeyValues base;
  std::vector<std::size_t> shots = {1, 3, 5};
  for (const auto& [key, value] : doc.base) {
    if (key != "grid.shots") {
      base.emplace_back(key, value);
      continue;
    }
    shots.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto first = item.find_first_not_of(" \t");
      const auto last = item.find_last_not_of(" \t");
      if (first == std::string::npos) throw ConfigError("empty entry in grid.shots");
      shots.push_back(parse_number<std::size_t>(key, item.substr(first, last - first + 1)));
    }
  }

  std::vector<const KeyValueDocument::Section*> rows;
  for (const auto& s : doc.sections) {
    if (s.kind != "row") throw ConfigError("unknown section kind '" + s.kind + "'");
    rows.push_back(&s);
  }

  std::vector<ExperimentConfig> configs;
  const auto emit = [&](const KeyValues* row_entries, const std::string& row_label) {
    for (auto k : shots) {
      ExperimentConfig c;
      apply_entries(c, base);
      if (row_entries) apply_entries(c, *row_entries);
      apply_entries(c, overrides);
      if (!row_label.empty()) c.label = row_label;
      c.episode.k_shot = k;
      c.validate();
      configs.push_back(std::move(c));
    }
  };
  if (rows.empty()) {
    emit(nullptr, "");
  } else {
    for (const auto* row : rows) emit(&row->entries, row->name);
  }
  return configs;
}

std::vector<ExperimentConfig> load_grid(const std::filesystem::path& path,
                                        const KeyValues& overrides) {
  return expand_grid(parse_key_values_file(path), overrides);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fewshot
