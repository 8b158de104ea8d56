// fsl: command-line front end for the few-shot evaluation engine.
//
//   fsl run     -c experiment.cfg [--set key=value ...] [-o report.json]
//   fsl grid    -c ablation.cfg   [--set key=value ...] [-o grid.json] [--table table.csv]
//   fsl gen     --classes 5 --dim 16 ... -o data.fseb [--format binary|csv]
//   fsl inspect -d data.fseb [--episodes 3 --manifest episodes.json]

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fewshot/runner.hpp"

namespace {

using namespace fewshot;

KeyValues parse_overrides(const std::vector<std::string>& sets) {
  KeyValues out;
  for (const auto& s : sets) out.push_back(split_assignment(s));
  return out;
}

void print_summary(const ExperimentReport& r, std::ostream& os) {
  os << (r.config.label.empty() ? to_string(r.config.classifier.kind) : r.config.label) << "  "
     << r.config.episode.n_way << "-way " << r.config.episode.k_shot << "-shot  acc "
     << 100.0 * r.accuracy.mean << " +/- " << 100.0 * r.accuracy.ci95_halfwidth << "  auroc "
     << 100.0 * r.auroc.mean << " +/- " << 100.0 * r.auroc.ci95_halfwidth << "  ("
     << r.accuracy.episodes << " episodes)\n";
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            const std::string& out_path, const std::string& format) {
  auto overrides = parse_overrides(sets);
  if (!out_path.empty()) overrides.emplace_back("output.path", out_path);
  if (!format.empty()) overrides.emplace_back("output.format", format);
  const auto config = load_experiment_config(config_path, overrides);
  const auto report = run_experiment(config);
  const std::string text = config.report_format == ReportFormat::kJson
                               ? report_to_json(report).dump(2) + "\n"
                               : reports_to_csv({report});
  if (config.output_path && !config.output_path->empty()) {
    write_text_file(*config.output_path, text);
  } else {
    std::cout << text;
  }
  print_summary(report, std::cerr);
  return 0;
}

int cmd_grid(const std::string& config_path, const std::vector<std::string>& sets,
             const std::string& out_path, const std::string& table_path) {
  const auto configs = load_grid(config_path, parse_overrides(sets));
  const auto reports = run_grid(configs);
  for (const auto& r : reports) print_summary(r, std::cerr);
  if (!out_path.empty()) write_text_file(out_path, grid_to_json(reports).dump(2) + "\n");
  const auto table = grid_table_csv(reports);
  if (!table_path.empty()) {
    write_text_file(table_path, table);
  } else {
    std::cout << table;
  }
  return 0;
}

int cmd_inspect(const std::string& data_path, const std::string& format, EpisodeConfig episode,
                std::size_t episodes, const std::string& manifest_path) {
  const auto dataset = load_dataset(data_path, parse_dataset_format(format));
  std::cout << "dim: " << dataset.dim() << "\nrecords: " << dataset.size()
            << "\nclasses: " << dataset.class_index().size() << '\n';
  for (const auto& [label, groups] : dataset.class_index()) {
    std::size_t records = 0;
    std::size_t largest = 0;
    for (auto g : groups) {
      records += dataset.group_members(g).size();
      largest = std::max(largest, dataset.group_members(g).size());
    }
    std::cout << "  class " << label << ": " << groups.size() << " groups, " << records
              << " records, largest group " << largest << '\n';
  }
  if (episodes > 0) {
    const auto manifest = episode_manifest_json(sample_episodes(dataset, episode, episodes));
    if (manifest_path.empty()) {
      std::cout << manifest << '\n';
    } else {
      write_text_file(manifest_path, manifest + "\n");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Episodic few-shot evaluation over embedding datasets"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string format;
  std::string table_path;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("-c,--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", sets, "Override a config key (key=value), repeatable");
  run->add_option("-o,--out", out_path, "Report output path (default: stdout)");
  run->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));

  auto* grid = app.add_subcommand("grid", "Run an ablation grid file");
  grid->add_option("-c,--config", config_path, "Grid file")->required()->check(CLI::ExistingFile);
  grid->add_option("--set", sets, "Override a key in every grid cell (key=value)");
  grid->add_option("-o,--out", out_path, "Write all reports as one JSON document");
  grid->add_option("--table", table_path, "Write the ablation table CSV (default: stdout)");

  SyntheticSpec spec;
  std::string gen_format = "binary";
  auto* gen = app.add_subcommand("gen", "Generate a synthetic embedding dataset");
  gen->add_option("--classes", spec.n_classes, "Number of classes")->capture_default_str();
  gen->add_option("--dim", spec.dim, "Embedding dimensionality")->capture_default_str();
  gen->add_option("--groups", spec.groups_per_class, "Groups (source images) per class")->capture_default_str();
  gen->add_option("--center-norm", spec.class_center_norm, "Distance of class centers from origin")->capture_default_str();
  gen->add_option("--sigma", spec.noise_sigma, "Isotropic noise scale")->capture_default_str();
  gen->add_option("--seed", spec.seed, "RNG seed")->capture_default_str();
  gen->add_option("--augment-copies", spec.augment_copies, "Perturbed copies per group")->capture_default_str();
  gen->add_option("--augment-sigma", spec.augment_sigma, "Copy perturbation scale")->capture_default_str();
  gen->add_option("--nuisance-rank", spec.nuisance_rank, "Rank of the shared nuisance subspace")->capture_default_str();
  gen->add_option("--nuisance-sigma", spec.nuisance_sigma, "Nuisance scale")->capture_default_str();
  gen->add_option("-o,--out", out_path, "Output file")->required();
  gen->add_option("--format", gen_format, "Output format")->check(CLI::IsMember({"binary", "csv"}))->capture_default_str();

  EpisodeConfig episode;
  std::size_t inspect_episodes = 0;
  std::string data_path;
  std::string data_format = "binary";
  std::string manifest_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset and dump episode manifests");
  inspect->add_option("-d,--data", data_path, "Dataset file")->required()->check(CLI::ExistingFile);
  inspect->add_option("--format", data_format, "Dataset format")->check(CLI::IsMember({"binary", "csv"}))->capture_default_str();
  inspect->add_option("--episodes", inspect_episodes, "Episodes to sample into the manifest")->capture_default_str();
  inspect->add_option("--n-way", episode.n_way)->capture_default_str();
  inspect->add_option("--k-shot", episode.k_shot)->capture_default_str();
  inspect->add_option("--q-query", episode.q_query)->capture_default_str();
  inspect->add_flag("--aug-expand", episode.aug_expand, "Expand support groups to all records");
  inspect->add_option("--seed", episode.seed)->capture_default_str();
  inspect->add_option("--manifest", manifest_path, "Manifest output (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, sets, out_path, format);
    if (*grid) return cmd_grid(config_path, sets, out_path, table_path);
    if (*gen) {
      save_dataset(generate_synthetic(spec), out_path, parse_dataset_format(gen_format));
      return 0;
    }
    if (*inspect) {
      return cmd_inspect(data_path, data_format, episode, inspect_episodes, manifest_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "fsl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
