#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "fewshot/runner.hpp"
#include "test_support.hpp"

using namespace fewshot;
using fewshot::testing::read_file;
using fewshot::testing::temp_path;

namespace {

ExperimentConfig synthetic_config(ClassifierKind kind, std::size_t episodes = 50) {
  ExperimentConfig c;
  SyntheticSpec s;
  s.n_classes = 5;
  s.dim = 16;
  s.groups_per_class = 40;
  s.class_center_norm = 10.0;
  s.noise_sigma = 0.1;
  s.seed = 3;
  c.data.synthetic = s;
  c.episode = {2, 5, 15, false, 17};
  c.classifier.kind = kind;
  c.episodes = episodes;
  return c;
}

std::string without_wall_clock(nlohmann::json j) {
  if (j.contains("reports")) {
    for (auto& r : j["reports"]) r.erase("wall_clock_seconds");
  } else {
    j.erase("wall_clock_seconds");
  }
  return j.dump();
}

KeyValueDocument doc_from(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

}  // namespace

TEST(ConfigFile, ParsesKeysSectionsAndComments) {
  const auto doc = doc_from(
      "# experiment\n"
      "classifier = logistic   # base learner\n"
      "episodes=10\n"
      "\n"
      "[row LR + L2]\n"
      "preprocess.l2_normalize = true\n");
  ASSERT_EQ(doc.base.size(), 2u);
  EXPECT_EQ(doc.base[0], (std::pair<std::string, std::string>{"classifier", "logistic"}));
  ASSERT_EQ(doc.sections.size(), 1u);
  EXPECT_EQ(doc.sections[0].kind, "row");
  EXPECT_EQ(doc.sections[0].name, "LR + L2");
  EXPECT_EQ(doc.sections[0].entries.size(), 1u);
}

TEST(ConfigFile, Errors) {
  EXPECT_THROW(doc_from("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(doc_from("just words\n"), ConfigError);
  EXPECT_THROW(doc_from("[row\n"), ConfigError);
  EXPECT_THROW(split_assignment("novalue"), ConfigError);
  ExperimentConfig c;
  EXPECT_THROW(apply_entries(c, {{"no.such.key", "1"}}), ConfigError);
  EXPECT_THROW(apply_entries(c, {{"episodes", "ten"}}), ConfigError);
  EXPECT_THROW(apply_entries(c, {{"episode.aug_expand", "maybe"}}), ConfigError);
  EXPECT_THROW(apply_entries(c, {{"classifier", "forest"}}), ConfigError);
}

TEST(ExperimentConfig, ExactlyOneDataSource) {
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), ConfigError);
  apply_entries(c, {{"data.path", "x.fseb"}, {"synthetic.classes", "3"}});
  EXPECT_THROW(c.validate(), ConfigError);
  ExperimentConfig ok;
  apply_entries(ok, {{"synthetic.classes", "3"}});
  EXPECT_NO_THROW(ok.validate());
  ok.episodes = 0;
  EXPECT_THROW(ok.validate(), ConfigError);
}

TEST(ExperimentConfig, EchoIncludesDefaults) {
  ExperimentConfig c;
  apply_entries(c, {{"synthetic.classes", "3"}});
  const auto j = config_to_json(c);
  EXPECT_EQ(j["episode"]["q_query"], 15);
  EXPECT_EQ(j["episodes"], 600);
  EXPECT_EQ(j["solver"]["l2_strength"], "auto");
  EXPECT_EQ(j["knn"]["k"], 1);
  EXPECT_EQ(j["tree"]["max_depth"], "none");
  EXPECT_EQ(j["data"]["synthetic"]["classes"], 3);
}

TEST(RunExperiment, SingleEpisode) {
  const auto report = run_experiment(synthetic_config(ClassifierKind::kPrototype, 1));
  ASSERT_EQ(report.episodes.size(), 1u);
  EXPECT_EQ(report.accuracy.episodes, 1u);
  EXPECT_EQ(report.accuracy.ci95_halfwidth, 0.0);
}

// With sigma = 0.01 * center_norm the class clusters do not overlap: the
// nearest true center (Bayes rule for equal isotropic Gaussians) labels every
// query of the same draws correctly, and the prototype engine must agree.
TEST(RunExperiment, WellSeparatedPrototypeAccuracy) {
  auto config = synthetic_config(ClassifierKind::kPrototype, 200);
  config.data.synthetic->noise_sigma = 0.01 * config.data.synthetic->class_center_norm;
  const auto dataset = load_source(config.data);
  const auto centers = synthetic_class_centers(*config.data.synthetic);

  std::size_t oracle_hits = 0;
  std::size_t total = 0;
  for (std::uint64_t i = 0; i < config.episodes; ++i) {
    const auto ep = sample_episode(dataset, config.episode, i);
    for (const auto& q : ep.query) {
      std::uint32_t best = 0;
      double best_d = 1e300;
      for (const auto& [label, local] : ep.class_map) {
        const double d = euclidean_distance(q.vector, centers[label]);
        if (d < best_d) best_d = d, best = label;
      }
      oracle_hits += best == q.class_label ? 1 : 0;
      ++total;
    }
  }
  EXPECT_EQ(oracle_hits, total);

  const auto report = run_experiment(config, dataset);
  EXPECT_GE(report.accuracy.mean, 0.99);
}

TEST(RunExperiment, DeterministicAndThreadIndependent) {
  auto config = synthetic_config(ClassifierKind::kLogistic, 40);
  const auto a = run_experiment(config);
  const auto b = run_experiment(config);
  config.threads = 3;
  const auto c = run_experiment(config);
  config.threads = 1;
  EXPECT_EQ(without_wall_clock(report_to_json(a)), without_wall_clock(report_to_json(b)));
  auto jc = report_to_json(c);
  jc["config"]["threads"] = 1;
  EXPECT_EQ(without_wall_clock(report_to_json(a)), without_wall_clock(jc));
}

TEST(RunExperiment, AggregatesRecomputableFromSerializedEpisodes) {
  const auto report = run_experiment(synthetic_config(ClassifierKind::kSvm, 30));
  const auto j = nlohmann::json::parse(report_to_json(report).dump());
  std::vector<EpisodeResult> episodes;
  for (const auto& e : j["episodes"]) {
    EpisodeResult r;
    r.macro_accuracy = e["macro_accuracy"];
    r.macro_auroc = e["macro_auroc"];
    episodes.push_back(r);
  }
  const auto [acc, auc] = aggregate(episodes);
  EXPECT_NEAR(acc.mean, j["aggregates"]["accuracy"]["mean"].get<double>(), 1e-12);
  EXPECT_NEAR(acc.std_dev, j["aggregates"]["accuracy"]["std_dev"].get<double>(), 1e-12);
  EXPECT_NEAR(auc.mean, j["aggregates"]["auroc"]["mean"].get<double>(), 1e-12);
  EXPECT_NEAR(auc.ci95_halfwidth, j["aggregates"]["auroc"]["ci95_halfwidth"].get<double>(), 1e-12);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["engine_version"], kEngineVersion);
}

TEST(RunExperiment, ErrorsCarryEpisodeIndex) {
  auto config = synthetic_config(ClassifierKind::kPrototype, 5);
  config.episode.k_shot = 30;
  config.episode.q_query = 15;
  try {
    run_experiment(config);
    FAIL() << "expected EpisodeError";
  } catch (const EpisodeError& e) {
    EXPECT_EQ(e.episode_index(), 0u);
    EXPECT_NE(std::string(e.what()).find("groups"), std::string::npos);
  }
}

TEST(RunGrid, EmptyAndIsolation) {
  EXPECT_TRUE(run_grid({}).empty());
  auto lr = synthetic_config(ClassifierKind::kLogistic, 20);
  lr.label = "LR";
  auto lr_l2 = lr;
  lr_l2.label = "LR + L2";
  lr_l2.preprocess.l2_normalize = true;
  const auto reports = run_grid({lr, lr_l2});
  ASSERT_EQ(reports.size(), 2u);
  auto ja = config_to_json(reports[0].config);
  auto jb = config_to_json(reports[1].config);
  EXPECT_NE(ja, jb);
  jb["preprocess"]["l2_normalize"] = false;
  jb["label"] = "LR";
  EXPECT_EQ(ja, jb);
  EXPECT_EQ(without_wall_clock(report_to_json(reports[0])),
            without_wall_clock(report_to_json(run_experiment(lr))));
}

TEST(RunGrid, ExpansionAndTableLayout) {
  const auto doc = doc_from(
      "synthetic.classes = 3\n"
      "synthetic.noise_sigma = 2\n"
      "episodes = 5\n"
      "episode.q_query = 5\n"
      "grid.shots = 1, 5\n"
      "[row DT]\nclassifier = tree\n"
      "[row NN]\nclassifier = knn\n"
      "[row LR + L2-Norm]\nclassifier = logistic\npreprocess.l2_normalize = true\n");
  const auto configs = expand_grid(doc);
  ASSERT_EQ(configs.size(), 6u);
  EXPECT_EQ(configs[0].label, "DT");
  EXPECT_EQ(configs[0].episode.k_shot, 1u);
  EXPECT_EQ(configs[1].episode.k_shot, 5u);
  EXPECT_EQ(configs[5].classifier.kind, ClassifierKind::kLogistic);
  EXPECT_TRUE(configs[5].preprocess.l2_normalize);
  EXPECT_FALSE(configs[0].preprocess.l2_normalize);

  const auto table = grid_table_csv(run_grid(configs));
  std::istringstream lines(table);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "row,1-shot Acc,1-shot AuRoc,5-shot Acc,5-shot AuRoc");
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].substr(0, 3), "DT,");
  EXPECT_EQ(rows[2].substr(0, 13), "LR + L2-Norm,");
  EXPECT_EQ(std::count(rows[1].begin(), rows[1].end(), ','), 4);
}

TEST(RunGrid, DefaultShotsIncludeThree) {
  const auto configs = expand_grid(doc_from("synthetic.classes = 3\n"));
  ASSERT_EQ(configs.size(), 3u);
  EXPECT_EQ(configs[1].episode.k_shot, 3u);
}

TEST(Reports, CsvFlattenedAggregates) {
  auto config = synthetic_config(ClassifierKind::kKnn, 3);
  config.label = "nn, k=1";
  const auto csv = reports_to_csv({run_experiment(config)});
  std::istringstream in(csv);
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header.substr(0, 17), "label,classifier,");
  EXPECT_EQ(row.substr(0, 14), "\"nn, k=1\",knn,");
}

// ---------------------------------------------------------------------------
// CLI surface

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FSL_BINARY) + " " + args + " 2>/dev/null";
  return std::system(cmd.c_str());
}

}  // namespace

TEST(Cli, GenInspectRunGrid) {
  const auto data = temp_path("cli.fseb");
  const auto manifest = temp_path("cli_manifest.json");
  ASSERT_EQ(run_cli("gen --classes 4 --dim 8 --groups 30 --sigma 0.5 --seed 2 -o " + data.string()), 0);
  const auto ds = load_dataset(data, DatasetFormat::kBinary);
  EXPECT_EQ(ds.size(), 120u);

  ASSERT_EQ(run_cli("inspect -d " + data.string() + " --episodes 3 --k-shot 2 --manifest " +
                    manifest.string() + " > /dev/null"),
            0);
  const auto m = nlohmann::json::parse(read_file(manifest));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0]["support"].size(), 4u);

  const auto cfg = temp_path("cli_run.cfg");
  write_text_file(cfg, "data.path = " + data.string() +
                           "\ndata.format = binary\nclassifier = svm\nepisodes = 20\n");
  const auto report = temp_path("cli_report.json");
  ASSERT_EQ(run_cli("run -c " + cfg.string() + " --set episode.k_shot=3 -o " + report.string()), 0);
  const auto j = nlohmann::json::parse(read_file(report));
  EXPECT_EQ(j["config"]["episode"]["k_shot"], 3);
  EXPECT_EQ(j["episodes"].size(), 20u);

  const auto csv = temp_path("cli_report.csv");
  ASSERT_EQ(run_cli("run -c " + cfg.string() + " --format csv -o " + csv.string()), 0);
  EXPECT_EQ(read_file(csv).substr(0, 6), "label,");

  const auto grid = temp_path("cli_grid.cfg");
  write_text_file(grid, "data.path = " + data.string() +
                            "\nepisodes = 5\ngrid.shots = 1,5\n[row LR]\nclassifier = lr\n"
                            "[row LR + L2-Norm]\nclassifier = lr\npreprocess.l2_normalize = true\n");
  const auto table = temp_path("cli_table.csv");
  const auto grid_json = temp_path("cli_grid.json");
  ASSERT_EQ(run_cli("grid -c " + grid.string() + " -o " + grid_json.string() + " --table " +
                    table.string()),
            0);
  EXPECT_EQ(nlohmann::json::parse(read_file(grid_json))["reports"].size(), 4u);
  EXPECT_NE(read_file(table).find("LR + L2-Norm"), std::string::npos);

  EXPECT_NE(run_cli("run -c " + cfg.string() + " --set episode.n_way=9"), 0);
}
