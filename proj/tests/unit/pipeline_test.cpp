#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "readmit/config.hpp"
#include "readmit/error.hpp"
#include "readmit/pipeline.hpp"

using namespace readmit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("readmit_pipeline_test_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small cohort and network so a full run takes a few seconds.
PipelineConfig small(const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> sets{"input.synthetic.n=900",
                                "model.mode=\"fixed\"",
                                "model.mlp.hidden_sizes=[8,4]",
                                "model.mlp.l2=[0.001,0.001]",
                                "model.mlp.learning_rate=0.01",
                                "model.mlp.max_epochs=15",
                                "model.mlp.patience=5",
                                "evaluate.bootstrap_resamples=200",
                                "explain.background_size=20",
                                "explain.max_samples=10",
                                "output_dir=" + nlohmann::json(out.string()).dump()};
  sets.insert(sets.end(), extra.begin(), extra.end());
  return load_config({}, sets);
}

nlohmann::json read(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(Pipeline, StageOrder) {
  const auto& stages = pipeline_stages();
  ASSERT_EQ(stages.size(), 9u);
  EXPECT_EQ(stages.front(), Stage::synth);
  EXPECT_EQ(stages.back(), Stage::report);
  for (const auto s : stages) EXPECT_EQ(parse_stage(to_string(s)), s);
  EXPECT_FALSE(parse_stage("pipeline").has_value());
}

TEST(Pipeline, EvaluateWithoutModelNamesMissingArtifact) {
  const auto dir = scratch("missing");
  const auto c = small(dir);
  run_stage(Stage::synth, c);
  run_stage(Stage::preprocess, c);
  run_stage(Stage::select, c);
  run_stage(Stage::resample, c);
  try {
    run_stage(Stage::evaluate, c);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    EXPECT_NE(e.path().find("model.json"), std::string::npos) << e.path();
  }
  fs::remove_all(dir);
}

TEST(Pipeline, StageByStageRunMatchesFullRun) {
  const auto staged = scratch("staged");
  const auto c = small(staged);
  for (const auto s : pipeline_stages()) run_stage(s, c);
  const auto staged_eval = read(staged / "evaluate" / "eval_report.json");

  const auto full = scratch("full");
  const auto m = run_pipeline(small(full));
  EXPECT_EQ(read(full / "evaluate" / "eval_report.json"), staged_eval);
  EXPECT_TRUE(read(full / "report" / "summary.json").at("leakage_clean").get<bool>());
  const double auroc = staged_eval.at("auroc").get<double>();
  EXPECT_GT(auroc, 0.5);
  EXPECT_LE(auroc, 1.0);
  fs::remove_all(staged);
  fs::remove_all(full);
}

TEST(Pipeline, SingleCellGridEqualsFixedConfig) {
  const auto fixed_dir = scratch("fixed");
  run_pipeline(small(fixed_dir));
  const auto grid_dir = scratch("grid");
  run_pipeline(small(grid_dir, {"model.mode=\"grid\"", "model.grid.learning_rates=[0.01]",
                                "model.grid.l2_scales=[1.0]", "model.grid.hidden_sizes=[[8,4]]",
                                "model.grid.folds=3"}));
  EXPECT_EQ(read(grid_dir / "evaluate" / "eval_report.json"), read(fixed_dir / "evaluate" / "eval_report.json"));
  EXPECT_TRUE(fs::exists(grid_dir / "train" / "cv_table.csv"));
  EXPECT_FALSE(fs::exists(fixed_dir / "train" / "cv_table.csv"));
  fs::remove_all(fixed_dir);
  fs::remove_all(grid_dir);
}

TEST(Pipeline, RerunIsByteIdenticalAndManifestMatchesDisk) {
  const auto dir = scratch("rerun");
  const auto c = small(dir);
  const auto first = run_pipeline(c);
  std::set<std::string> on_disk;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) on_disk.insert(fs::relative(entry.path(), dir).generic_string());
  }
  on_disk.erase("manifest.json");
  std::set<std::string> listed;
  for (const auto& f : first.files) {
    listed.insert(f.path);
    EXPECT_EQ(f.sha256, sha256_file(dir / f.path)) << f.path;
    EXPECT_EQ(f.bytes, fs::file_size(dir / f.path)) << f.path;
  }
  EXPECT_EQ(listed, on_disk);
  const auto stored = read_manifest(dir);
  ASSERT_EQ(stored.files.size(), first.files.size());

  fs::remove_all(dir);
  const auto second = run_pipeline(c);
  ASSERT_EQ(second.files.size(), first.files.size());
  for (std::size_t i = 0; i < first.files.size(); ++i) {
    EXPECT_EQ(second.files[i].path, first.files[i].path);
    EXPECT_EQ(second.files[i].sha256, first.files[i].sha256) << first.files[i].path;
  }
  fs::remove_all(dir);
}

TEST(Pipeline, LeakageAuditCleanAndDetectsPlantedRow) {
  const auto dir = scratch("leak");
  run_pipeline(small(dir));
  const auto audit = audit_leakage(dir);
  EXPECT_TRUE(audit.clean());
  EXPECT_GT(audit.test_rows, 0u);
  EXPECT_FALSE(audit.checked.empty());

  // Plant one test id into the scaler fit record.
  const auto split = read(dir / "preprocess" / "split.json");
  const std::string test_id = split.at("test").at(0).get<std::string>();
  auto rows = read(dir / "preprocess" / "fit_rows.json");
  rows.at("scaler_fit").push_back(test_id);
  std::ofstream(dir / "preprocess" / "fit_rows.json") << rows.dump();
  const auto tainted = audit_leakage(dir);
  ASSERT_EQ(tainted.findings.size(), 1u);
  EXPECT_EQ(tainted.findings[0].row_id, test_id);
  EXPECT_EQ(tainted.findings[0].record, "preprocess.scaler_fit");
  fs::remove_all(dir);
}
