// Command-line driver: one subcommand per pipeline stage plus `pipeline`.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "readmit/config.hpp"
#include "readmit/error.hpp"
#include "readmit/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kConfig = 2, kMissing = 3, kNumeric = 4 };

void print_summary(const std::filesystem::path& out) {
  std::ifstream in(out / "report" / "summary.txt");
  if (in) std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ICU readmission risk pipeline on tabular cohorts"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "generate the synthetic cohort (or ingest input.path)"},
      {"preprocess", "split, impute with train-fitted imputers, fit the scaler"},
      {"stats", "group comparison tables and VIF screening"},
      {"select", "recursive feature elimination plus pinned features"},
      {"resample", "rebalance the training partition"},
      {"train", "grid search or fixed-config network training"},
      {"evaluate", "held-out metrics, bootstrap CI and ROC points"},
      {"explain", "Shapley attributions on test rows"},
      {"report", "summary and leakage audit"},
      {"pipeline", "run every stage in order"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config document");
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "global seed (overrides seed)");
    sub->add_option("--set", sets, "override a config field: dotted.key=value")->take_all();
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (!out_dir.empty()) sets.push_back("output_dir=" + nlohmann::json(out_dir).dump());
    if (seed) sets.push_back("seed=" + std::to_string(*seed));
    const readmit::PipelineConfig config = readmit::load_config(config_path, sets);
    if (command == "pipeline") {
      const auto manifest = readmit::run_pipeline(config);
      print_summary(config.output_dir);
      std::cout << "wrote " << manifest.files.size() << " files to " << config.output_dir.string() << "\n";
    } else {
      readmit::run_stage(*readmit::parse_stage(command), config);
      if (command == "report") print_summary(config.output_dir);
    }
    return kOk;
  } catch (const readmit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const readmit::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const readmit::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const readmit::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}
