#include "readmit/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "readmit/cohort.hpp"
#include "readmit/csv.hpp"
#include "readmit/error.hpp"
#include "readmit/eval.hpp"
#include "readmit/explain.hpp"
#include "readmit/nnet.hpp"
#include "readmit/preprocess.hpp"
#include "readmit/random.hpp"
#include "readmit/resample.hpp"
#include "readmit/select.hpp"
#include "readmit/stats.hpp"
#include "util.hpp"

#ifndef READMIT_VERSION
#define READMIT_VERSION "unknown"
#endif

namespace readmit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 9> kStageNames{{
    {Stage::synth, "synth"},
    {Stage::preprocess, "preprocess"},
    {Stage::stats, "stats"},
    {Stage::select, "select"},
    {Stage::resample, "resample"},
    {Stage::train, "train"},
    {Stage::evaluate, "evaluate"},
    {Stage::explain, "explain"},
    {Stage::report, "report"},
}};

constexpr const char* kManifest = "manifest.json";
constexpr const char* kLeakage = "leakage_audit.json";

// Fixed artifact layout, one subdirectory per stage.
struct Layout {
  fs::path root;

  fs::path cohort() const { return root / "synth" / "cohort.csv"; }
  fs::path schema() const { return root / "synth" / "schema.json"; }
  fs::path synth_spec() const { return root / "synth" / "synth_spec.json"; }
  fs::path split() const { return root / "preprocess" / "split.json"; }
  fs::path missingness() const { return root / "preprocess" / "missingness.json"; }
  fs::path train() const { return root / "preprocess" / "train.csv"; }
  fs::path test() const { return root / "preprocess" / "test.csv"; }
  fs::path scaler() const { return root / "preprocess" / "scaler.json"; }
  fs::path stats(const char* file) const { return root / "stats" / file; }
  fs::path selection() const { return root / "select" / "selection.json"; }
  fs::path resampled() const { return root / "resample" / "train_resampled.csv"; }
  fs::path resample_audit() const { return root / "resample" / "resample_audit.json"; }
  fs::path model() const { return root / "train" / "model.json"; }
  fs::path train_report() const { return root / "train" / "train_report.json"; }
  fs::path cv_csv() const { return root / "train" / "cv_table.csv"; }
  fs::path cv_json() const { return root / "train" / "cv_table.json"; }
  fs::path eval_report() const { return root / "evaluate" / "eval_report.json"; }
  fs::path roc() const { return root / "evaluate" / "roc_points.csv"; }
  fs::path predictions() const { return root / "evaluate" / "test_predictions.csv"; }
  fs::path shap_summary() const { return root / "explain" / "shap_summary.json"; }
  fs::path shap_ranking() const { return root / "explain" / "shap_ranking.csv"; }
  fs::path shap_points() const { return root / "explain" / "shap_points.csv"; }
  fs::path report_json() const { return root / "report" / "summary.json"; }
  fs::path report_text() const { return root / "report" / "summary.txt"; }
  fs::path fit_rows(std::string_view stage) const { return root / std::string(stage) / "fit_rows.json"; }
};

void require(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError(path.string());
}

// ---------------------------------------------------------------------------
// Schema and cohort helpers

std::vector<FeatureSpec> read_schema(const Layout& layout) {
  require(layout.schema());
  const json doc = detail::read_json(layout.schema());
  std::vector<FeatureSpec> schema;
  for (const auto& f : doc.at("features")) {
    schema.push_back({f.at("name").get<std::string>(),
                      parse_feature_category(f.at("category").get<std::string>()),
                      f.value("unit", std::string())});
  }
  return schema;
}

void write_schema(const Layout& layout, std::span<const FeatureSpec> schema) {
  json features = json::array();
  for (const auto& f : schema) {
    features.push_back({{"name", f.name}, {"category", to_string(f.category)}, {"unit", f.unit}});
  }
  detail::write_json(layout.schema(), {{"features", features}});
}

// Loads a stage cohort whose feature columns are a subset of `schema`, in
// file order.
LabeledCohort load_stage_cohort(const fs::path& path, std::span<const FeatureSpec> schema) {
  require(path);
  std::ifstream in(path);
  std::string header_line;
  std::getline(in, header_line);
  std::vector<FeatureSpec> columns;
  for (const auto& name : csv::split_line(header_line)) {
    if (name == kLabelColumn || name == kRowIdColumn) continue;
    const auto it = std::find_if(schema.begin(), schema.end(), [&](const FeatureSpec& f) { return f.name == name; });
    columns.push_back(it != schema.end() ? *it : FeatureSpec{name, FeatureCategory::laboratory, ""});
  }
  return load_cohort(path, columns);
}

std::vector<Index> index_of_ids(const std::vector<std::string>& all, const std::vector<std::string>& wanted) {
  std::map<std::string, Index> pos;
  for (std::size_t i = 0; i < all.size(); ++i) pos[all[i]] = static_cast<Index>(i);
  std::vector<Index> out;
  for (const auto& id : wanted) {
    const auto it = pos.find(id);
    if (it == pos.end()) throw DataError("row id '" + id + "' not found in cohort");
    out.push_back(it->second);
  }
  return out;
}

struct ScaledTrain {
  LabeledCohort cohort;  // imputed, original units
  Scaler scaler;
  DataMatrix scaled;
};

Scaler read_scaler(const Layout& layout) {
  require(layout.scaler());
  return detail::read_json(layout.scaler()).get<Scaler>();
}

ScaledTrain load_scaled(const Layout& layout, const fs::path& which) {
  const auto schema = read_schema(layout);
  ScaledTrain t;
  t.cohort = load_stage_cohort(which, schema);
  t.scaler = read_scaler(layout);
  t.scaled = t.scaler.apply(t.cohort.matrix);
  return t;
}

std::vector<std::string> read_final_features(const Layout& layout) {
  require(layout.selection());
  return detail::read_json(layout.selection()).at("final").get<std::vector<std::string>>();
}

std::vector<std::string> read_split_ids(const Layout& layout, const char* part) {
  require(layout.split());
  return detail::read_json(layout.split()).at(part).get<std::vector<std::string>>();
}

void write_fit_rows(const Layout& layout, std::string_view stage, const json& records) {
  detail::write_json(layout.fit_rows(stage), records);
}

std::uint64_t stage_seed(const PipelineConfig& c, std::string_view name) { return derive_seed(c.seed, name); }

// Seeded subset of min(k, n) indices, returned ascending.
std::vector<Index> sample_indices(Index n, Index k, std::uint64_t seed) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  if (k >= n) return all;
  Rng rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

// ---------------------------------------------------------------------------
// Stages

void stage_synth(const PipelineConfig& c, const Layout& layout) {
  if (c.input.source == "synthetic") {
    SynthCohortSpec spec;
    from_json(c.input.synthetic, spec);
    if (!c.input.synthetic.contains("seed")) spec.seed = stage_seed(c, "synth");
    spec.validate();
    const LabeledCohort cohort = generate_synthetic(spec);
    write_cohort(layout.cohort(), cohort);
    write_schema(layout, spec.schema());
    detail::write_json(layout.synth_spec(), spec);
    return;
  }
  const auto schema = c.input.schema == "extended" ? extended_schema() : canonical_schema();
  if (!fs::exists(c.input.path)) throw MissingArtifactError(c.input.path.string());
  const LabeledCohort cohort = load_cohort(c.input.path, schema);
  write_cohort(layout.cohort(), cohort);
  write_schema(layout, schema);
}

void stage_preprocess(const PipelineConfig& c, const Layout& layout) {
  const auto schema = read_schema(layout);
  require(layout.cohort());
  const LabeledCohort cohort = load_cohort(layout.cohort(), schema);
  const std::uint64_t seed = stage_seed(c, "split");
  const SplitIndices parts = split(cohort, c.split.train_fraction, seed, c.split.stratified);
  const LabeledCohort train = cohort.select_rows(parts.train);
  const LabeledCohort test = cohort.select_rows(parts.test);

  PreprocessOptions options;
  options.knn_k = c.impute.knn_k;
  options.iterative = c.impute.iterative;
  const Preprocessor pre = Preprocessor::fit(train.matrix, options);
  ImputationAudit train_audit;
  ImputationAudit test_audit;
  LabeledCohort train_out{pre.apply(train.matrix, train.row_ids, &train_audit), train.labels, train.row_ids};
  LabeledCohort test_out{pre.apply(test.matrix, test.row_ids, &test_audit), test.labels, test.row_ids};
  const Scaler scaler = Scaler::fit(train_out.matrix);

  detail::write_json(layout.split(), {{"seed", seed},
                                      {"train_fraction", c.split.train_fraction},
                                      {"stratified", c.split.stratified},
                                      {"train", train.row_ids},
                                      {"test", test.row_ids},
                                      {"train_positives", train.count_label(1)},
                                      {"test_positives", test.count_label(1)}});
  detail::write_json(layout.missingness(), {{"profile", pre.profile()},
                                            {"retained", pre.retained_columns()},
                                            {"dropped", pre.dropped_columns()},
                                            {"train", train_audit},
                                            {"test", test_audit}});
  write_cohort(layout.train(), train_out);
  write_cohort(layout.test(), test_out);
  detail::write_json(layout.scaler(), scaler);
  write_fit_rows(layout, "preprocess", {{"imputer_fit", train.row_ids}, {"scaler_fit", train.row_ids}});
}

void stage_stats(const PipelineConfig&, const Layout& layout) {
  const auto schema = read_schema(layout);
  require(layout.cohort());
  const LabeledCohort cohort = load_cohort(layout.cohort(), schema);
  const auto train_rows = index_of_ids(cohort.row_ids, read_split_ids(layout, "train"));
  const auto test_rows = index_of_ids(cohort.row_ids, read_split_ids(layout, "test"));

  const auto split_table = compare_groups(cohort.matrix.select_rows(train_rows),
                                          cohort.matrix.select_rows(test_rows), "train", "test");
  csv::write_table(layout.stats("train_vs_test.csv"), to_table(split_table));
  detail::write_json(layout.stats("train_vs_test.json"), split_table);

  const auto outcome_table = compare_groups(cohort);
  csv::write_table(layout.stats("outcome_groups.csv"), to_table(outcome_table));
  detail::write_json(layout.stats("outcome_groups.json"), outcome_table);

  const ScaledTrain train = load_scaled(layout, layout.train());
  const VifReport report = vif(train.scaled);
  csv::write_table(layout.stats("vif.csv"), to_table(report));
  detail::write_json(layout.stats("vif.json"), report);
}

void stage_select(const PipelineConfig& c, const Layout& layout) {
  const ScaledTrain train = load_scaled(layout, layout.train());
  const auto names = train.scaled.column_names();
  SelectionResult result;
  json scores = nullptr;
  if (c.select.mode == "rfe") {
    RfeConfig config;
    config.target_count = c.select.target_count;
    config.step = c.select.step;
    config.logistic = c.select.logistic;
    config.seed = stage_seed(c, "select");
    result = rfe(train.scaled, train.cohort.labels, config);
    const auto final_fit = rank_features(train.scaled.select_columns(result.selected), train.cohort.labels,
                                         c.select.logistic);
    scores = {{"features", final_fit.names},
              {"scores", final_fit.scores},
              {"converged", final_fit.converged},
              {"gradient_norm", final_fit.gradient_norm},
              {"iterations", final_fit.iterations}};
  } else {
    for (const auto& f : c.select.features) {
      if (std::find(names.begin(), names.end(), f) == names.end()) {
        throw ConfigError("select.features", "unknown feature '" + f + "'");
      }
    }
    // Keep schema order for the fixed list.
    for (const auto& n : names) {
      if (std::find(c.select.features.begin(), c.select.features.end(), n) != c.select.features.end()) {
        result.selected.push_back(n);
      }
    }
  }
  result = pin_expert_features(std::move(result), c.select.pins, names);
  json doc = result;
  doc["mode"] = c.select.mode;
  doc["ranker"] = c.select.mode == "rfe" ? json("logistic") : json(nullptr);
  doc["final_scores"] = scores;
  detail::write_json(layout.selection(), doc);
  write_fit_rows(layout, "select", {{"selection_fit", train.cohort.row_ids}});
}

void stage_resample(const PipelineConfig& c, const Layout& layout) {
  const ScaledTrain train = load_scaled(layout, layout.train());
  const auto features = read_final_features(layout);
  const DataMatrix x = train.scaled.select_columns(features);
  const auto& labels = train.cohort.labels;
  const auto& ids = train.cohort.row_ids;
  const std::uint64_t seed = stage_seed(c, "resample");

  ResampleResult r;
  if (c.resample.method == "adasyn") {
    AdasynConfig config;
    config.k_neighbors = c.resample.k_neighbors;
    config.beta = c.resample.beta;
    config.seed = seed;
    r = adasyn(x.values(), labels, config);
  } else if (c.resample.method == "random_oversample") {
    r = random_oversample(x.values(), labels, seed);
  } else {
    r.method = "none";
    r.x = x.values();
    r.labels = labels;
    r.original_rows = x.rows();
  }

  std::vector<std::string> out_ids = ids;
  std::map<Index, int> per_seed;
  const std::string prefix = c.resample.method == "adasyn" ? "adasyn:" : "dup:";
  json sources = json::array();
  std::set<std::string> source_ids;
  for (const auto& s : r.sources) {
    const auto& seed_id = ids[static_cast<std::size_t>(s.seed_row)];
    const auto& neighbor_id = ids[static_cast<std::size_t>(s.neighbor_row)];
    const std::string id = prefix + seed_id + ":" + std::to_string(per_seed[s.seed_row]++);
    out_ids.push_back(id);
    sources.push_back({{"id", id}, {"seed", seed_id}, {"neighbor", neighbor_id}, {"lambda", s.lambda}});
    source_ids.insert(seed_id);
    source_ids.insert(neighbor_id);
  }
  write_cohort(layout.resampled(),
               LabeledCohort{x.with_values(r.x), r.labels, out_ids});
  json audit = r;
  audit["synthetic_rows"] = sources;
  detail::write_json(layout.resample_audit(), audit);
  write_fit_rows(layout, "resample",
                 {{"resample_input", ids},
                  {"synthetic_sources", std::vector<std::string>(source_ids.begin(), source_ids.end())}});
}

// "adasyn:<id>:<n>" and "dup:<id>:<n>" name synthetic rows; the id between
// the prefix and the last colon is the seed row.
std::optional<std::string> synthetic_seed(const std::string& id) {
  for (const std::string prefix : {"adasyn:", "dup:"}) {
    if (id.rfind(prefix, 0) == 0) {
      const auto last = id.rfind(':');
      if (last > prefix.size()) return id.substr(prefix.size(), last - prefix.size());
    }
  }
  return std::nullopt;
}

// Row index of each row's observed seed; observed rows map to themselves.
std::vector<Index> row_origin(const std::vector<std::string>& ids) {
  std::map<std::string, Index> position;
  for (std::size_t i = 0; i < ids.size(); ++i) position.emplace(ids[i], static_cast<Index>(i));
  std::vector<Index> origin(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto seed = synthetic_seed(ids[i]);
    if (!seed) {
      origin[i] = static_cast<Index>(i);
      continue;
    }
    const auto it = position.find(*seed);
    if (it == position.end()) throw DataError("synthetic row " + ids[i] + " names an unknown seed row");
    origin[i] = it->second;
  }
  return origin;
}

MlpConfig fixed_config(const PipelineConfig& c) {
  MlpConfig m = c.model.mlp;
  m.seed = stage_seed(c, "train");
  return m;
}

void stage_train(const PipelineConfig& c, const Layout& layout) {
  const auto schema = read_schema(layout);
  const LabeledCohort data = load_stage_cohort(layout.resampled(), schema);
  const Eigen::MatrixXd& x = data.matrix.require_complete("train");
  MlpConfig chosen = fixed_config(c);
  const std::vector<Index> origin = row_origin(data.row_ids);
  json report_doc = {{"mode", c.model.mode}};
  if (c.model.mode == "grid") {
    GridSearchSpec spec = c.model.grid;
    spec.base = c.model.mlp;
    spec.seed = stage_seed(c, "grid");
    const GridSearchResult grid = grid_search(spec, x, data.labels, origin);
    chosen = grid.best_config;
    chosen.seed = stage_seed(c, "train");
    json grid_doc = grid;
    detail::write_json(layout.cv_json(), grid_doc);
    csv::write_table(layout.cv_csv(), cv_table(grid));
    report_doc["grid_best_cell"] = grid.best_cell;
    report_doc["grid_best_mean_auroc"] = grid.cells[static_cast<std::size_t>(grid.best_cell)].mean_auroc;
  }
  const TrainResult fit = train(chosen, x, data.labels, origin);
  json doc = model_document(fit.model, chosen);
  doc["features"] = data.matrix.column_names();
  detail::write_json(layout.model(), doc);
  report_doc["config"] = chosen;
  report_doc["report"] = fit.report;
  detail::write_json(layout.train_report(), report_doc);
  write_fit_rows(layout, "train", {{"train_fit", data.row_ids}});
}

struct LoadedModel {
  MlpModel model;
  std::vector<std::string> features;
};

LoadedModel load_model(const Layout& layout) {
  require(layout.model());
  const json doc = detail::read_json(layout.model());
  LoadedModel m;
  m.model = model_from_document(doc);
  m.features = doc.at("features").get<std::vector<std::string>>();
  return m;
}

void stage_evaluate(const PipelineConfig& c, const Layout& layout) {
  const LoadedModel m = load_model(layout);
  const ScaledTrain test = load_scaled(layout, layout.test());
  const Eigen::MatrixXd x = test.scaled.select_columns(m.features).require_complete("evaluate");
  const Eigen::VectorXd p = forward(m.model, x);
  const std::span<const double> probs(p.data(), static_cast<std::size_t>(p.size()));
  EvalOptions options;
  options.threshold = c.evaluate.threshold;
  options.bootstrap_resamples = c.evaluate.bootstrap_resamples;
  options.alpha = c.evaluate.alpha;
  options.seed = stage_seed(c, "evaluate");
  const EvalReport report = evaluate(probs, test.cohort.labels, options);
  detail::write_json(layout.eval_report(), report);
  csv::write_table(layout.roc(), roc_table(report.roc));
  csv::Table preds;
  preds.header = {"row_id", "readmitted", "probability"};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    preds.rows.push_back({test.cohort.row_ids[i], std::to_string(test.cohort.labels[i]),
                          csv::format_double(probs[i])});
  }
  csv::write_table(layout.predictions(), preds);
}

void stage_explain(const PipelineConfig& c, const Layout& layout) {
  const LoadedModel m = load_model(layout);
  const ScaledTrain train = load_scaled(layout, layout.train());
  const ScaledTrain test = load_scaled(layout, layout.test());
  const DataMatrix train_x = train.scaled.select_columns(m.features);
  const DataMatrix test_x = test.scaled.select_columns(m.features);

  const auto bg_rows = sample_indices(train_x.rows(), c.explain.background_size, stage_seed(c, "explain.background"));
  const auto sample_rows = sample_indices(test_x.rows(), c.explain.max_samples, stage_seed(c, "explain.samples"));
  const Eigen::MatrixXd background = train_x.select_rows(bg_rows).require_complete("explain");
  const Eigen::MatrixXd samples = test_x.select_rows(sample_rows).require_complete("explain");
  const BatchPredictor predict = mlp_predictor(m.model);
  const std::uint64_t kernel_seed = stage_seed(c, "explain.kernel");

  std::vector<ShapExplanation> explanations;
  explanations.reserve(sample_rows.size());
  for (Index i = 0; i < samples.rows(); ++i) {
    const Eigen::VectorXd xi = samples.row(i).transpose();
    if (c.explain.method == "exact") {
      explanations.push_back(exact_shap(predict, xi, background));
    } else {
      explanations.push_back(kernel_shap(predict, xi, background, c.explain.n_coalitions, c.explain.ridge,
                                         derive_seed(kernel_seed, static_cast<std::uint64_t>(i))));
    }
  }
  // Summary-plot values are reported in original units.
  const DataMatrix raw = test.cohort.matrix.select_columns(m.features).select_rows(sample_rows);
  const ShapSummary summary = shap_summary(explanations, raw);

  std::vector<std::string> bg_ids;
  for (const Index r : bg_rows) bg_ids.push_back(train.cohort.row_ids[static_cast<std::size_t>(r)]);
  std::vector<std::string> sample_ids;
  for (const Index r : sample_rows) sample_ids.push_back(test.cohort.row_ids[static_cast<std::size_t>(r)]);
  json doc = summary;
  doc["method"] = c.explain.method;
  doc["background_rows"] = bg_ids;
  doc["sample_rows"] = sample_ids;
  double max_efficiency_gap = 0.0;
  for (const auto& e : explanations) {
    max_efficiency_gap = std::max(max_efficiency_gap, std::abs(e.base_value + e.values.sum() - e.prediction));
  }
  doc["max_efficiency_gap"] = max_efficiency_gap;
  detail::write_json(layout.shap_summary(), doc);
  csv::write_table(layout.shap_ranking(), ranking_table(summary));
  csv::write_table(layout.shap_points(), points_table(summary));
  write_fit_rows(layout, "explain", {{"background", bg_ids}});
}

std::string format_metric(const json& v) {
  if (v.is_null()) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v.get<double>();
  return s.str();
}

void stage_report(const PipelineConfig&, const Layout& layout) {
  require(layout.eval_report());
  require(layout.shap_summary());
  require(layout.selection());
  const json eval = detail::read_json(layout.eval_report());
  const json shap = detail::read_json(layout.shap_summary());
  const json selection = detail::read_json(layout.selection());
  const LeakageAudit leakage = audit_leakage(layout.root);
  detail::write_json(layout.root / kLeakage, leakage);

  json ranking = json::array();
  for (const auto& r : shap.at("ranking")) ranking.push_back(r.at("feature"));
  const json summary = {{"auroc", eval.at("auroc")},
                        {"auroc_ci", eval.at("auroc_ci")},
                        {"fixed_threshold", eval.at("fixed_threshold")},
                        {"youden", eval.at("youden")},
                        {"features", selection.at("final")},
                        {"shap_ranking", ranking},
                        {"leakage_clean", leakage.clean()}};
  detail::write_json(layout.report_json(), summary);

  std::ostringstream text;
  text << "test rows " << eval.at("n").get<long>() << " (" << eval.at("positives").get<long>() << " positive)\n";
  text << "AUROC " << format_metric(eval.at("auroc")) << " [" << format_metric(eval.at("auroc_ci").at("low"))
       << ", " << format_metric(eval.at("auroc_ci").at("high")) << "]\n";
  for (const char* key : {"fixed_threshold", "youden"}) {
    const auto& op = eval.at(key);
    text << key << " @" << format_metric(op.at("threshold")) << ": accuracy " << format_metric(op.at("accuracy"))
         << ", sensitivity " << format_metric(op.at("sensitivity")) << ", specificity "
         << format_metric(op.at("specificity")) << "\n";
  }
  text << "features:";
  for (const auto& f : selection.at("final")) text << ' ' << f.get<std::string>();
  text << "\nSHAP ranking:";
  for (const auto& f : ranking) text << ' ' << f.get<std::string>();
  text << "\nleakage audit: " << (leakage.clean() ? "clean" : "VIOLATIONS") << "\n";
  auto out = detail::open_output(layout.report_text());
  out << text.str();
}

void dispatch(Stage stage, const PipelineConfig& c, const Layout& layout) {
  switch (stage) {
    case Stage::synth: return stage_synth(c, layout);
    case Stage::preprocess: return stage_preprocess(c, layout);
    case Stage::stats: return stage_stats(c, layout);
    case Stage::select: return stage_select(c, layout);
    case Stage::resample: return stage_resample(c, layout);
    case Stage::train: return stage_train(c, layout);
    case Stage::evaluate: return stage_evaluate(c, layout);
    case Stage::explain: return stage_explain(c, layout);
    case Stage::report: return stage_report(c, layout);
  }
}

// Re-raises with the stage name prefixed, preserving the error category.
[[noreturn]] void rethrow_with_stage(Stage stage) {
  const std::string where = std::string(to_string(stage)) + " stage: ";
  try {
    throw;
  } catch (const MissingArtifactError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const NumericError& e) {
    throw NumericError(where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const Error& e) {
    throw Error(where + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + "malformed artifact: " + e.what());
  }
}

double timed_stage(Stage stage, const PipelineConfig& c, const Layout& layout) {
  const auto start = std::chrono::steady_clock::now();
  try {
    dispatch(stage, c, layout);
  } catch (...) {
    rethrow_with_stage(stage);
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json versions() {
  return {{"readmit", READMIT_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

void write_manifest(const Layout& layout, const RunManifest& manifest) {
  detail::write_json(layout.root / kManifest, manifest);
}

std::map<std::string, double> previous_timings(const fs::path& root) {
  if (!fs::exists(root / kManifest)) return {};
  try {
    return read_manifest(root).stage_seconds;
  } catch (const std::exception&) {
    return {};
  }
}

}  // namespace

std::string_view to_string(Stage stage) noexcept {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) noexcept {
  for (const auto& [s, n] : kStageNames) {
    if (n == name) return s;
  }
  return std::nullopt;
}

const std::vector<Stage>& pipeline_stages() {
  static const std::vector<Stage> stages{Stage::synth,  Stage::preprocess, Stage::stats,
                                         Stage::select, Stage::resample,   Stage::train,
                                         Stage::evaluate, Stage::explain,  Stage::report};
  return stages;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest initialization failed");
  }
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

RunManifest build_manifest(const fs::path& output_dir, const PipelineConfig& config,
                           std::map<std::string, double> stage_seconds) {
  RunManifest m;
  m.config = config.to_json();
  m.versions = versions();
  m.stage_seconds = std::move(stage_seconds);
  for (const auto& entry : fs::recursive_directory_iterator(output_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), output_dir).generic_string();
    if (rel == kManifest) continue;
    m.files.push_back({rel, sha256_file(entry.path()), entry.file_size()});
  }
  std::sort(m.files.begin(), m.files.end(), [](const FileRecord& a, const FileRecord& b) { return a.path < b.path; });
  return m;
}

RunManifest read_manifest(const fs::path& output_dir) {
  const json doc = detail::read_json(output_dir / kManifest);
  RunManifest m;
  m.config = doc.at("config");
  m.versions = doc.at("versions");
  m.stage_seconds = doc.at("stage_seconds").get<std::map<std::string, double>>();
  for (const auto& f : doc.at("files")) {
    m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                       f.at("bytes").get<std::uintmax_t>()});
  }
  return m;
}

void run_stage(Stage stage, const PipelineConfig& config) {
  const Layout layout{config.output_dir};
  auto timings = previous_timings(layout.root);
  timings[std::string(to_string(stage))] = timed_stage(stage, config, layout);
  write_manifest(layout, build_manifest(layout.root, config, std::move(timings)));
}

RunManifest run_pipeline(const PipelineConfig& config) {
  const Layout layout{config.output_dir};
  std::map<std::string, double> timings;
  for (const Stage stage : pipeline_stages()) {
    timings[std::string(to_string(stage))] = timed_stage(stage, config, layout);
  }
  RunManifest manifest = build_manifest(layout.root, config, std::move(timings));
  write_manifest(layout, manifest);
  return manifest;
}

// ---------------------------------------------------------------------------

LeakageAudit audit_leakage(const fs::path& output_dir) {
  const Layout layout{output_dir};
  const auto test_ids = read_split_ids(layout, "test");
  const std::set<std::string> test(test_ids.begin(), test_ids.end());
  LeakageAudit audit;
  audit.test_rows = test.size();
  for (const char* stage : {"preprocess", "select", "resample", "train", "explain"}) {
    const fs::path path = layout.fit_rows(stage);
    require(path);
    const json doc = detail::read_json(path);
    for (const auto& item : doc.items()) {
      const std::string record = std::string(stage) + "." + item.key();
      std::size_t count = 0;
      for (const auto& v : item.value()) {
        const std::string id = v.get<std::string>();
        const std::string resolved = synthetic_seed(id).value_or(id);
        ++count;
        if (test.count(resolved)) audit.findings.push_back({record, id});
      }
      audit.checked[record] = count;
    }
  }
  return audit;
}

void to_json(json& j, const LeakageAudit& a) {
  json findings = json::array();
  for (const auto& f : a.findings) findings.push_back({{"record", f.record}, {"row_id", f.row_id}});
  j = {{"clean", a.clean()}, {"test_rows", a.test_rows}, {"checked", a.checked}, {"findings", findings}};
}

void to_json(json& j, const RunManifest& m) {
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j = {{"config", m.config}, {"versions", m.versions}, {"stage_seconds", m.stage_seconds}, {"files", files}};
}

}  // namespace readmit
