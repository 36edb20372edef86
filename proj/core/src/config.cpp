#include "readmit/config.hpp"

#include <fstream>
#include <set>

#include "readmit/error.hpp"
#include "readmit/resample.hpp"
#include "readmit/select.hpp"
#include "util.hpp"

namespace readmit {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed reads from one JSON object that reject unknown keys and report the
// dotted path of bad values.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(join(path_, key), std::string("invalid value: ") + e.what());
    }
  }

  void raw(const std::string& key, nlohmann::json& out) {
    seen_.insert(key);
    if (j_.contains(key)) out = j_.at(key);
  }

  std::optional<Section> child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), join(path_, key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(join(path_, item.key()), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_mlp(Section& s, MlpConfig& c) {
  s.get("hidden_sizes", c.hidden_sizes);
  s.get("l2", c.l2);
  s.get("learning_rate", c.learning_rate);
  s.get("beta1", c.beta1);
  s.get("beta2", c.beta2);
  s.get("epsilon", c.epsilon);
  s.get("batch_size", c.batch_size);
  s.get("max_epochs", c.max_epochs);
  s.get("patience", c.patience);
  s.get("validation_fraction", c.validation_fraction);
  s.finish();
}

nlohmann::json mlp_json(const MlpConfig& c) {
  return {{"hidden_sizes", c.hidden_sizes},
          {"l2", c.l2},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"validation_fraction", c.validation_fraction}};
}

template <typename T>
void require_one_of(const std::string& path, const std::string& value, std::initializer_list<T> options) {
  for (const auto& o : options) {
    if (value == o) return;
  }
  std::string list;
  for (const auto& o : options) list += (list.empty() ? "" : ", ") + std::string(o);
  throw ConfigError(path, "must be one of: " + list);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
  PipelineConfig c;
  Section root(doc, "");
  if (auto s = root.child("input")) {
    s->get("source", c.input.source);
    std::string path;
    s->get("path", path);
    c.input.path = path;
    s->get("schema", c.input.schema);
    s->raw("synthetic", c.input.synthetic);
    s->finish();
  }
  if (auto s = root.child("split")) {
    s->get("train_fraction", c.split.train_fraction);
    s->get("stratified", c.split.stratified);
    s->finish();
  }
  if (auto s = root.child("impute")) {
    s->get("knn_k", c.impute.knn_k);
    if (auto it = s->child("iterative")) {
      it->get("max_iter", c.impute.iterative.max_iter);
      it->get("tolerance", c.impute.iterative.tolerance);
      it->get("ridge_penalty", c.impute.iterative.ridge_penalty);
      it->finish();
    }
    s->finish();
  }
  if (auto s = root.child("select")) {
    s->get("mode", c.select.mode);
    s->get("target_count", c.select.target_count);
    s->get("step", c.select.step);
    s->get("penalty", c.select.logistic.penalty);
    s->get("max_iter", c.select.logistic.max_iter);
    s->get("gradient_tolerance", c.select.logistic.gradient_tolerance);
    s->get("pins", c.select.pins);
    s->get("features", c.select.features);
    s->finish();
  }
  if (auto s = root.child("resample")) {
    s->get("method", c.resample.method);
    s->get("k_neighbors", c.resample.k_neighbors);
    s->get("beta", c.resample.beta);
    s->finish();
  }
  if (auto s = root.child("model")) {
    s->get("mode", c.model.mode);
    if (auto m = s->child("mlp")) read_mlp(*m, c.model.mlp);
    if (auto g = s->child("grid")) {
      g->get("learning_rates", c.model.grid.learning_rates);
      g->get("l2_scales", c.model.grid.l2_scales);
      g->get("hidden_sizes", c.model.grid.hidden_sizes);
      g->get("folds", c.model.grid.folds);
      g->finish();
    }
    s->finish();
  }
  if (auto s = root.child("evaluate")) {
    s->get("threshold", c.evaluate.threshold);
    s->get("bootstrap_resamples", c.evaluate.bootstrap_resamples);
    s->get("alpha", c.evaluate.alpha);
    s->finish();
  }
  if (auto s = root.child("explain")) {
    s->get("method", c.explain.method);
    s->get("background_size", c.explain.background_size);
    s->get("max_samples", c.explain.max_samples);
    s->get("n_coalitions", c.explain.n_coalitions);
    s->get("ridge", c.explain.ridge);
    s->finish();
  }
  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;
  root.get("seed", c.seed);
  root.finish();
  c.model.grid.base = c.model.mlp;
  c.validate();
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"input",
           {{"source", input.source},
            {"path", input.path.string()},
            {"schema", input.schema},
            {"synthetic", input.synthetic}}},
          {"split", {{"train_fraction", split.train_fraction}, {"stratified", split.stratified}}},
          {"impute",
           {{"knn_k", impute.knn_k},
            {"iterative",
             {{"max_iter", impute.iterative.max_iter},
              {"tolerance", impute.iterative.tolerance},
              {"ridge_penalty", impute.iterative.ridge_penalty}}}}},
          {"select",
           {{"mode", select.mode},
            {"target_count", select.target_count},
            {"step", select.step},
            {"penalty", select.logistic.penalty},
            {"max_iter", select.logistic.max_iter},
            {"gradient_tolerance", select.logistic.gradient_tolerance},
            {"pins", select.pins},
            {"features", select.features}}},
          {"resample",
           {{"method", resample.method}, {"k_neighbors", resample.k_neighbors}, {"beta", resample.beta}}},
          {"model",
           {{"mode", model.mode},
            {"mlp", mlp_json(model.mlp)},
            {"grid",
             {{"learning_rates", model.grid.learning_rates},
              {"l2_scales", model.grid.l2_scales},
              {"hidden_sizes", model.grid.hidden_sizes},
              {"folds", model.grid.folds}}}}},
          {"evaluate",
           {{"threshold", evaluate.threshold},
            {"bootstrap_resamples", evaluate.bootstrap_resamples},
            {"alpha", evaluate.alpha}}},
          {"explain",
           {{"method", explain.method},
            {"background_size", explain.background_size},
            {"max_samples", explain.max_samples},
            {"n_coalitions", explain.n_coalitions},
            {"ridge", explain.ridge}}},
          {"output_dir", output_dir.string()},
          {"seed", seed}};
}

void PipelineConfig::validate() const {
  require_one_of("input.source", input.source, {"synthetic", "file"});
  if (input.source == "file") {
    if (input.path.empty()) throw ConfigError("input.path", "required when input.source is 'file'");
    require_one_of("input.schema", input.schema, {"canonical", "extended"});
  } else {
    if (!input.path.empty()) throw ConfigError("input.path", "must be empty when input.source is 'synthetic'");
    try {
      SynthCohortSpec spec;
      readmit::from_json(input.synthetic, spec);
      spec.validate();
    } catch (const ConfigError& e) {
      // Re-root the synthetic spec's field path under the pipeline document.
      std::string message = e.what();
      if (!e.field().empty()) message = message.substr(e.field().size() + 2);
      throw ConfigError("input." + e.field(), message);
    }
  }
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction", "must lie strictly inside (0, 1)");
  }
  if (impute.knn_k < 1) throw ConfigError("impute.knn_k", "must be >= 1");
  if (impute.iterative.max_iter < 1) throw ConfigError("impute.iterative.max_iter", "must be >= 1");
  if (!(impute.iterative.tolerance > 0.0)) throw ConfigError("impute.iterative.tolerance", "must be > 0");
  if (!(impute.iterative.ridge_penalty >= 0.0)) {
    throw ConfigError("impute.iterative.ridge_penalty", "must be >= 0");
  }

  require_one_of("select.mode", select.mode, {"rfe", "fixed"});
  RfeConfig rfe;
  rfe.target_count = select.target_count;
  rfe.step = select.step;
  rfe.validate("select");
  if (!(select.logistic.penalty >= 0.0)) throw ConfigError("select.penalty", "must be >= 0");
  if (select.logistic.max_iter < 1) throw ConfigError("select.max_iter", "must be >= 1");
  if (!(select.logistic.gradient_tolerance > 0.0)) throw ConfigError("select.gradient_tolerance", "must be > 0");
  if (select.mode == "fixed" && select.features.empty()) {
    throw ConfigError("select.features", "required when select.mode is 'fixed'");
  }

  require_one_of("resample.method", resample.method, {"adasyn", "random_oversample", "none"});
  AdasynConfig adasyn;
  adasyn.k_neighbors = resample.k_neighbors;
  adasyn.beta = resample.beta;
  adasyn.validate("resample");

  require_one_of("model.mode", model.mode, {"grid", "fixed"});
  model.mlp.validate("model.mlp");
  if (model.mode == "grid") model.grid.validate("model.grid");

  if (!(evaluate.threshold >= 0.0 && evaluate.threshold <= 1.0)) {
    throw ConfigError("evaluate.threshold", "must lie in [0, 1]");
  }
  if (evaluate.bootstrap_resamples < 100) throw ConfigError("evaluate.bootstrap_resamples", "must be >= 100");
  if (!(evaluate.alpha > 0.0 && evaluate.alpha < 1.0)) throw ConfigError("evaluate.alpha", "must lie in (0, 1)");

  require_one_of("explain.method", explain.method, {"exact", "kernel"});
  if (explain.background_size < 1) throw ConfigError("explain.background_size", "must be >= 1");
  if (explain.max_samples < 1) throw ConfigError("explain.max_samples", "must be >= 1");
  if (explain.ridge < 0.0) throw ConfigError("explain.ridge", "must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

nlohmann::json apply_overrides(nlohmann::json doc, std::span<const std::string> assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set", "expected dotted.key=value, got '" + a + "'");
    }
    const std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("--set", "empty path component in '" + key + "'");
      if (!node->is_object()) {
        if (!node->is_null()) throw ConfigError(key, "cannot descend into a non-object value");
        *node = nlohmann::json::object();
      }
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = std::move(value);
  }
  return doc;
}

PipelineConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot read '" + path.string() + "'");
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("--config", "'" + path.string() + "' is not valid JSON");
  }
  return PipelineConfig::from_json(apply_overrides(std::move(doc), overrides));
}

}  // namespace readmit
