#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "readmit/error.hpp"
#include "readmit/eval.hpp"
#include "readmit/nnet.hpp"
#include "readmit/random.hpp"

namespace readmit {

namespace {

struct Moments {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
};

Moments zero_moments(const MlpModel& model) {
  Moments mo;
  for (const auto& layer : model.layers) {
    DenseLayer z;
    z.weights = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
    z.bias = Eigen::VectorXd::Zero(layer.bias.size());
    mo.m.push_back(z);
    mo.v.push_back(std::move(z));
  }
  return mo;
}

void adam_step(MlpModel& model, const std::vector<DenseLayer>& grads, Moments& mo,
               const MlpConfig& c, long step) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].weights, grads[l].weights, mo.m[l].weights, mo.v[l].weights);
    update(model.layers[l].bias, grads[l].bias, mo.m[l].bias, mo.v[l].bias);
  }
}

bool all_finite(const MlpModel& model) {
  for (const auto& layer : model.layers) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

void require_both_classes(std::span<const int> labels, const char* what) {
  bool pos = false;
  bool neg = false;
  for (const int y : labels) {
    if (y == 1) pos = true;
    else if (y == 0) neg = true;
    else throw DataError(std::string(what) + ": labels must be 0 or 1");
  }
  if (!pos || !neg) throw DataError(std::string(what) + " requires both classes in the labels");
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const Index> rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

std::vector<int> take_labels(std::span<const int> labels, std::span<const Index> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

// Stratified hold-out: each class contributes round(f * count) rows, clamped
// so that both sides keep at least one row of every class.
void validation_split(std::span<const int> labels, double fraction, std::uint64_t seed,
                      std::vector<Index>& fit_rows, std::vector<Index>& val_rows) {
  Rng rng(seed);
  std::vector<Index> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
  for (auto& rows : by_class) {
    if (rows.size() < 2) throw DataError("train: every class needs at least two rows for validation");
    std::shuffle(rows.begin(), rows.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    take = std::clamp<std::size_t>(take, 1, rows.size() - 1);
    val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    fit_rows.insert(fit_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(fit_rows.begin(), fit_rows.end());
  std::sort(val_rows.begin(), val_rows.end());
}

double safe_auroc(const Eigen::VectorXd& p, std::span<const int> labels) {
  if (!p.allFinite()) return std::numeric_limits<double>::quiet_NaN();
  return auroc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), labels);
}

// Validated origin vector; identity when `origin` is empty.
std::vector<Index> resolve_origin(std::span<const Index> origin, Index rows) {
  std::vector<Index> out(static_cast<std::size_t>(rows));
  if (origin.empty()) {
    std::iota(out.begin(), out.end(), Index{0});
    return out;
  }
  if (static_cast<Index>(origin.size()) != rows) throw DataError("origin length does not match rows");
  for (Index i = 0; i < rows; ++i) {
    const Index o = origin[static_cast<std::size_t>(i)];
    if (o < 0 || o >= rows || origin[static_cast<std::size_t>(o)] != o) {
      throw DataError("origin of row " + std::to_string(i) + " is not an observed row");
    }
    out[static_cast<std::size_t>(i)] = o;
  }
  return out;
}

std::vector<Index> observed_rows(const std::vector<Index>& origin) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (origin[i] == static_cast<Index>(i)) out.push_back(static_cast<Index>(i));
  }
  return out;
}

// Positions of `rows` re-expressed relative to the subset itself.
std::vector<Index> local_origin(const std::vector<Index>& origin, std::span<const Index> rows) {
  std::vector<Index> position(origin.size(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) position[static_cast<std::size_t>(rows[k])] = static_cast<Index>(k);
  std::vector<Index> out;
  out.reserve(rows.size());
  for (const Index r : rows) out.push_back(position[static_cast<std::size_t>(origin[static_cast<std::size_t>(r)])]);
  return out;
}

}  // namespace

TrainResult train(const MlpConfig& config, const Eigen::MatrixXd& x, std::span<const int> labels,
                  std::span<const Index> origin_in) {
  config.validate();
  if (static_cast<Index>(labels.size()) != x.rows()) throw DataError("train: label count does not match rows");
  if (!x.allFinite()) throw DataError("train: matrix must be fully observed");
  require_both_classes(labels, "train");

  const auto origin = resolve_origin(origin_in, x.rows());
  const auto observed = observed_rows(origin);
  const auto observed_labels = take_labels(labels, observed);
  std::vector<Index> fit_obs;
  std::vector<Index> val_obs;
  validation_split(observed_labels, config.validation_fraction, derive_seed(config.seed, "validation"),
                   fit_obs, val_obs);
  std::vector<char> held_out(origin.size(), 0);
  std::vector<Index> val_rows;
  for (const Index k : val_obs) {
    val_rows.push_back(observed[static_cast<std::size_t>(k)]);
    held_out[static_cast<std::size_t>(val_rows.back())] = 1;
  }
  std::vector<Index> fit_rows;
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (!held_out[static_cast<std::size_t>(origin[i])]) fit_rows.push_back(static_cast<Index>(i));
  }
  const Eigen::MatrixXd x_fit = take_rows(x, fit_rows);
  const std::vector<int> y_fit = take_labels(labels, fit_rows);
  const Eigen::MatrixXd x_val = take_rows(x, val_rows);
  const std::vector<int> y_val = take_labels(labels, val_rows);

  TrainResult result;
  result.model = init_mlp(config, static_cast<int>(x.cols()));
  result.report.train_rows = x_fit.rows();
  result.report.validation_rows = x_val.rows();
  MlpModel model = result.model;
  Moments moments = zero_moments(model);

  const std::uint64_t shuffle_seed = derive_seed(config.seed, "shuffle");
  const auto batch = static_cast<Index>(config.batch_size);
  std::vector<Index> order(static_cast<std::size_t>(x_fit.rows()));
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  long step = 0;
  int since_best = 0;
  result.report.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    bool diverged = false;
    double loss_sum = 0.0;
    Index correct = 0;
    for (Index start = 0; start < x_fit.rows(); start += batch) {
      const Index len = std::min(batch, x_fit.rows() - start);
      const std::span<const Index> rows(order.data() + start, static_cast<std::size_t>(len));
      xb = take_rows(x_fit, rows);
      yb = take_labels(y_fit, rows);
      const LossGrad lg = loss_and_grad(model, xb, yb, config.l2);
      if (!std::isfinite(lg.loss)) {
        diverged = true;
        break;
      }
      loss_sum += lg.loss * static_cast<double>(len);
      correct += lg.correct;
      adam_step(model, lg.gradients, moments, config, ++step);
    }
    diverged = diverged || !all_finite(model);

    EpochRecord rec;
    rec.epoch = epoch;
    if (!diverged) {
      // Row-weighted mean of the mini-batch objectives seen during the epoch.
      rec.train_loss = loss_sum / static_cast<double>(x_fit.rows());
      rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(x_fit.rows());
      const Eigen::VectorXd p_val = forward(model, x_val);
      rec.validation_loss = penalized_loss(model, x_val, y_val, config.l2);
      rec.validation_auroc = safe_auroc(p_val, y_val);
      diverged = !std::isfinite(rec.train_loss) || !std::isfinite(rec.validation_auroc);
    }
    if (diverged) {
      rec.train_loss = std::numeric_limits<double>::quiet_NaN();
      rec.train_accuracy = std::numeric_limits<double>::quiet_NaN();
      rec.validation_loss = std::numeric_limits<double>::quiet_NaN();
      rec.validation_auroc = std::numeric_limits<double>::quiet_NaN();
      result.report.epochs.push_back(rec);
      result.report.stop_reason = "diverged";
      break;
    }
    result.report.epochs.push_back(rec);
    if (result.report.best_epoch < 0 || rec.validation_auroc > result.report.best_validation_auroc) {
      result.report.best_epoch = epoch;
      result.report.best_validation_auroc = rec.validation_auroc;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.report.stop_reason = "patience";
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

void GridSearchSpec::validate(const std::string& path) const {
  if (folds < 2) throw ConfigError(path + ".folds", "must be >= 2");
  if (learning_rates.empty()) throw ConfigError(path + ".learning_rates", "grid must not be empty");
  if (l2_scales.empty()) throw ConfigError(path + ".l2_scales", "grid must not be empty");
  if (hidden_sizes.empty()) throw ConfigError(path + ".hidden_sizes", "grid must not be empty");
  for (std::size_t i = 0; i < l2_scales.size(); ++i) {
    if (!(l2_scales[i] >= 0.0)) throw ConfigError(path + ".l2_scales[" + std::to_string(i) + "]", "must be >= 0");
  }
  for (const auto& cell : cells()) {
    MlpConfig check = cell;
    check.validate(path + ".base");
  }
}

namespace {

// The l2 vector for an architecture: the base vector when the depth matches,
// otherwise the base vector's first entry repeated.
std::vector<double> l2_for(const MlpConfig& base, std::size_t depth) {
  if (base.l2.size() == depth) return base.l2;
  return std::vector<double>(depth, base.l2.empty() ? 0.0 : base.l2.front());
}

struct CellMeta {
  double l2_scale = 1.0;
};

std::vector<std::pair<MlpConfig, CellMeta>> expand(const GridSearchSpec& spec) {
  std::vector<std::pair<MlpConfig, CellMeta>> out;
  for (const auto& hidden : spec.hidden_sizes) {
    for (const double lr : spec.learning_rates) {
      for (const double scale : spec.l2_scales) {
        MlpConfig c = spec.base;
        c.hidden_sizes = hidden;
        c.learning_rate = lr;
        c.l2 = l2_for(spec.base, hidden.size());
        for (double& v : c.l2) v *= scale;
        out.push_back({c, CellMeta{scale}});
      }
    }
  }
  return out;
}

Index parameter_count_for(const std::vector<int>& hidden, Index input_dim) {
  Index count = 0;
  Index fan_in = input_dim;
  for (const int h : hidden) {
    count += fan_in * h + h;
    fan_in = h;
  }
  return count + fan_in + 1;
}

}  // namespace

std::vector<MlpConfig> GridSearchSpec::cells() const {
  std::vector<MlpConfig> out;
  for (auto& [config, meta] : expand(*this)) out.push_back(std::move(config));
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("model.grid.folds", "must be >= 2");
  std::vector<int> assignment(labels.size(), -1);
  Rng rng(seed);
  int offset = 0;
  for (const int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    if (static_cast<int>(rows.size()) < folds) {
      throw DataError("grid search: class " + std::to_string(cls) + " has fewer rows than folds");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      assignment[rows[k]] = static_cast<int>((k + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(folds));
    }
    // Continue the round-robin so small classes don't all start at fold 0.
    offset = static_cast<int>((rows.size() + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(folds));
  }
  return assignment;
}

GridSearchResult grid_search(const GridSearchSpec& spec, const Eigen::MatrixXd& x,
                             std::span<const int> labels, std::span<const Index> origin_in) {
  spec.validate();
  if (static_cast<Index>(labels.size()) != x.rows()) throw DataError("grid search: label count does not match rows");
  require_both_classes(labels, "grid search");
  const auto origin = resolve_origin(origin_in, x.rows());
  const auto observed = observed_rows(origin);
  const auto observed_folds =
      stratified_folds(take_labels(labels, observed), spec.folds, derive_seed(spec.seed, "folds"));
  std::vector<int> fold_of(origin.size(), -1);
  for (std::size_t k = 0; k < observed.size(); ++k) fold_of[static_cast<std::size_t>(observed[k])] = observed_folds[k];
  const auto grid = expand(spec);

  std::vector<std::vector<Index>> fold_train(static_cast<std::size_t>(spec.folds));
  std::vector<std::vector<Index>> fold_test(static_cast<std::size_t>(spec.folds));
  for (std::size_t i = 0; i < origin.size(); ++i) {
    const int home = fold_of[static_cast<std::size_t>(origin[i])];
    const bool is_observed = origin[i] == static_cast<Index>(i);
    for (int f = 0; f < spec.folds; ++f) {
      if (home != f) fold_train[static_cast<std::size_t>(f)].push_back(static_cast<Index>(i));
      else if (is_observed) fold_test[static_cast<std::size_t>(f)].push_back(static_cast<Index>(i));
    }
  }

  GridSearchResult result;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const auto& [config, meta] = grid[c];
    GridCellSummary summary;
    summary.cell = static_cast<int>(c);
    summary.config = config;
    summary.l2_scale = meta.l2_scale;
    summary.parameter_count = parameter_count_for(config.hidden_sizes, x.cols());
    double total = 0.0;
    for (int f = 0; f < spec.folds; ++f) {
      const auto& tr = fold_train[static_cast<std::size_t>(f)];
      const auto& te = fold_test[static_cast<std::size_t>(f)];
      MlpConfig fold_config = config;
      fold_config.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(spec.folds) +
                                                    static_cast<std::uint64_t>(f));
      const auto y_tr = take_labels(labels, tr);
      const auto y_te = take_labels(labels, te);
      const TrainResult fit = train(fold_config, take_rows(x, tr), y_tr, local_origin(origin, tr));
      double score = safe_auroc(forward(fit.model, take_rows(x, te)), y_te);
      // A diverged fit scores as chance.
      if (!std::isfinite(score)) score = 0.5;
      CvRow row;
      row.cell = summary.cell;
      row.fold = f;
      row.learning_rate = config.learning_rate;
      row.l2_scale = meta.l2_scale;
      row.hidden_sizes = config.hidden_sizes;
      row.auroc = score;
      row.epochs = static_cast<int>(fit.report.epochs.size());
      row.stop_reason = fit.report.stop_reason;
      result.table.push_back(std::move(row));
      total += score;
    }
    summary.mean_auroc = total / static_cast<double>(spec.folds);
    result.cells.push_back(std::move(summary));
  }

  const auto better = [](const GridCellSummary& a, const GridCellSummary& b) {
    if (a.mean_auroc != b.mean_auroc) return a.mean_auroc > b.mean_auroc;
    if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
    return a.config.learning_rate < b.config.learning_rate;
  };
  std::size_t best = 0;
  for (std::size_t c = 1; c < result.cells.size(); ++c) {
    if (better(result.cells[c], result.cells[best])) best = c;
  }
  result.best_cell = static_cast<int>(best);
  result.best_config = result.cells[best].config;
  return result;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const TrainReport& r) {
  auto epochs = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", num(e.train_loss)},
                      {"train_accuracy", num(e.train_accuracy)},
                      {"validation_loss", num(e.validation_loss)},
                      {"validation_auroc", num(e.validation_auroc)}});
  }
  j = {{"best_epoch", r.best_epoch},
       {"best_validation_auroc", r.best_validation_auroc},
       {"stop_reason", r.stop_reason},
       {"train_rows", r.train_rows},
       {"validation_rows", r.validation_rows},
       {"epochs", epochs}};
}

void to_json(nlohmann::json& j, const GridSearchResult& r) {
  auto cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"cell", c.cell},
                     {"hidden_sizes", c.config.hidden_sizes},
                     {"learning_rate", c.config.learning_rate},
                     {"l2_scale", c.l2_scale},
                     {"l2", c.config.l2},
                     {"mean_auroc", c.mean_auroc},
                     {"parameter_count", c.parameter_count}});
  }
  auto table = nlohmann::json::array();
  for (const auto& row : r.table) {
    table.push_back({{"cell", row.cell},
                     {"fold", row.fold},
                     {"hidden_sizes", row.hidden_sizes},
                     {"learning_rate", row.learning_rate},
                     {"l2_scale", row.l2_scale},
                     {"auroc", row.auroc},
                     {"epochs", row.epochs},
                     {"stop_reason", row.stop_reason}});
  }
  j = {{"best_cell", r.best_cell}, {"best_config", r.best_config}, {"cells", cells}, {"cv_table", table}};
}

csv::Table cv_table(const GridSearchResult& r) {
  csv::Table t;
  t.header = {"cell", "fold", "hidden_sizes", "learning_rate", "l2_scale", "auroc", "epochs", "stop_reason"};
  for (const auto& row : r.table) {
    std::string hidden;
    for (std::size_t i = 0; i < row.hidden_sizes.size(); ++i) {
      hidden += (i ? "-" : "") + std::to_string(row.hidden_sizes[i]);
    }
    t.rows.push_back({std::to_string(row.cell), std::to_string(row.fold), hidden,
                      csv::format_double(row.learning_rate), csv::format_double(row.l2_scale),
                      csv::format_double(row.auroc), std::to_string(row.epochs), row.stop_reason});
  }
  return t;
}

}  // namespace readmit
