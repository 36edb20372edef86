#include "readmit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "readmit/error.hpp"

namespace readmit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ColumnMoments {
  double mean = 0.0;
  double sd = 0.0;
  Index count = 0;
};

ColumnMoments observed_moments(const DataMatrix& m, Index j) {
  ColumnMoments out;
  double sum = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    if (m.observed(i, j)) {
      sum += m.value(i, j);
      ++out.count;
    }
  }
  if (out.count == 0) return out;
  out.mean = sum / static_cast<double>(out.count);
  double ss = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    if (m.observed(i, j)) ss += (m.value(i, j) - out.mean) * (m.value(i, j) - out.mean);
  }
  out.sd = out.count > 1 ? std::sqrt(ss / static_cast<double>(out.count - 1)) : 0.0;
  return out;
}

std::vector<Index> resolve_columns(const DataMatrix& m, std::span<const std::string> names) {
  std::vector<Index> out;
  if (names.empty()) {
    out.resize(static_cast<std::size_t>(m.cols()));
    std::iota(out.begin(), out.end(), Index{0});
    return out;
  }
  for (const auto& name : names) out.push_back(m.column_index(name));
  return out;
}

}  // namespace

std::string_view to_string(ImputePolicy policy) noexcept {
  switch (policy) {
    case ImputePolicy::none: return "none";
    case ImputePolicy::most_frequent: return "most_frequent";
    case ImputePolicy::drop: return "drop";
    case ImputePolicy::knn: return "knn";
    case ImputePolicy::iterative: return "iterative";
  }
  return "none";
}

std::string_view to_string(ColumnKind kind) noexcept {
  return kind == ColumnKind::categorical ? "categorical" : "numeric";
}

ImputePolicy assign_policy(ColumnKind kind, double missing_fraction) noexcept {
  if (missing_fraction <= 0.0) return ImputePolicy::none;
  if (kind == ColumnKind::categorical) {
    return missing_fraction <= 0.2 ? ImputePolicy::most_frequent : ImputePolicy::drop;
  }
  if (missing_fraction <= 0.2) return ImputePolicy::knn;
  if (missing_fraction <= 0.5) return ImputePolicy::iterative;
  return ImputePolicy::drop;
}

std::vector<std::string> MissingnessProfile::columns_with(ImputePolicy policy) const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.policy == policy) out.push_back(c.name);
  }
  return out;
}

MissingnessProfile profile_missingness(const DataMatrix& matrix,
                                       std::span<const ColumnKind> kinds) {
  if (!kinds.empty() && static_cast<Index>(kinds.size()) != matrix.cols()) {
    throw ConfigError("impute.column_kinds", "expected one kind per column");
  }
  MissingnessProfile profile;
  for (Index j = 0; j < matrix.cols(); ++j) {
    ColumnProfile c;
    c.name = matrix.columns()[static_cast<std::size_t>(j)].name;
    c.kind = kinds.empty() ? ColumnKind::numeric : kinds[static_cast<std::size_t>(j)];
    const Index missing = matrix.rows() - matrix.mask().col(j).count();
    c.missing_fraction = matrix.rows() == 0
                             ? 0.0
                             : static_cast<double>(missing) / static_cast<double>(matrix.rows());
    c.policy = assign_policy(c.kind, c.missing_fraction);
    profile.columns.push_back(std::move(c));
  }
  return profile;
}

// ---------------------------------------------------------------------------

MostFrequentImputer MostFrequentImputer::fit(const DataMatrix& matrix,
                                             std::span<const std::string> columns) {
  MostFrequentImputer out;
  for (const Index j : resolve_columns(matrix, columns)) {
    std::map<double, Index> counts;
    for (Index i = 0; i < matrix.rows(); ++i) {
      if (matrix.observed(i, j)) ++counts[matrix.value(i, j)];
    }
    const auto& name = matrix.columns()[static_cast<std::size_t>(j)].name;
    if (counts.empty()) {
      throw DataError("most-frequent imputation: column '" + name + "' is fully missing");
    }
    // std::map iterates ascending, so strict > keeps the smallest tied value.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    out.columns_.push_back(name);
    out.modes_.push_back(best->first);
  }
  return out;
}

DataMatrix MostFrequentImputer::apply(const DataMatrix& matrix) const {
  Eigen::MatrixXd values = matrix.values();
  MaskMatrix mask = matrix.mask();
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const Index j = matrix.column_index(columns_[k]);
    for (Index i = 0; i < matrix.rows(); ++i) {
      if (!mask(i, j)) {
        values(i, j) = modes_[k];
        mask(i, j) = true;
      }
    }
  }
  return DataMatrix(matrix.columns(), std::move(values), std::move(mask));
}

// ---------------------------------------------------------------------------

double masked_euclidean(const DataMatrix& a, Index row_a, const DataMatrix& b, Index row_b) {
  const Index d = a.cols();
  double sum = 0.0;
  Index shared = 0;
  for (Index j = 0; j < d; ++j) {
    if (a.observed(row_a, j) && b.observed(row_b, j)) {
      const double diff = a.value(row_a, j) - b.value(row_b, j);
      sum += diff * diff;
      ++shared;
    }
  }
  if (shared == 0) return kInf;
  return std::sqrt(static_cast<double>(d) / static_cast<double>(shared) * sum);
}

KnnImputer KnnImputer::fit(DataMatrix reference, int k) {
  if (k < 1) throw ConfigError("impute.knn_k", "must be at least 1");
  KnnImputer out;
  out.k_ = k;
  out.column_means_.resize(reference.cols());
  for (Index j = 0; j < reference.cols(); ++j) {
    const auto moments = observed_moments(reference, j);
    out.column_means_(j) = moments.count > 0 ? moments.mean : 0.0;
  }
  out.reference_ = std::move(reference);
  return out;
}

DataMatrix KnnImputer::apply(const DataMatrix& matrix, std::span<const std::string> columns,
                             ImputeStats* stats) const {
  if (matrix.column_names() != reference_.column_names()) {
    throw DataError("KNN imputation: matrix columns differ from the reference");
  }
  const auto targets = resolve_columns(matrix, columns);
  for (const Index j : targets) {
    if (reference_.mask().col(j).count() == 0) {
      throw DataError("KNN imputation: column '" +
                      matrix.columns()[static_cast<std::size_t>(j)].name +
                      "' has no observed reference value");
    }
  }
  Eigen::MatrixXd values = matrix.values();
  MaskMatrix mask = matrix.mask();
  const Index n_ref = reference_.rows();
  std::vector<double> distance(static_cast<std::size_t>(n_ref));
  std::vector<Index> eligible;
  eligible.reserve(static_cast<std::size_t>(n_ref));

  for (Index i = 0; i < matrix.rows(); ++i) {
    bool needs = false;
    for (const Index j : targets) needs = needs || !matrix.observed(i, j);
    if (!needs) continue;
    for (Index r = 0; r < n_ref; ++r) {
      distance[static_cast<std::size_t>(r)] = masked_euclidean(matrix, i, reference_, r);
    }
    for (const Index j : targets) {
      if (matrix.observed(i, j)) continue;
      eligible.clear();
      for (Index r = 0; r < n_ref; ++r) {
        if (reference_.observed(r, j) && std::isfinite(distance[static_cast<std::size_t>(r)])) {
          eligible.push_back(r);
        }
      }
      double fill = 0.0;
      if (eligible.empty()) {
        fill = column_means_(j);
        if (stats) ++stats->fallback_cells;
      } else {
        const auto take = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(k_));
        auto closer = [&distance](Index a, Index b) {
          const double da = distance[static_cast<std::size_t>(a)];
          const double db = distance[static_cast<std::size_t>(b)];
          return da < db || (da == db && a < b);
        };
        std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take),
                          eligible.end(), closer);
        double sum = 0.0;
        for (std::size_t t = 0; t < take; ++t) sum += reference_.value(eligible[t], j);
        fill = sum / static_cast<double>(take);
      }
      values(i, j) = fill;
      mask(i, j) = true;
      if (stats) ++stats->imputed_cells;
    }
  }
  if (stats && stats->fallback_cells > 0) {
    stats->notes.push_back("knn: " + std::to_string(stats->fallback_cells) +
                           " cells had no eligible neighbor; column mean used");
  }
  return DataMatrix(matrix.columns(), std::move(values), std::move(mask));
}

DataMatrix knn_impute(const DataMatrix& matrix, int k, ImputeStats* stats) {
  return KnnImputer::fit(matrix, k).apply(matrix, {}, stats);
}

// ---------------------------------------------------------------------------

namespace {

// Ridge fit of column `target` of `x` on all other columns over `rows`.
// Predictors are standardized internally so the penalty is scale-free.
ColumnRegression fit_column_regression(const Eigen::MatrixXd& x, Index target,
                                       const std::vector<Index>& rows, double penalty) {
  ColumnRegression reg;
  reg.target = target;
  reg.coefficients = Eigen::VectorXd::Zero(x.cols());
  const auto n = static_cast<Index>(rows.size());
  double y_mean = 0.0;
  for (const Index r : rows) y_mean += x(r, target);
  y_mean /= static_cast<double>(n);

  std::vector<Index> predictors;
  std::vector<double> p_mean;
  std::vector<double> p_sd;
  for (Index c = 0; c < x.cols(); ++c) {
    if (c == target) continue;
    double mean = 0.0;
    for (const Index r : rows) mean += x(r, c);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const Index r : rows) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0.0) {
      predictors.push_back(c);
      p_mean.push_back(mean);
      p_sd.push_back(sd);
    }
  }
  reg.intercept = y_mean;
  if (predictors.empty()) {
    reg.degenerate = true;
    return reg;
  }
  const auto p = static_cast<Index>(predictors.size());
  Eigen::MatrixXd z(n, p);
  Eigen::VectorXd y(n);
  for (Index a = 0; a < n; ++a) {
    const Index r = rows[static_cast<std::size_t>(a)];
    y(a) = x(r, target) - y_mean;
    for (Index b = 0; b < p; ++b) {
      const auto bb = static_cast<std::size_t>(b);
      z(a, b) = (x(r, predictors[bb]) - p_mean[bb]) / p_sd[bb];
    }
  }
  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += penalty;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  Eigen::VectorXd beta = ldlt.solve(z.transpose() * y);
  if (ldlt.info() != Eigen::Success || !beta.allFinite()) {
    reg.degenerate = true;
    return reg;
  }
  for (Index b = 0; b < p; ++b) {
    const auto bb = static_cast<std::size_t>(b);
    const double coef = beta(b) / p_sd[bb];
    reg.coefficients(predictors[bb]) = coef;
    reg.intercept -= coef * p_mean[bb];
  }
  return reg;
}

double predict_row(const ColumnRegression& reg, const Eigen::MatrixXd& x, Index row) {
  return reg.intercept + x.row(row).dot(reg.coefficients);
}

struct IterativeState {
  Eigen::MatrixXd x;
  Eigen::VectorXd means;
  Eigen::VectorXd sds;
  std::vector<Index> incomplete;
};

IterativeState initialize_iterative(const DataMatrix& matrix) {
  if (matrix.cols() < 2) throw DataError("iterative imputation needs at least two columns");
  IterativeState state;
  state.x = matrix.values();
  state.means.resize(matrix.cols());
  state.sds.resize(matrix.cols());
  for (Index j = 0; j < matrix.cols(); ++j) {
    const auto moments = observed_moments(matrix, j);
    const bool has_missing = moments.count < matrix.rows();
    if (has_missing && moments.count < 2) {
      throw DataError("iterative imputation: column '" +
                      matrix.columns()[static_cast<std::size_t>(j)].name +
                      "' needs at least two observed values");
    }
    state.means(j) = moments.mean;
    state.sds(j) = moments.sd;
    if (has_missing) state.incomplete.push_back(j);
    for (Index i = 0; i < matrix.rows(); ++i) {
      if (!matrix.observed(i, j)) state.x(i, j) = moments.mean;
    }
  }
  return state;
}

double relative_change(double before, double after, double sd) {
  const double change = std::abs(after - before);
  return sd > 0.0 ? change / sd : change;
}

}  // namespace

DataMatrix iterative_impute(const DataMatrix& matrix, const IterativeOptions& options,
                            IterativeTrace* trace) {
  if (options.max_iter < 0) throw ConfigError("impute.iterative_max_iter", "must be >= 0");
  if (options.ridge_penalty < 0.0) throw ConfigError("impute.ridge_penalty", "must be >= 0");
  auto state = initialize_iterative(matrix);
  IterativeTrace local;
  IterativeTrace& t = trace ? *trace : local;
  t = IterativeTrace{};
  for (const Index j : state.incomplete) {
    t.stats.imputed_cells += matrix.rows() - matrix.mask().col(j).count();
  }
  if (state.incomplete.empty()) {
    t.converged = true;
    return matrix.with_values(state.x);
  }

  std::vector<std::vector<Index>> observed_rows(state.incomplete.size());
  for (std::size_t k = 0; k < state.incomplete.size(); ++k) {
    for (Index i = 0; i < matrix.rows(); ++i) {
      if (matrix.observed(i, state.incomplete[k])) observed_rows[k].push_back(i);
    }
  }

  std::vector<bool> reported(state.incomplete.size(), false);
  for (int round = 0; round < options.max_iter; ++round) {
    double max_change = 0.0;
    for (std::size_t k = 0; k < state.incomplete.size(); ++k) {
      const Index j = state.incomplete[k];
      const auto reg = fit_column_regression(state.x, j, observed_rows[k], options.ridge_penalty);
      if (reg.degenerate && !reported[k]) {
        reported[k] = true;
        const Index cells = matrix.rows() - matrix.mask().col(j).count();
        t.stats.fallback_cells += cells;
        t.stats.notes.push_back("iterative: degenerate design for column '" +
                                matrix.columns()[static_cast<std::size_t>(j)].name +
                                "'; column mean used");
      }
      for (Index i = 0; i < matrix.rows(); ++i) {
        if (matrix.observed(i, j)) continue;
        const double updated = reg.degenerate ? state.means(j) : predict_row(reg, state.x, i);
        max_change = std::max(max_change, relative_change(state.x(i, j), updated, state.sds(j)));
        state.x(i, j) = updated;
      }
    }
    t.max_relative_change.push_back(max_change);
    t.rounds = round + 1;
    if (max_change <= options.tolerance) {
      t.converged = true;
      break;
    }
  }
  if (options.max_iter == 0) t.converged = true;
  return matrix.with_values(state.x);
}

IterativeImputer IterativeImputer::fit(const DataMatrix& matrix, const IterativeOptions& options,
                                       IterativeTrace* trace) {
  IterativeImputer out;
  out.options_ = options;
  const auto completed = iterative_impute(matrix, options, trace);
  const auto state = initialize_iterative(matrix);
  out.means_ = state.means;
  out.sds_ = state.sds;
  const auto& x = completed.values();
  for (Index j = 0; j < matrix.cols(); ++j) {
    std::vector<Index> rows;
    for (Index i = 0; i < matrix.rows(); ++i) {
      if (matrix.observed(i, j)) rows.push_back(i);
    }
    if (rows.size() < 2) {
      ColumnRegression reg;
      reg.target = j;
      reg.degenerate = true;
      reg.intercept = state.means(j);
      reg.coefficients = Eigen::VectorXd::Zero(matrix.cols());
      out.regressions_.push_back(std::move(reg));
    } else {
      out.regressions_.push_back(fit_column_regression(x, j, rows, options.ridge_penalty));
    }
  }
  return out;
}

DataMatrix IterativeImputer::apply(const DataMatrix& matrix, ImputeStats* stats) const {
  if (matrix.cols() != means_.size()) {
    throw DataError("iterative imputation: column count differs from the fitted model");
  }
  Eigen::MatrixXd x = matrix.values();
  std::vector<Index> incomplete;
  for (Index j = 0; j < matrix.cols(); ++j) {
    bool any = false;
    for (Index i = 0; i < matrix.rows(); ++i) {
      if (!matrix.observed(i, j)) {
        x(i, j) = means_(j);
        any = true;
        if (stats) ++stats->imputed_cells;
      }
    }
    if (any) incomplete.push_back(j);
  }
  for (int round = 0; round < options_.max_iter && !incomplete.empty(); ++round) {
    double max_change = 0.0;
    for (const Index j : incomplete) {
      const auto& reg = regressions_[static_cast<std::size_t>(j)];
      for (Index i = 0; i < matrix.rows(); ++i) {
        if (matrix.observed(i, j)) continue;
        const double updated = reg.degenerate ? means_(j) : predict_row(reg, x, i);
        max_change = std::max(max_change, relative_change(x(i, j), updated, sds_(j)));
        x(i, j) = updated;
      }
    }
    if (max_change <= options_.tolerance) break;
  }
  return matrix.with_values(std::move(x));
}

// ---------------------------------------------------------------------------

Scaler Scaler::fit(const DataMatrix& matrix) {
  const auto& x = matrix.require_complete("scaler fit");
  if (x.rows() < 2) throw DataError("scaler fit: need at least two rows");
  Scaler s;
  s.columns_ = matrix.column_names();
  s.means_ = x.colwise().mean().transpose();
  s.sds_.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - s.means_(j)).square().sum();
    s.sds_(j) = std::sqrt(ss / static_cast<double>(x.rows() - 1));
    if (!(s.sds_(j) > 0.0)) {
      throw DataError("scaler fit: column '" + s.columns_[static_cast<std::size_t>(j)] +
                      "' is constant");
    }
  }
  return s;
}

DataMatrix Scaler::apply(const DataMatrix& matrix) const {
  if (matrix.column_names() != columns_) throw DataError("scaler: column mismatch");
  Eigen::MatrixXd v = matrix.values();
  for (Index j = 0; j < v.cols(); ++j) {
    v.col(j) = ((v.col(j).array() - means_(j)) / sds_(j)).matrix();
  }
  return DataMatrix(matrix.columns(), std::move(v), matrix.mask());
}

DataMatrix Scaler::invert(const DataMatrix& matrix) const {
  if (matrix.column_names() != columns_) throw DataError("scaler: column mismatch");
  Eigen::MatrixXd v = matrix.values();
  for (Index j = 0; j < v.cols(); ++j) {
    v.col(j) = (v.col(j).array() * sds_(j) + means_(j)).matrix();
  }
  return DataMatrix(matrix.columns(), std::move(v), matrix.mask());
}

Scaler Scaler::subset(std::span<const std::string> names) const {
  Scaler out;
  out.means_.resize(static_cast<Index>(names.size()));
  out.sds_.resize(static_cast<Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find(columns_.begin(), columns_.end(), names[k]);
    if (it == columns_.end()) throw DataError("scaler: unknown column '" + names[k] + "'");
    const auto j = static_cast<Index>(it - columns_.begin());
    out.columns_.push_back(names[k]);
    out.means_(static_cast<Index>(k)) = means_(j);
    out.sds_(static_cast<Index>(k)) = sds_(j);
  }
  return out;
}

void to_json(nlohmann::json& j, const Scaler& scaler) {
  j = {{"columns", scaler.columns_},
       {"means", std::vector<double>(scaler.means_.begin(), scaler.means_.end())},
       {"sds", std::vector<double>(scaler.sds_.begin(), scaler.sds_.end())}};
}

void from_json(const nlohmann::json& j, Scaler& scaler) {
  scaler.columns_ = j.at("columns").get<std::vector<std::string>>();
  const auto means = j.at("means").get<std::vector<double>>();
  const auto sds = j.at("sds").get<std::vector<double>>();
  if (means.size() != scaler.columns_.size() || sds.size() != scaler.columns_.size()) {
    throw DataError("scaler document: length mismatch");
  }
  scaler.means_ = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Index>(means.size()));
  scaler.sds_ = Eigen::Map<const Eigen::VectorXd>(sds.data(), static_cast<Index>(sds.size()));
}

// ---------------------------------------------------------------------------

Preprocessor Preprocessor::fit(const DataMatrix& train, const PreprocessOptions& options) {
  Preprocessor p;
  p.options_ = options;
  p.profile_ = profile_missingness(train, options.kinds);
  for (const auto& c : p.profile_.columns) {
    (c.policy == ImputePolicy::drop ? p.dropped_ : p.retained_).push_back(c.name);
  }
  p.most_frequent_cols_ = p.profile_.columns_with(ImputePolicy::most_frequent);
  p.knn_cols_ = p.profile_.columns_with(ImputePolicy::knn);
  p.iterative_cols_ = p.profile_.columns_with(ImputePolicy::iterative);

  auto x = train.select_columns(p.retained_);
  p.most_frequent_ = MostFrequentImputer::fit(x, p.most_frequent_cols_);
  x = p.most_frequent_.apply(x);
  p.knn_ = KnnImputer::fit(x, options.knn_k);
  if (!p.knn_cols_.empty()) x = p.knn_.apply(x, p.knn_cols_);
  if (!p.iterative_cols_.empty()) {
    p.iterative_ = IterativeImputer::fit(x, options.iterative);
    p.has_iterative_ = true;
  }
  return p;
}

DataMatrix Preprocessor::apply(const DataMatrix& matrix, std::span<const std::string> row_ids,
                               ImputationAudit* audit) const {
  auto x = matrix.select_columns(retained_);
  if (audit) {
    std::map<std::string, ImputePolicy> policy_of;
    for (const auto& c : profile_.columns) policy_of[c.name] = c.policy;
    for (Index j = 0; j < x.cols(); ++j) {
      const auto& name = x.columns()[static_cast<std::size_t>(j)].name;
      for (Index i = 0; i < x.rows(); ++i) {
        if (x.observed(i, j)) continue;
        ImputedCell cell;
        cell.row_id = row_ids.empty() ? std::to_string(i) : row_ids[static_cast<std::size_t>(i)];
        cell.column = name;
        // Columns complete at fit time but incomplete here fall through to KNN.
        const auto policy = policy_of[name];
        cell.policy = policy == ImputePolicy::none ? ImputePolicy::knn : policy;
        audit->cells.push_back(std::move(cell));
      }
    }
  }
  x = most_frequent_.apply(x);

  // Columns that were complete in training but have gaps here use KNN.
  std::vector<std::string> knn_targets = knn_cols_;
  for (const auto& c : profile_.columns) {
    if (c.policy != ImputePolicy::none) continue;
    const Index j = x.column_index(c.name);
    if (x.mask().col(j).count() < x.rows()) knn_targets.push_back(c.name);
  }
  ImputeStats knn_stats;
  if (!knn_targets.empty()) x = knn_.apply(x, knn_targets, &knn_stats);
  ImputeStats iter_stats;
  if (has_iterative_) x = iterative_.apply(x, &iter_stats);
  if (audit) {
    audit->fallback_cells += knn_stats.fallback_cells + iter_stats.fallback_cells;
    audit->notes.insert(audit->notes.end(), knn_stats.notes.begin(), knn_stats.notes.end());
    audit->notes.insert(audit->notes.end(), iter_stats.notes.begin(), iter_stats.notes.end());
  }
  return x;
}

void to_json(nlohmann::json& j, const MissingnessProfile& profile) {
  j = nlohmann::json::array();
  for (const auto& c : profile.columns) {
    j.push_back({{"name", c.name},
                 {"kind", to_string(c.kind)},
                 {"missing_fraction", c.missing_fraction},
                 {"policy", to_string(c.policy)}});
  }
}

void to_json(nlohmann::json& j, const ImputationAudit& audit) {
  std::map<std::string, std::map<std::string, int>> counts;
  auto cells = nlohmann::json::array();
  for (const auto& c : audit.cells) {
    ++counts[c.column][std::string(to_string(c.policy))];
    cells.push_back({{"row_id", c.row_id}, {"column", c.column}, {"policy", to_string(c.policy)}});
  }
  j = {{"imputed_cells", audit.cells.size()},
       {"fallback_cells", audit.fallback_cells},
       {"per_column", counts},
       {"notes", audit.notes},
       {"cells", cells}};
}

}  // namespace readmit
