#include "readmit/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "readmit/csv.hpp"
#include "readmit/error.hpp"
#include "readmit/random.hpp"
#include "util.hpp"

namespace readmit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string_view to_string(FeatureCategory category) noexcept {
  switch (category) {
    case FeatureCategory::demographic: return "demographic";
    case FeatureCategory::clinical: return "clinical";
    case FeatureCategory::laboratory: return "laboratory";
  }
  return "laboratory";
}

FeatureCategory parse_feature_category(std::string_view text) {
  if (text == "demographic") return FeatureCategory::demographic;
  if (text == "clinical") return FeatureCategory::clinical;
  if (text == "laboratory") return FeatureCategory::laboratory;
  throw ConfigError("category", "unknown feature category '" + std::string(text) + "'");
}

std::vector<FeatureSpec> canonical_schema() {
  using C = FeatureCategory;
  return {
      {"age", C::demographic, "years"},
      {"hospital_stay", C::clinical, "days"},
      {"SpO2", C::clinical, "%"},
      {"ALT", C::laboratory, "U/L"},
      {"chloride", C::laboratory, "mEq/L"},
      {"creatinine", C::laboratory, "mg/dL"},
      {"sodium", C::laboratory, "mEq/L"},
      {"MCHC", C::laboratory, "g/dL"},
      {"monocytes", C::laboratory, "%"},
      {"neutrophils", C::laboratory, "%"},
      {"PT", C::laboratory, "s"},
      {"INR", C::laboratory, "ratio"},
  };
}

std::vector<FeatureSpec> extended_schema() {
  auto schema = canonical_schema();
  for (int i = 1; i <= 21; ++i) {
    std::ostringstream name;
    name << "candidate_" << (i < 10 ? "0" : "") << i;
    schema.push_back({name.str(), FeatureCategory::laboratory, ""});
  }
  return schema;
}

// ---------------------------------------------------------------------------
// DataMatrix

DataMatrix::DataMatrix(std::vector<FeatureSpec> columns, Eigen::MatrixXd values,
                       MaskMatrix mask)
    : columns_(std::move(columns)), values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols()) {
    throw DataError("DataMatrix: values and mask shapes differ");
  }
  if (static_cast<Index>(columns_.size()) != values_.cols()) {
    throw DataError("DataMatrix: column count does not match values");
  }
  std::set<std::string_view> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name).second) {
      throw DataError("DataMatrix: duplicate column '" + c.name + "'");
    }
  }
  for (Index j = 0; j < values_.cols(); ++j) {
    for (Index i = 0; i < values_.rows(); ++i) {
      if (!mask_(i, j)) {
        values_(i, j) = kNaN;
      } else if (!std::isfinite(values_(i, j))) {
        throw DataError("DataMatrix: non-finite observed value in column '" +
                        columns_[j].name + "'");
      }
    }
  }
}

DataMatrix DataMatrix::fully_observed(std::vector<FeatureSpec> columns,
                                      Eigen::MatrixXd values) {
  MaskMatrix mask = MaskMatrix::Constant(values.rows(), values.cols(), true);
  return DataMatrix(std::move(columns), std::move(values), std::move(mask));
}

std::vector<std::string> DataMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

std::optional<Index> DataMatrix::find_column(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return static_cast<Index>(j);
  }
  return std::nullopt;
}

Index DataMatrix::column_index(std::string_view name) const {
  if (auto j = find_column(name)) return *j;
  throw DataError("unknown column '" + std::string(name) + "'");
}

std::vector<double> DataMatrix::observed_column(Index col) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows()));
  for (Index i = 0; i < rows(); ++i) {
    if (mask_(i, col)) out.push_back(values_(i, col));
  }
  return out;
}

DataMatrix DataMatrix::select_rows(std::span<const Index> rows) const {
  Eigen::MatrixXd v(static_cast<Index>(rows.size()), cols());
  MaskMatrix m(static_cast<Index>(rows.size()), cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    v.row(static_cast<Index>(r)) = values_.row(rows[r]);
    m.row(static_cast<Index>(r)) = mask_.row(rows[r]);
  }
  return DataMatrix(columns_, std::move(v), std::move(m));
}

DataMatrix DataMatrix::select_columns(std::span<const std::string> names) const {
  std::vector<FeatureSpec> cols;
  Eigen::MatrixXd v(rows(), static_cast<Index>(names.size()));
  MaskMatrix m(rows(), static_cast<Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Index j = column_index(names[k]);
    cols.push_back(columns_[static_cast<std::size_t>(j)]);
    v.col(static_cast<Index>(k)) = values_.col(j);
    m.col(static_cast<Index>(k)) = mask_.col(j);
  }
  return DataMatrix(std::move(cols), std::move(v), std::move(m));
}

DataMatrix DataMatrix::with_values(Eigen::MatrixXd values) const {
  return fully_observed(columns_, std::move(values));
}

const Eigen::MatrixXd& DataMatrix::require_complete(std::string_view context) const {
  if (!is_fully_observed()) {
    throw DataError(std::string(context) + ": matrix has " +
                    std::to_string(missing_count()) + " missing cells");
  }
  return values_;
}

// ---------------------------------------------------------------------------
// LabeledCohort

Index LabeledCohort::count_label(int label) const {
  return static_cast<Index>(std::count(labels.begin(), labels.end(), label));
}

LabeledCohort LabeledCohort::select_rows(std::span<const Index> rows) const {
  LabeledCohort out;
  out.matrix = matrix.select_rows(rows);
  out.labels.reserve(rows.size());
  out.row_ids.reserve(rows.size());
  for (const Index r : rows) {
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    out.row_ids.push_back(row_ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

void LabeledCohort::validate() const {
  if (static_cast<Index>(labels.size()) != matrix.rows()) {
    throw DataError("cohort: label count does not match row count");
  }
  if (static_cast<Index>(row_ids.size()) != matrix.rows()) {
    throw DataError("cohort: row id count does not match row count");
  }
  for (const int y : labels) {
    if (y != 0 && y != 1) throw DataError("cohort: label outside {0,1}");
  }
}

// ---------------------------------------------------------------------------
// Cohort files

namespace {

bool is_missing_token(std::string_view token) {
  return token.empty() || token == "NA" || token == "NaN" || token == "nan" ||
         token == "N/A";
}

}  // namespace

LabeledCohort read_cohort(std::istream& in, std::span<const FeatureSpec> schema) {
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = csv::split_line(line);
  }
  if (header.empty()) throw DataError("cohort file is empty");

  auto find_header = [&header](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> feature_pos;
  for (const auto& f : schema) {
    const auto pos = find_header(f.name);
    if (!pos) throw DataError("cohort file is missing required column '" + f.name + "'");
    feature_pos.push_back(*pos);
  }
  const auto label_pos = find_header(kLabelColumn);
  if (!label_pos) {
    throw DataError("cohort file is missing label column '" + std::string(kLabelColumn) + "'");
  }
  const auto id_pos = find_header(kRowIdColumn);

  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> observed;
  LabeledCohort cohort;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw DataError("cohort line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row(schema.size(), kNaN);
    std::vector<bool> mask(schema.size(), false);
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& token = fields[feature_pos[k]];
      if (is_missing_token(token)) continue;
      const auto parsed = csv::parse_double(token);
      if (!parsed || !std::isfinite(*parsed)) {
        throw DataError("cohort line " + std::to_string(line_no) + ": column '" +
                        schema[k].name + "' has non-numeric value '" + token + "'");
      }
      row[k] = *parsed;
      mask[k] = true;
    }
    const auto& label_token = fields[*label_pos];
    if (label_token != "0" && label_token != "1") {
      throw DataError("cohort line " + std::to_string(line_no) +
                      ": label outside {0,1}: '" + label_token + "'");
    }
    cohort.labels.push_back(label_token == "1" ? 1 : 0);
    cohort.row_ids.push_back(id_pos ? fields[*id_pos]
                                    : "r" + std::to_string(values.size()));
    values.push_back(std::move(row));
    observed.push_back(std::move(mask));
  }
  if (values.empty()) throw DataError("cohort file has no data rows");

  const auto n = static_cast<Index>(values.size());
  const auto d = static_cast<Index>(schema.size());
  Eigen::MatrixXd v(n, d);
  MaskMatrix m(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      v(i, j) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      m(i, j) = observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  cohort.matrix = DataMatrix({schema.begin(), schema.end()}, std::move(v), std::move(m));
  cohort.validate();
  return cohort;
}

LabeledCohort load_cohort(const std::filesystem::path& path,
                          std::span<const FeatureSpec> schema) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  return read_cohort(in, schema);
}

void write_cohort(std::ostream& out, const LabeledCohort& cohort) {
  cohort.validate();
  const auto& m = cohort.matrix;
  out << kRowIdColumn;
  for (const auto& c : m.columns()) out << ',' << c.name;
  out << ',' << kLabelColumn << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    out << cohort.row_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m.cols(); ++j) {
      out << ',';
      if (m.observed(i, j)) out << csv::format_double(m.value(i, j));
    }
    out << ',' << cohort.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

void write_cohort(const std::filesystem::path& path, const LabeledCohort& cohort) {
  auto out = detail::open_output(path);
  write_cohort(out, cohort);
}

// ---------------------------------------------------------------------------
// Split

Index test_count(Index n, double train_fraction) {
  return static_cast<Index>(
      std::floor(static_cast<double>(n) * (1.0 - train_fraction) + 1e-9));
}

SplitIndices split(const LabeledCohort& cohort, double train_fraction,
                   std::uint64_t seed, bool stratified) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction", "must lie strictly inside (0, 1)");
  }
  const Index n = cohort.rows();
  if (n < 2) throw DataError("split: need at least two rows");

  Rng rng(seed);
  std::vector<Index> test;
  auto take_test = [&](std::vector<Index> pool) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const Index count = test_count(static_cast<Index>(pool.size()), train_fraction);
    test.insert(test.end(), pool.begin(), pool.begin() + count);
  };

  if (stratified) {
    std::vector<Index> negatives;
    std::vector<Index> positives;
    for (Index i = 0; i < n; ++i) {
      (cohort.labels[static_cast<std::size_t>(i)] == 1 ? positives : negatives).push_back(i);
    }
    if (negatives.empty() || positives.empty()) {
      throw DataError("split: stratified split requires both classes");
    }
    take_test(std::move(negatives));
    take_test(std::move(positives));
  } else {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    take_test(std::move(all));
  }

  std::sort(test.begin(), test.end());
  SplitIndices out;
  out.seed = seed;
  out.train_fraction = train_fraction;
  out.stratified = stratified;
  out.test = test;
  std::size_t t = 0;
  for (Index i = 0; i < n; ++i) {
    if (t < test.size() && test[t] == i) {
      ++t;
    } else {
      out.train.push_back(i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

void SynthCohortSpec::validate() const {
  if (n < 2) throw ConfigError("synthetic.n", "must be at least 2");
  if (!(prevalence > 0.0 && prevalence < 1.0)) {
    throw ConfigError("synthetic.prevalence", "must lie strictly inside (0, 1)");
  }
  if (!(correlation >= 0.0 && correlation < 1.0)) {
    throw ConfigError("synthetic.correlation", "must lie in [0, 1)");
  }
  if (features.empty()) throw ConfigError("synthetic.features", "must not be empty");
  std::set<std::string_view> names;
  for (std::size_t k = 0; k < features.size(); ++k) {
    const auto& f = features[k];
    const std::string path = "synthetic.features[" + std::to_string(k) + "]";
    if (!names.insert(f.spec.name).second) {
      throw ConfigError(path + ".name", "duplicate feature '" + f.spec.name + "'");
    }
    if (!(f.sd0 >= 0.0) || !(f.sd1 >= 0.0)) throw ConfigError(path, "sd must be >= 0");
    if (!std::isfinite(f.mean0) || !std::isfinite(f.mean1)) {
      throw ConfigError(path, "means must be finite");
    }
    if (!(f.lower <= f.upper)) throw ConfigError(path, "lower bound exceeds upper bound");
    if (!(f.missing_rate >= 0.0 && f.missing_rate < 1.0)) {
      throw ConfigError(path + ".missing_rate", "must lie in [0, 1)");
    }
  }
}

std::vector<FeatureSpec> SynthCohortSpec::schema() const {
  std::vector<FeatureSpec> out;
  for (const auto& f : features) out.push_back(f.spec);
  return out;
}

SynthCohortSpec group_cohort_spec(std::size_t n, double prevalence, std::uint64_t seed) {
  struct Row {
    double m0, s0, m1, s1, lo, hi, missing;
  };
  // Order follows canonical_schema().
  const Row rows[] = {
      {65.1, 15.5, 73.5, 13.4, 18.0, kInf, 0.0},     // age
      {13.4, 13.9, 11.6, 20.5, 0.0, kInf, 0.0},      // hospital stay
      {96.5, 2.7, 91.9, 7.5, 0.0, 100.0, 0.02},      // SpO2
      {33.8, 39.8, 118.6, 555.6, 0.0, kInf, 0.08},   // ALT
      {102.4, 4.6, 106.8, 7.5, 0.0, kInf, 0.03},     // chloride
      {0.9, 0.8, 1.4, 1.7, 0.0, kInf, 0.03},         // creatinine
      {138.7, 3.6, 140.8, 6.5, 0.0, kInf, 0.03},     // sodium
      {33.3, 1.5, 33.9, 1.4, 0.0, kInf, 0.05},       // MCHC
      {5.9, 3.0, 3.9, 1.8, 0.0, 100.0, 0.10},        // monocytes
      {76.4, 9.6, 82.3, 13.8, 0.0, 100.0, 0.10},     // neutrophils
      {13.2, 3.0, 14.3, 2.7, 0.0, kInf, 0.06},       // PT
      {1.2, 0.2, 1.2, 0.3, 0.0, kInf, 0.06},         // INR
  };
  SynthCohortSpec spec;
  spec.n = n;
  spec.prevalence = prevalence;
  spec.seed = seed;
  const auto schema = canonical_schema();
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto& r = rows[k];
    spec.features.push_back({schema[k], r.m0, r.s0, r.m1, r.s1, r.lo, r.hi, r.missing});
  }
  return spec;
}

SynthCohortSpec emphasize_signals(SynthCohortSpec base,
                                  const std::map<std::string, double>& gains,
                                  double attenuation) {
  for (auto& f : base.features) {
    const auto it = gains.find(f.spec.name);
    if (it != gains.end()) {
      f.mean1 = f.mean0 + it->second * (f.mean1 - f.mean0);
      continue;
    }
    f.mean1 = f.mean0 + attenuation * (f.mean1 - f.mean0);
    if (f.sd0 > 0.0 && f.sd1 > 0.0) {
      f.sd1 = f.sd0 * std::pow(f.sd1 / f.sd0, attenuation);
    }
  }
  return base;
}

SynthCohortSpec planted_signal_spec(std::size_t n, double prevalence, std::uint64_t seed) {
  return emphasize_signals(group_cohort_spec(n, prevalence, seed),
                           {{"age", 2.0}, {"SpO2", 1.0}}, 0.3);
}

LabeledCohort generate_synthetic(const SynthCohortSpec& spec) {
  spec.validate();
  const auto n = static_cast<Index>(spec.n);
  const auto d = static_cast<Index>(spec.features.size());
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double shared = std::sqrt(spec.correlation);
  const double own = std::sqrt(1.0 - spec.correlation);

  Eigen::MatrixXd values(n, d);
  MaskMatrix mask(n, d);
  LabeledCohort cohort;
  cohort.labels.reserve(spec.n);
  cohort.row_ids.reserve(spec.n);
  for (Index i = 0; i < n; ++i) {
    const int label = uniform(rng) < spec.prevalence ? 1 : 0;
    const double common = spec.correlation > 0.0 ? normal(rng) : 0.0;
    for (Index j = 0; j < d; ++j) {
      const auto& f = spec.features[static_cast<std::size_t>(j)];
      const double z = shared * common + own * normal(rng);
      const double x = label == 1 ? f.mean1 + f.sd1 * z : f.mean0 + f.sd0 * z;
      values(i, j) = std::clamp(x, f.lower, f.upper);
      mask(i, j) = !(f.missing_rate > 0.0 && uniform(rng) < f.missing_rate);
    }
    cohort.labels.push_back(label);
    std::string id = std::to_string(i);
    cohort.row_ids.push_back("p" + std::string(id.size() < 6 ? 6 - id.size() : 0, '0') + id);
  }
  cohort.matrix = DataMatrix(spec.schema(), std::move(values), std::move(mask));
  return cohort;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json bound_to_json(double value) {
  return std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(nullptr);
}

double bound_from_json(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const SynthCohortSpec& spec) {
  j = nlohmann::json::object();
  j["n"] = spec.n;
  j["prevalence"] = spec.prevalence;
  j["seed"] = spec.seed;
  j["correlation"] = spec.correlation;
  auto& features = j["features"] = nlohmann::json::array();
  for (const auto& f : spec.features) {
    features.push_back({{"name", f.spec.name},
                        {"category", to_string(f.spec.category)},
                        {"unit", f.spec.unit},
                        {"mean0", f.mean0},
                        {"sd0", f.sd0},
                        {"mean1", f.mean1},
                        {"sd1", f.sd1},
                        {"lower", bound_to_json(f.lower)},
                        {"upper", bound_to_json(f.upper)},
                        {"missing_rate", f.missing_rate}});
  }
}

void from_json(const nlohmann::json& j, SynthCohortSpec& spec) {
  try {
    const std::size_t n = j.value("n", std::size_t{5000});
    const double prevalence = j.value("prevalence", 0.07);
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("features")) {
      const std::string preset = j.value("preset", std::string("planted_signal"));
      if (preset == "planted_signal") {
        spec = planted_signal_spec(n, prevalence, seed);
      } else if (preset == "group_means") {
        spec = group_cohort_spec(n, prevalence, seed);
      } else {
        throw ConfigError("synthetic.preset", "unknown preset '" + preset + "'");
      }
      spec.correlation = j.value("correlation", 0.0);
      if (j.contains("missing_rate")) {
        const double rate = j.at("missing_rate").get<double>();
        for (auto& f : spec.features) f.missing_rate = rate;
      }
      return;
    }
    spec = SynthCohortSpec{};
    spec.n = n;
    spec.prevalence = prevalence;
    spec.seed = seed;
    spec.correlation = j.value("correlation", 0.0);
    for (const auto& fj : j.at("features")) {
      SynthFeature f;
      f.spec.name = fj.at("name").get<std::string>();
      f.spec.category = parse_feature_category(fj.value("category", std::string("laboratory")));
      f.spec.unit = fj.value("unit", std::string());
      f.mean0 = fj.at("mean0").get<double>();
      f.sd0 = fj.at("sd0").get<double>();
      f.mean1 = fj.at("mean1").get<double>();
      f.sd1 = fj.at("sd1").get<double>();
      f.lower = bound_from_json(fj, "lower", -kInf);
      f.upper = bound_from_json(fj, "upper", kInf);
      f.missing_rate = fj.value("missing_rate", 0.0);
      spec.features.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synthetic", e.what());
  }
}

}  // namespace readmit
