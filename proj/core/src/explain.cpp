#include "readmit/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "readmit/error.hpp"
#include "readmit/random.hpp"

namespace readmit {

namespace {

using Mask = std::uint64_t;

constexpr Index kChunkRows = 8192;
constexpr int kKernelMaxFeatures = 63;

void check_inputs(const Eigen::VectorXd& x, const Eigen::MatrixXd& background, const char* what) {
  if (background.rows() == 0) throw DataError(std::string(what) + ": background is empty");
  if (background.cols() != x.size()) {
    throw DataError(std::string(what) + ": background width does not match the sample");
  }
  if (x.size() == 0) throw DataError(std::string(what) + ": no features");
}

// v(S) for each mask: mean prediction over background rows with the
// features in S taken from x.
std::vector<double> coalition_values(const BatchPredictor& predict, const Eigen::VectorXd& x,
                                     const Eigen::MatrixXd& background, std::span<const Mask> masks) {
  const Index b = background.rows();
  const Index d = background.cols();
  const Index per_chunk = std::max<Index>(1, kChunkRows / b);
  std::vector<double> out(masks.size());
  Eigen::MatrixXd batch;
  for (std::size_t start = 0; start < masks.size(); start += static_cast<std::size_t>(per_chunk)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(per_chunk), masks.size() - start);
    batch.resize(static_cast<Index>(count) * b, d);
    for (std::size_t m = 0; m < count; ++m) {
      const Index offset = static_cast<Index>(m) * b;
      batch.middleRows(offset, b) = background;
      const Mask mask = masks[start + m];
      for (Index j = 0; j < d; ++j) {
        if ((mask >> j) & 1U) batch.block(offset, j, b, 1).setConstant(x(j));
      }
    }
    const Eigen::VectorXd pred = predict(batch);
    if (pred.size() != batch.rows()) throw DataError("predictor returned the wrong number of outputs");
    for (std::size_t m = 0; m < count; ++m) {
      out[start + m] = pred.segment(static_cast<Index>(m) * b, b).mean();
    }
  }
  return out;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

BatchPredictor mlp_predictor(const MlpModel& model) {
  return [model](const Eigen::MatrixXd& x) { return forward(model, x); };
}

ShapExplanation exact_shap(const BatchPredictor& predict, const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& background) {
  check_inputs(x, background, "exact_shap");
  const int d = static_cast<int>(x.size());
  if (d > kExactShapMaxFeatures) {
    throw ConfigError("explain.method", "exact enumeration supports at most " +
                                            std::to_string(kExactShapMaxFeatures) + " features");
  }
  std::vector<Mask> masks(std::size_t{1} << d);
  std::iota(masks.begin(), masks.end(), Mask{0});
  const auto v = coalition_values(predict, x, background, masks);

  // Weight of a coalition of size s not containing j: s! (d - s - 1)! / d!.
  std::vector<double> weight(static_cast<std::size_t>(d));
  for (int s = 0; s < d; ++s) weight[static_cast<std::size_t>(s)] = 1.0 / (d * binomial(d - 1, s));

  ShapExplanation e;
  e.values = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    const Mask bit = Mask{1} << j;
    double phi = 0.0;
    for (Mask s = 0; s < masks.size(); ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    e.values(j) = phi;
  }
  e.base_value = v.front();
  e.prediction = v.back();
  return e;
}

ShapExplanation kernel_shap(const BatchPredictor& predict, const Eigen::VectorXd& x,
                            const Eigen::MatrixXd& background, long n_coalitions, double ridge,
                            std::uint64_t seed) {
  check_inputs(x, background, "kernel_shap");
  const int d = static_cast<int>(x.size());
  if (d > kKernelMaxFeatures) throw ConfigError("explain.method", "too many features for kernel estimation");
  if (n_coalitions < d + 2) {
    throw ConfigError("explain.n_coalitions", "must be at least the feature count + 2");
  }
  if (!(ridge >= 0.0)) throw ConfigError("explain.ridge", "must be >= 0");

  ShapExplanation e;
  const Mask full = d == 64 ? ~Mask{0} : (Mask{1} << d) - 1;
  {
    const Mask ends[2] = {0, full};
    const auto v = coalition_values(predict, x, background, ends);
    e.base_value = v[0];
    e.prediction = v[1];
  }
  if (d == 1) {
    e.values = Eigen::VectorXd::Constant(1, e.prediction - e.base_value);
    return e;
  }

  std::vector<Mask> masks;
  std::vector<double> weights;
  long budget = n_coalitions - 2;
  // Kernel weight of one coalition of size s, and the total mass of size s.
  const auto kernel = [d](int s) { return (d - 1.0) / (binomial(d, s) * s * (d - s)); };
  const auto mass = [d](int s) { return (d - 1.0) / (static_cast<double>(s) * (d - s)); };

  auto enumerate_size = [&](int s) {
    // Gosper's hack over all s-subsets of d bits.
    Mask m = (Mask{1} << s) - 1;
    while (m <= full) {
      masks.push_back(m);
      weights.push_back(kernel(s));
      const Mask c = m & (~m + 1);
      const Mask r = m + c;
      if (r == 0 || r > full) break;
      m = (((r ^ m) >> 2) / c) | r;
    }
  };

  int lo = 1;
  int hi = d - 1;
  while (lo <= hi) {
    const double count = lo == hi ? binomial(d, lo) : 2.0 * binomial(d, lo);
    if (count > static_cast<double>(budget)) break;
    enumerate_size(lo);
    if (hi != lo) enumerate_size(hi);
    budget -= static_cast<long>(count);
    ++lo;
    --hi;
  }

  if (lo <= hi && budget > 0) {
    std::vector<int> sizes;
    std::vector<double> size_mass;
    for (int s = lo; s <= hi; ++s) {
      sizes.push_back(s);
      size_mass.push_back(mass(s));
    }
    const double remaining = std::accumulate(size_mass.begin(), size_mass.end(), 0.0);
    Rng rng(derive_seed(seed, "kernel_shap"));
    std::discrete_distribution<std::size_t> pick_size(size_mass.begin(), size_mass.end());
    std::vector<int> features(static_cast<std::size_t>(d));
    for (long k = 0; k < budget; ++k) {
      const int s = sizes[pick_size(rng)];
      std::iota(features.begin(), features.end(), 0);
      Mask m = 0;
      for (int t = 0; t < s; ++t) {
        std::uniform_int_distribution<int> pick(t, d - 1);
        std::swap(features[static_cast<std::size_t>(t)], features[static_cast<std::size_t>(pick(rng))]);
        m |= Mask{1} << features[static_cast<std::size_t>(t)];
      }
      masks.push_back(m);
      weights.push_back(remaining / static_cast<double>(budget));
    }
  }
  if (masks.empty()) throw NumericError("kernel_shap: no coalitions to regress on; increase n_coalitions");

  const auto v = coalition_values(predict, x, background, masks);
  const double total = e.prediction - e.base_value;
  // Eliminate the last feature through the efficiency constraint.
  const Index p = d - 1;
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd row(p);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const double zd = static_cast<double>((masks[k] >> p) & 1U);
    for (Index j = 0; j < p; ++j) row(j) = static_cast<double>((masks[k] >> j) & 1U) - zd;
    const double target = (v[k] - e.base_value) - zd * total;
    ata.selfadjointView<Eigen::Lower>().rankUpdate(row, weights[k]);
    atb += weights[k] * target * row;
  }
  ata = ata.selfadjointView<Eigen::Lower>();
  ata.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12)) {
    throw NumericError("kernel_shap: singular regression system; increase n_coalitions or ridge");
  }
  const Eigen::VectorXd head = ldlt.solve(atb);
  e.values.resize(d);
  e.values.head(p) = head;
  e.values(p) = total - head.sum();
  return e;
}

ShapSummary shap_summary(std::span<const ShapExplanation> explanations, const DataMatrix& feature_values) {
  if (explanations.empty()) throw DataError("shap_summary: no explanations");
  const Index d = explanations.front().values.size();
  if (feature_values.cols() != d) throw DataError("shap_summary: feature values width does not match");
  if (feature_values.rows() != static_cast<Index>(explanations.size())) {
    throw DataError("shap_summary: one feature row per explanation is required");
  }
  ShapSummary s;
  s.features = feature_values.column_names();
  s.attributions.resize(static_cast<Index>(explanations.size()), d);
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    const auto& e = explanations[i];
    if (e.values.size() != d) throw DataError("shap_summary: explanations differ in dimension");
    s.attributions.row(static_cast<Index>(i)) = e.values.transpose();
    s.base_values.push_back(e.base_value);
    s.predictions.push_back(e.prediction);
  }
  s.feature_values = feature_values.values();
  const Eigen::VectorXd means = s.attributions.cwiseAbs().colwise().mean().transpose();
  s.mean_abs.assign(means.begin(), means.end());
  s.ranking.resize(static_cast<std::size_t>(d));
  std::iota(s.ranking.begin(), s.ranking.end(), std::size_t{0});
  std::stable_sort(s.ranking.begin(), s.ranking.end(),
                   [&s](std::size_t a, std::size_t b) { return s.mean_abs[a] > s.mean_abs[b]; });
  return s;
}

void to_json(nlohmann::json& j, const ShapSummary& s) {
  auto ranking = nlohmann::json::array();
  for (std::size_t r = 0; r < s.ranking.size(); ++r) {
    const auto f = s.ranking[r];
    ranking.push_back({{"rank", r + 1}, {"feature", s.features[f]}, {"mean_abs_shap", s.mean_abs[f]}});
  }
  const double base = s.base_values.empty()
                          ? 0.0
                          : std::accumulate(s.base_values.begin(), s.base_values.end(), 0.0) /
                                static_cast<double>(s.base_values.size());
  j = {{"samples", s.attributions.rows()},
       {"features", s.features},
       {"mean_base_value", base},
       {"ranking", ranking}};
}

csv::Table ranking_table(const ShapSummary& s) {
  csv::Table t;
  t.header = {"rank", "feature", "mean_abs_shap"};
  for (std::size_t r = 0; r < s.ranking.size(); ++r) {
    const auto f = s.ranking[r];
    t.rows.push_back({std::to_string(r + 1), s.features[f], csv::format_double(s.mean_abs[f])});
  }
  return t;
}

csv::Table points_table(const ShapSummary& s) {
  csv::Table t;
  t.header = {"sample", "feature", "value", "shap"};
  for (Index i = 0; i < s.attributions.rows(); ++i) {
    for (Index j = 0; j < s.attributions.cols(); ++j) {
      t.rows.push_back({std::to_string(i), s.features[static_cast<std::size_t>(j)],
                        csv::format_double(s.feature_values(i, j)), csv::format_double(s.attributions(i, j))});
    }
  }
  return t;
}

}  // namespace readmit
