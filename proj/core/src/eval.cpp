#include "readmit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "readmit/error.hpp"
#include "readmit/random.hpp"

namespace readmit {

namespace {

void check_inputs(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (probs.empty()) throw DataError("no scores to evaluate");
  for (const double p : probs) {
    if (!std::isfinite(p)) throw NumericError("non-finite score");
  }
}

struct ClassCounts {
  long positives = 0;
  long negatives = 0;
};

ClassCounts count_classes(std::span<const int> labels) {
  ClassCounts c;
  for (const int y : labels) (y == 1 ? c.positives : c.negatives) += 1;
  return c;
}

void require_both(const ClassCounts& c, const char* what) {
  if (c.positives == 0 || c.negatives == 0) {
    throw DataError(std::string(what) + " requires both classes");
  }
}

// Indices sorted by descending score, stable.
std::vector<std::size_t> descending_order(std::span<const double> probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&probs](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

double rank_auroc(std::span<const double> probs, std::span<const int> labels,
                  const ClassCounts& counts) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&probs](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && probs[order[j + 1]] == probs[order[i]]) ++j;
    // Ranks i+1 .. j+1 share their average.
    const double rank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += rank;
    }
    i = j + 1;
  }
  const auto np = static_cast<double>(counts.positives);
  const auto nn = static_cast<double>(counts.negatives);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

ConfusionCounts confusion_at_threshold(std::span<const double> probs,
                                       std::span<const int> labels, double threshold) {
  check_inputs(probs, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ThresholdMetrics metrics_from_counts(const ConfusionCounts& c) {
  ThresholdMetrics m;
  const long n = c.total();
  m.accuracy = n > 0 ? static_cast<double>(c.tp + c.tn) / static_cast<double>(n) : 0.0;
  if (c.tp + c.fn > 0) m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return m;
}

ThresholdMetrics metrics(std::span<const double> probs, std::span<const int> labels,
                         double threshold) {
  return metrics_from_counts(confusion_at_threshold(probs, labels, threshold));
}

double auroc(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels);
  const auto counts = count_classes(labels);
  require_both(counts, "AUROC");
  return rank_auroc(probs, labels, counts);
}

std::vector<RocPoint> roc_points(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels);
  const auto counts = count_classes(labels);
  require_both(counts, "ROC curve");
  const auto order = descending_order(probs);
  std::vector<RocPoint> points{{0.0, 0.0}};
  long tp = 0;
  long fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = probs[order[i]];
    while (i < order.size() && probs[order[i]] == score) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(counts.negatives),
                      static_cast<double>(tp) / static_cast<double>(counts.positives)});
  }
  if (points.back().fpr != 1.0 || points.back().tpr != 1.0) points.push_back({1.0, 1.0});
  return points;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

ConfidenceInterval bootstrap_ci(std::span<const double> probs, std::span<const int> labels,
                                int n_resamples, double alpha, std::uint64_t seed) {
  check_inputs(probs, labels);
  if (n_resamples < 100) throw ConfigError("evaluate.bootstrap_resamples", "must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("evaluate.alpha", "must lie in (0, 1)");
  const auto counts = count_classes(labels);
  require_both(counts, "bootstrap CI");
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t i = 0; i < probs.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(probs[i]);

  const std::size_t n = probs.size();
  std::vector<double> sample(n);
  std::vector<int> sample_labels(n, 0);
  std::fill(sample_labels.begin(), sample_labels.begin() + static_cast<std::ptrdiff_t>(pos.size()), 1);
  std::vector<double> aucs;
  aucs.reserve(static_cast<std::size_t>(n_resamples));
  for (int b = 0; b < n_resamples; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, neg.size() - 1);
    for (std::size_t k = 0; k < pos.size(); ++k) sample[k] = pos[pick_pos(rng)];
    for (std::size_t k = 0; k < neg.size(); ++k) sample[pos.size() + k] = neg[pick_neg(rng)];
    aucs.push_back(rank_auroc(sample, sample_labels, counts));
  }
  std::sort(aucs.begin(), aucs.end());
  return {quantile_sorted(aucs, alpha / 2.0), quantile_sorted(aucs, 1.0 - alpha / 2.0)};
}

double youden_threshold(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels);
  const auto counts = count_classes(labels);
  require_both(counts, "Youden threshold");
  const auto order = descending_order(probs);
  long tp = 0;
  long fp = 0;
  double best_j = -2.0;
  double best_threshold = probs[order.front()];
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = probs[order[i]];
    while (i < order.size() && probs[order[i]] == score) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const double j = static_cast<double>(tp) / static_cast<double>(counts.positives) -
                     static_cast<double>(fp) / static_cast<double>(counts.negatives);
    if (j > best_j) {
      best_j = j;
      best_threshold = score;
    }
  }
  return best_threshold;
}

EvalReport evaluate(std::span<const double> probs, std::span<const int> labels,
                    const EvalOptions& options) {
  EvalReport r;
  r.n = static_cast<long>(probs.size());
  r.positives = count_classes(labels).positives;
  r.auroc = auroc(probs, labels);
  r.alpha = options.alpha;
  r.bootstrap_resamples = options.bootstrap_resamples;
  r.auroc_ci = bootstrap_ci(probs, labels, options.bootstrap_resamples, options.alpha, options.seed);
  r.fixed.threshold = options.threshold;
  r.fixed.confusion = confusion_at_threshold(probs, labels, options.threshold);
  r.fixed.metrics = metrics_from_counts(r.fixed.confusion);
  r.youden.threshold = youden_threshold(probs, labels);
  r.youden.confusion = confusion_at_threshold(probs, labels, r.youden.threshold);
  r.youden.metrics = metrics_from_counts(r.youden.confusion);
  r.roc = roc_points(probs, labels);
  return r;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json operating_point_json(const OperatingPoint& p) {
  return {{"threshold", p.threshold},
          {"accuracy", p.metrics.accuracy},
          {"sensitivity", optional_json(p.metrics.sensitivity)},
          {"specificity", optional_json(p.metrics.specificity)},
          {"confusion",
           {{"tp", p.confusion.tp}, {"fp", p.confusion.fp}, {"tn", p.confusion.tn}, {"fn", p.confusion.fn}}}};
}

}  // namespace

void to_json(nlohmann::json& j, const EvalReport& r) {
  auto roc = nlohmann::json::array();
  for (const auto& p : r.roc) roc.push_back({p.fpr, p.tpr});
  j = {{"n", r.n},
       {"positives", r.positives},
       {"auroc", r.auroc},
       {"auroc_ci",
        {{"low", r.auroc_ci.low},
         {"high", r.auroc_ci.high},
         {"level", 1.0 - r.alpha},
         {"method", "stratified percentile bootstrap"},
         {"resamples", r.bootstrap_resamples}}},
       {"fixed_threshold", operating_point_json(r.fixed)},
       {"youden", operating_point_json(r.youden)},
       {"roc_points", roc}};
}

csv::Table roc_table(std::span<const RocPoint> points) {
  csv::Table t;
  t.header = {"fpr", "tpr"};
  for (const auto& p : points) {
    t.rows.push_back({csv::format_double(p.fpr), csv::format_double(p.tpr)});
  }
  return t;
}

}  // namespace readmit
