#include "readmit/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "readmit/error.hpp"
#include "readmit/random.hpp"

namespace readmit {

void AdasynConfig::validate(const std::string& path) const {
  if (k_neighbors < 1) throw ConfigError(path + ".k_neighbors", "must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError(path + ".beta", "must lie in (0, 1]");
}

namespace {

struct ClassSplit {
  int minority_label = 1;
  std::vector<Index> minority;
  std::vector<Index> majority;
};

ClassSplit split_classes(const Eigen::MatrixXd& x, std::span<const int> labels, const char* what) {
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw DataError(std::string(what) + ": label count does not match rows");
  }
  if (!x.allFinite()) throw DataError(std::string(what) + ": matrix must be fully observed");
  std::vector<Index> rows[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError(std::string(what) + ": labels must be 0 or 1");
    rows[labels[i]].push_back(static_cast<Index>(i));
  }
  if (rows[0].empty() || rows[1].empty()) {
    throw DataError(std::string(what) + " requires both classes");
  }
  ClassSplit s;
  s.minority_label = rows[1].size() <= rows[0].size() ? 1 : 0;
  s.minority = std::move(rows[s.minority_label]);
  s.majority = std::move(rows[1 - s.minority_label]);
  return s;
}

// The k nearest candidates to row `self` (excluded), ordered by (distance, index).
std::vector<Index> nearest(const Eigen::MatrixXd& x, Index self, std::span<const Index> candidates,
                           std::size_t k) {
  std::vector<std::pair<double, Index>> d;
  d.reserve(candidates.size());
  for (const Index c : candidates) {
    if (c == self) continue;
    d.emplace_back((x.row(c) - x.row(self)).squaredNorm(), c);
  }
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<Index> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

ResampleResult passthrough(const Eigen::MatrixXd& x, std::span<const int> labels, const ClassSplit& s,
                           std::string method) {
  ResampleResult r;
  r.method = std::move(method);
  r.x = x;
  r.labels.assign(labels.begin(), labels.end());
  r.original_rows = x.rows();
  r.minority_label = s.minority_label;
  r.minority_count = static_cast<Index>(s.minority.size());
  r.majority_count = static_cast<Index>(s.majority.size());
  return r;
}

void append_synthetic(ResampleResult& r, const Eigen::MatrixXd& x) {
  const auto extra = static_cast<Index>(r.sources.size());
  r.synthetic_count = extra;
  r.x.conservativeResize(r.original_rows + extra, Eigen::NoChange);
  for (Index k = 0; k < extra; ++k) {
    const auto& s = r.sources[static_cast<std::size_t>(k)];
    r.x.row(r.original_rows + k) = x.row(s.seed_row) + s.lambda * (x.row(s.neighbor_row) - x.row(s.seed_row));
  }
  r.labels.resize(static_cast<std::size_t>(r.original_rows + extra), r.minority_label);
}

}  // namespace

ResampleResult adasyn(const Eigen::MatrixXd& x, std::span<const int> labels, const AdasynConfig& config) {
  config.validate();
  const ClassSplit s = split_classes(x, labels, "adasyn");
  if (s.minority.size() < 2) throw DataError("adasyn: minority class needs at least two rows");
  if (config.k_neighbors >= x.rows()) {
    throw ConfigError("resample.adasyn.k_neighbors", "must be smaller than the number of rows");
  }
  ResampleResult r = passthrough(x, labels, s, "adasyn");
  const double ms = static_cast<double>(s.minority.size());
  const double ml = static_cast<double>(s.majority.size());
  r.target_total = std::lround((ml - ms) * config.beta);

  std::vector<Index> all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  const auto k = static_cast<std::size_t>(config.k_neighbors);
  double r_sum = 0.0;
  for (const Index i : s.minority) {
    SeedPointAudit audit;
    audit.row = i;
    int majority = 0;
    for (const Index nb : nearest(x, i, all, k)) {
      if (labels[static_cast<std::size_t>(nb)] != s.minority_label) ++majority;
    }
    audit.r = static_cast<double>(majority) / static_cast<double>(k);
    r_sum += audit.r;
    r.seed_points.push_back(audit);
  }
  if (r.target_total <= 0) return r;

  r.uniform_fallback = r_sum == 0.0;
  // Largest-remainder rounding: every g_i is the floor or ceiling of its quota
  // r_hat_i * G and the counts sum to G exactly. Equal remainders go to the
  // lower ordinal.
  std::vector<double> remainder;
  long assigned = 0;
  for (auto& p : r.seed_points) {
    p.r_hat = r.uniform_fallback ? 1.0 / ms : p.r / r_sum;
    const double quota = p.r_hat * static_cast<double>(r.target_total);
    p.generated = static_cast<int>(std::floor(quota));
    remainder.push_back(quota - std::floor(quota));
    assigned += p.generated;
  }
  std::vector<std::size_t> order(r.seed_points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < r.target_total && k < order.size(); ++k, ++assigned) {
    ++r.seed_points[order[k]].generated;
  }

  for (std::size_t ordinal = 0; ordinal < r.seed_points.size(); ++ordinal) {
    const auto& p = r.seed_points[ordinal];
    if (p.generated == 0) continue;
    const auto neighbors = nearest(x, p.row, s.minority, k);
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(ordinal)));
    std::uniform_int_distribution<std::size_t> pick(0, neighbors.size() - 1);
    std::uniform_real_distribution<double> lambda(0.0, 1.0);
    for (int g = 0; g < p.generated; ++g) {
      SyntheticSource src;
      src.seed_row = p.row;
      src.neighbor_row = neighbors[pick(rng)];
      src.lambda = lambda(rng);
      r.sources.push_back(src);
    }
  }
  append_synthetic(r, x);
  return r;
}

ResampleResult random_oversample(const Eigen::MatrixXd& x, std::span<const int> labels, std::uint64_t seed) {
  const ClassSplit s = split_classes(x, labels, "random oversampling");
  ResampleResult r = passthrough(x, labels, s, "random_oversample");
  r.target_total = static_cast<long>(s.majority.size() - s.minority.size());
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, s.minority.size() - 1);
  for (long g = 0; g < r.target_total; ++g) {
    const Index row = s.minority[pick(rng)];
    r.sources.push_back({row, row, 0.0});
  }
  append_synthetic(r, x);
  return r;
}

void to_json(nlohmann::json& j, const ResampleResult& r) {
  auto points = nlohmann::json::array();
  for (const auto& p : r.seed_points) {
    points.push_back({{"row", p.row}, {"r", p.r}, {"r_hat", p.r_hat}, {"generated", p.generated}});
  }
  j = {{"method", r.method},
       {"original_rows", r.original_rows},
       {"synthetic_count", r.synthetic_count},
       {"minority_label", r.minority_label},
       {"minority_count", r.minority_count},
       {"majority_count", r.majority_count},
       {"G", r.target_total},
       {"uniform_fallback", r.uniform_fallback},
       {"seed_points", points}};
}

}  // namespace readmit
