#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace readmit {

using Index = Eigen::Index;

struct AdasynConfig {
  int k_neighbors = 5;
  double beta = 1.0;  // 1 requests full balance
  std::uint64_t seed = 0;

  void validate(const std::string& path = "resample.adasyn") const;
};

// Provenance of one appended row: s = x[seed_row] + lambda (x[neighbor_row] - x[seed_row]).
struct SyntheticSource {
  Index seed_row = 0;
  Index neighbor_row = 0;
  double lambda = 0.0;
};

struct SeedPointAudit {
  Index row = 0;
  double r = 0.0;      // majority share among the k nearest neighbors
  double r_hat = 0.0;  // normalized density weight
  int generated = 0;
};

struct ResampleResult {
  std::string method;  // "adasyn", "random_oversample", "none"
  Eigen::MatrixXd x;   // original rows first, then synthetic rows
  std::vector<int> labels;
  Index original_rows = 0;
  Index synthetic_count = 0;
  int minority_label = 1;
  Index minority_count = 0;
  Index majority_count = 0;
  long target_total = 0;  // G
  bool uniform_fallback = false;
  std::vector<SeedPointAudit> seed_points;
  std::vector<SyntheticSource> sources;  // one per synthetic row
};

// Adaptive synthetic oversampling with exact brute-force neighbors; distance
// ties go to the lower row index. Per-point counts round the quotas
// r_hat_i * G by largest remainder, so they sum to G. Seed point i draws from substream
// derive_seed(seed, i).
ResampleResult adasyn(const Eigen::MatrixXd& x, std::span<const int> labels,
                      const AdasynConfig& config);

// Duplicates uniformly chosen minority rows until the classes are equal.
ResampleResult random_oversample(const Eigen::MatrixXd& x, std::span<const int> labels,
                                 std::uint64_t seed);

// Audit document: G, counts, per-seed-point r, r_hat and generation counts.
void to_json(nlohmann::json& j, const ResampleResult& r);

}  // namespace readmit
