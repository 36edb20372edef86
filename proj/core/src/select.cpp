#include "readmit/select.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "readmit/error.hpp"

namespace readmit {

void RfeConfig::validate(const std::string& path) const {
  if (target_count < 1) throw ConfigError(path + ".target_count", "must be >= 1");
  if (step < 1) throw ConfigError(path + ".step", "must be >= 1");
  if (ranker != "logistic") throw ConfigError(path + ".ranker", "only 'logistic' is supported");
}

std::vector<std::string> SelectionResult::final_features() const {
  std::vector<std::string> out = selected;
  out.insert(out.end(), pinned.begin(), pinned.end());
  return out;
}

FeatureScores rank_features(const DataMatrix& matrix, std::span<const int> labels,
                            const LogisticOptions& options) {
  const auto& x = matrix.require_complete("rank_features");
  const LogisticModel fit = train_logistic(x, labels, options);
  FeatureScores s;
  s.names = matrix.column_names();
  s.scores.resize(s.names.size());
  for (Index j = 0; j < fit.coefficients.size(); ++j) {
    s.scores[static_cast<std::size_t>(j)] = std::abs(fit.coefficients(j));
  }
  s.converged = fit.converged;
  s.gradient_norm = fit.gradient_norm;
  s.iterations = fit.iterations;
  return s;
}

SelectionResult rfe(const DataMatrix& matrix, std::span<const int> labels, const RfeConfig& config) {
  config.validate();
  if (config.target_count > matrix.cols()) {
    throw ConfigError("select.target_count", "exceeds the number of candidate features (" +
                                                 std::to_string(matrix.cols()) + ")");
  }
  matrix.require_complete("rfe");
  std::vector<std::string> surviving = matrix.column_names();
  SelectionResult result;
  int round = 0;
  while (static_cast<int>(surviving.size()) > config.target_count) {
    const DataMatrix sub = matrix.select_columns(surviving);
    const FeatureScores scores = rank_features(sub, labels, config.logistic);
    std::vector<std::size_t> order(surviving.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Lowest score first; among equal scores the later name goes first.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores.scores[a] != scores.scores[b]) return scores.scores[a] < scores.scores[b];
      return a > b;
    });
    const auto remove = std::min<std::size_t>(static_cast<std::size_t>(config.step),
                                              surviving.size() - static_cast<std::size_t>(config.target_count));
    EliminationRound r;
    r.round = ++round;
    r.surviving = surviving;
    r.scores = scores.scores;
    std::vector<bool> drop(surviving.size(), false);
    for (std::size_t k = 0; k < remove; ++k) {
      drop[order[k]] = true;
      r.removed.push_back(surviving[order[k]]);
    }
    std::vector<std::string> next;
    for (std::size_t k = 0; k < surviving.size(); ++k) {
      if (!drop[k]) next.push_back(surviving[k]);
    }
    surviving = std::move(next);
    result.trace.push_back(std::move(r));
  }
  result.selected = std::move(surviving);
  return result;
}

SelectionResult pin_expert_features(SelectionResult result, std::span<const std::string> pins,
                                    std::span<const std::string> schema) {
  for (const auto& pin : pins) {
    if (std::find(schema.begin(), schema.end(), pin) == schema.end()) {
      throw ConfigError("select.pins", "unknown feature '" + pin + "'");
    }
    const auto present = [&](const std::vector<std::string>& v) {
      return std::find(v.begin(), v.end(), pin) != v.end();
    };
    if (!present(result.selected) && !present(result.pinned)) result.pinned.push_back(pin);
  }
  return result;
}

void to_json(nlohmann::json& j, const SelectionResult& r) {
  auto trace = nlohmann::json::array();
  for (const auto& round : r.trace) {
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t k = 0; k < round.surviving.size(); ++k) scores[round.surviving[k]] = round.scores[k];
    trace.push_back({{"round", round.round}, {"removed", round.removed}, {"scores", scores}});
  }
  j = {{"selected", r.selected}, {"pinned", r.pinned}, {"final", r.final_features()}, {"trace", trace}};
}

}  // namespace readmit
