#pragma once

// Grid search over elastic-net coefficients, scored by how far apart the
// masked accuracies of the top and bottom ranked neurons are, minus the
// accuracy the regularization costs.

#include <filesystem>
#include <vector>

#include "json.hpp"
#include "lca/dataset.hpp"
#include "lca/probe.hpp"
#include "lca/ranking.hpp"

namespace lca {

struct SearchConfig {
  std::vector<RegularizationConfig> grid = default_grid();
  double mass_fraction_m = 20.0;  // percent of neurons kept for the top/bottom masks
  double weight_alpha = 0.5;
  double weight_beta = 0.5;
  RankingConfig ranking;
  std::size_t jobs = 1;

  void validate() const;

  /// Cartesian product of {0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1} with itself,
  /// lambda1-major.
  static std::vector<RegularizationConfig> default_grid();
};

/// Accuracies in percent.
struct ScoreInputs {
  double acc_top = 0.0;     // top M% kept, rest zeroed
  double acc_bottom = 0.0;  // bottom M% kept
  double acc_noreg = 0.0;   // unregularized probe, all neurons
  double acc_lambda = 0.0;  // this cell's probe, all neurons

  void validate() const;
};

/// alpha * (acc_top - acc_bottom) - beta * (acc_noreg - acc_lambda).
double score_lambdas(const ScoreInputs& s, double alpha, double beta);

struct SearchCell {
  RegularizationConfig reg;
  ScoreInputs inputs;
  double score = 0.0;
  std::size_t grid_index = 0;
};

struct SearchResult {
  RegularizationConfig best;
  std::size_t best_index = 0;
  double acc_noreg = 0.0;
  std::vector<SearchCell> cells;  // grid order
};

/// Index of the winning cell: highest score, then larger lambda1+lambda2,
/// then larger lambda1, then earlier grid position.
std::size_t select_best_cell(const std::vector<SearchCell>& cells);

SearchResult grid_search(const CorpusSplits& splits, const SearchConfig& cfg, const TrainConfig& train_cfg);

nlohmann::json to_json(const SearchCell& cell);
nlohmann::json to_json(const SearchResult& result);
SearchResult search_result_from_json(const nlohmann::json& j);

}  // namespace lca
