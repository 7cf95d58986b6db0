#pragma once

// Neuron saliency from trained probe weights: per-tag weight-mass prefixes
// and the global ordering obtained by sweeping the mass percentage upward.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/dataset.hpp"
#include "lca/probe.hpp"

namespace lca {

struct RankingConfig {
  double alpha_step = 1.0;  // percentage points added per sweep step
  double start_p = 1.0;

  void validate() const;
};

struct NeuronSaliency {
  std::size_t neuron = 0;
  double abs_weight = 0.0;
  double cum_mass = 0.0;  // fraction of the tag's total |weight| up to and including this neuron
};

struct NeuronRanking {
  std::vector<std::size_t> ordering;  // most salient first; a permutation of [0, F)
  /// Sweep percentage at which each ordering entry was first selected;
  /// parallel to `ordering`. Neurons with no weight in any tag carry 100
  /// and are also listed in `zero_weight_neurons`.
  std::vector<double> discovered_at;
  std::vector<std::string> tag_vocab;
  std::vector<std::vector<NeuronSaliency>> per_tag;  // nonzero weights only, descending
  std::vector<std::size_t> zero_weight_neurons;
  std::size_t feature_dim = 0;
  RankingConfig config;
  std::optional<ActivationManifest> manifest;

  std::vector<std::size_t> head(std::size_t count) const;
  std::vector<std::size_t> tail(std::size_t count) const;
};

/// Smallest prefix of neurons sorted by |weight| descending (ties by index)
/// whose summed |weight| reaches p% of the total. Returned in that order.
/// Comparison allows a relative slack of 1e-12 of the total mass for
/// summation rounding; p >= 100 returns every neuron with nonzero weight.
std::vector<std::size_t> top_neurons_for_tag(std::span<const double> tag_weights, double p);

NeuronRanking extract_ordering(const Matrix& theta, const std::vector<std::string>& tag_vocab,
                               const RankingConfig& cfg);
NeuronRanking extract_ordering(const LinearProbe& probe, const RankingConfig& cfg);

/// Sweep values start_p, start_p + alpha, ... below 100, then 100.
std::vector<double> sweep_percentages(const RankingConfig& cfg);

/// round(percent / 100 * total), half up, at least 1 and at most total.
std::size_t percent_to_count(double percent, std::size_t total);

nlohmann::json to_json(const NeuronRanking& ranking);
NeuronRanking ranking_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActivationManifest& manifest);
ActivationManifest manifest_from_json(const nlohmann::json& j);

void save_ranking(const NeuronRanking& ranking, const std::filesystem::path& path);
NeuronRanking load_ranking(const std::filesystem::path& path);

}  // namespace lca
