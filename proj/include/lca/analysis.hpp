#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/dataset.hpp"
#include "lca/probe.hpp"
#include "lca/ranking.hpp"
#include "lca/selection.hpp"

namespace lca {

struct LayerHistogram {
  std::vector<std::size_t> counts;  // per layer, 0 = embedding layer
  std::size_t total = 0;
  bool pair_mode = false;
  // Pair mode split of `counts` by which half of the feature vector a neuron came from.
  std::vector<std::size_t> head_counts;
  std::vector<std::size_t> modifier_counts;
};

LayerHistogram layer_histogram(std::span<const std::size_t> neurons, const ActivationManifest& manifest,
                               bool pair_mode = false);

std::string render_bar_chart(const LayerHistogram& hist, std::size_t width = 40);
std::string to_csv(const LayerHistogram& hist);

struct PropertySpread {
  double accept_p = 0.0;
  std::vector<std::string> tags;
  /// Neurons needed to cover accept_p of each tag's weight mass. A neuron
  /// can count toward several tags.
  std::vector<std::size_t> counts;
  std::vector<std::string> skipped_tags;  // zero weight mass
};

PropertySpread property_spread(const Matrix& theta, const std::vector<std::string>& tag_vocab, double accept_p);
PropertySpread property_spread(const LinearProbe& probe, double accept_p);

/// Sweep percentage at which the first `prefix` neurons of the ordering had
/// all been discovered, i.e. the mass level that admits a top selection of
/// that size.
double mass_percent_for_prefix(const NeuronRanking& ranking, std::size_t prefix);

struct SelectivityReport {
  double task_accuracy = 0.0;
  double control_accuracy = 0.0;
  double selectivity = 0.0;
};

SelectivityReport compute_selectivity(double task_accuracy, double control_accuracy);

/// Retrains on `neurons` for the real task and for the control task and
/// reports both test accuracies (percent) and their difference.
SelectivityReport selectivity_experiment(const CorpusSplits& splits, const ControlTask& control,
                                         std::span<const std::size_t> neurons, const RegularizationConfig& reg,
                                         const TrainConfig& train_cfg);

enum class TopWordsMode { Abs, Positive, Negative };

std::string to_string(TopWordsMode m);
TopWordsMode parse_top_words_mode(const std::string& text);

struct WordActivation {
  std::string word;
  double score = 0.0;  // mean activation over occurrences
  std::size_t occurrences = 0;
  int sign = 0;
};

struct TopWords {
  std::size_t neuron = 0;
  TopWordsMode mode = TopWordsMode::Abs;
  std::vector<WordActivation> words;
  /// Set when the mode asks for one sign but no returned word has it.
  bool degenerate = false;
};

TopWords top_words_for_neuron(const ActivationDataset& ds, std::size_t neuron, std::size_t k,
                              TopWordsMode mode = TopWordsMode::Abs, std::size_t min_occurrences = 2);

struct RankingComparison {
  LayerHistogram base_layers;
  LayerHistogram other_layers;
  std::vector<long long> layer_delta;  // other - base
  std::size_t top_n = 0;
  double top_n_jaccard = 0.0;
  double selection_jaccard = 0.0;
};

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// `top_n` defaults to the base selection size.
RankingComparison compare_rankings(const NeuronRanking& base, std::span<const std::size_t> base_selection,
                                   const NeuronRanking& other, std::span<const std::size_t> other_selection,
                                   const ActivationManifest& manifest, bool pair_mode = false,
                                   std::optional<std::size_t> top_n = std::nullopt);

nlohmann::json to_json(const LayerHistogram& h);
nlohmann::json to_json(const PropertySpread& s);
nlohmann::json to_json(const SelectivityReport& s);
nlohmann::json to_json(const TopWords& t);
nlohmann::json to_json(const RankingComparison& c);

}  // namespace lca
