#pragma once

// Neuron subsets chosen from a ranking, and probes retrained on them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/dataset.hpp"
#include "lca/probe.hpp"
#include "lca/ranking.hpp"

namespace lca {

enum class Strategy { MinimalTop, Top, Random, Bottom };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

struct SelectionConfig {
  double delta = 1.0;         // accuracy points below the oracle still accepted
  double step_percent = 1.0;  // percent of neurons added per iteration
  double max_percent = 100.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SelectionIteration {
  double percent = 0.0;
  std::size_t neuron_count = 0;
  double accuracy = 0.0;
};

struct SelectionResult {
  Strategy strategy = Strategy::Top;
  std::vector<std::size_t> neurons;  // ascending
  double percent = 0.0;
  double accuracy = 0.0;         // percent, test split
  double oracle_accuracy = 0.0;  // percent, test split
  double delta = 0.0;
  bool threshold_reached = true;
  std::vector<SelectionIteration> iterations;
  LinearProbe probe;  // trained on `neurons` only (feature_dim == neurons.size())
};

struct RetrainResult {
  LinearProbe probe;
  double accuracy = 0.0;  // fraction, test split
};

/// Trains a fresh probe on the columns in `neurons` (sorted, others dropped)
/// and reports its test accuracy.
RetrainResult retrain_subset(const CorpusSplits& splits, std::span<const std::size_t> neurons,
                             const RegularizationConfig& reg, const TrainConfig& train_cfg);

/// Neurons chosen by a strategy at a percentage of the ordering. Random
/// samples uniformly without replacement with the given seed; its size
/// matches the top set.
std::vector<std::size_t> select_neurons(const NeuronRanking& ranking, Strategy strategy, double percent,
                                        std::uint64_t seed);

SelectionResult minimal_selection(const CorpusSplits& splits, const NeuronRanking& ranking,
                                  const RegularizationConfig& reg, const TrainConfig& train_cfg,
                                  const SelectionConfig& cfg);

SelectionResult subset_experiment(const CorpusSplits& splits, const NeuronRanking& ranking, Strategy strategy,
                                  double percent, const RegularizationConfig& reg, const TrainConfig& train_cfg,
                                  std::uint64_t seed, std::optional<double> oracle_accuracy = std::nullopt);

/// Mask-only ablation: evaluates `probe` with everything outside the
/// strategy's neurons zeroed. Returns a fraction.
double mask_evaluate(const LinearProbe& probe, const AlignedCorpus& corpus, const NeuronRanking& ranking,
                     Strategy strategy, double percent, std::uint64_t seed = 0);

nlohmann::json to_json(const SelectionResult& result);
SelectionResult selection_from_json(const nlohmann::json& j);

}  // namespace lca
