#pragma once

// Seeded synthetic corpora with known salient neurons. Every neuron is unit
// Gaussian noise except the planted ones, which carry latent signals; the
// tag of a token is the argmax of a fixed random linear map of the signals.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lca/dataset.hpp"

namespace lca {

struct PlantedCorpusConfig {
  std::size_t num_layers = 4;
  std::size_t hidden_size = 50;
  std::size_t num_tags = 5;
  std::size_t num_signals = 10;
  /// Neurons carrying each signal. Copies get independent noise of
  /// standard deviation copy_noise on top of the shared signal.
  std::size_t copies = 1;
  double copy_noise = 0.0;
  std::size_t train_tokens = 10000;
  std::size_t dev_tokens = 1000;
  std::size_t test_tokens = 1000;
  std::size_t sentence_length = 20;
  std::size_t vocab_size = 500;
  std::uint64_t seed = 1;
};

struct PlantedSplit {
  ActivationDataset activations;
  LabelSet labels;
};

struct PlantedCorpus {
  PlantedCorpusConfig config;
  ActivationManifest manifest;
  PlantedSplit train;
  PlantedSplit dev;
  PlantedSplit test;
  std::vector<std::vector<std::size_t>> signal_neurons;  // per signal, its copies
  std::vector<std::size_t> planted;                      // all planted neurons, ascending

  CorpusSplits align() const;
};

PlantedCorpus make_planted_corpus(const PlantedCorpusConfig& cfg);

/// Writes manifest.json plus {train,dev,test}.jsonl / .tsv into `dir`.
void save_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir);

}  // namespace lca
