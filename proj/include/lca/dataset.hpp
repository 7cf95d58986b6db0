#pragma once

// Activation dumps and label files, aligned into flat sample
// matrices that the probe trains on.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lca {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Aggregation { Last, First, Average };

std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& text);

struct NeuronLocation {
  std::size_t layer = 0;
  std::size_t unit = 0;
  /// Pair mode only: true when the index addresses the modifier half.
  bool modifier_side = false;
};

struct ActivationManifest {
  std::size_t num_layers = 0;  // layer 0 is the embedding layer
  std::size_t hidden_size = 0;
  std::string model_name;
  Aggregation aggregation = Aggregation::Last;
  std::string dtype = "f32";

  /// D = num_layers * hidden_size.
  std::size_t neuron_count() const noexcept { return num_layers * hidden_size; }

  /// Maps a feature index to (layer, unit). In pair mode indices in [D, 2D)
  /// fold onto the same grid and are marked modifier-side.
  NeuronLocation locate(std::size_t neuron, bool pair_mode = false) const;

  void validate() const;
};

struct Sentence {
  std::int64_t id = 0;
  std::vector<std::string> tokens;
  Matrix activations;  // tokens x D
};

struct ActivationDataset {
  ActivationManifest manifest;
  std::vector<Sentence> sentences;

  std::size_t token_count() const noexcept;
};

ActivationManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const ActivationManifest& manifest, const std::filesystem::path& path);

/// Reads a JSON-lines activation file. Each line is
/// {"sentence_id": int, "tokens": [...], "activations": [[...], ...]}.
ActivationDataset load_activations(const std::filesystem::path& path,
                                   const std::filesystem::path& manifest_path);
void save_activations(const ActivationDataset& ds, const std::filesystem::path& path);

enum class LabelMode { Token, Pair };

std::string to_string(LabelMode m);
LabelMode parse_label_mode(const std::string& text);

struct PairAnnotation {
  std::size_t head = 0;
  std::size_t modifier = 0;
  std::size_t tag = 0;
};

struct LabelSet {
  LabelMode mode = LabelMode::Token;
  std::vector<std::string> tag_vocab;  // first-occurrence order

  // token mode
  std::vector<std::vector<std::string>> tokens;
  std::vector<std::vector<std::size_t>> tags;

  // pair mode
  std::vector<std::vector<PairAnnotation>> pairs;

  std::size_t sentence_count() const noexcept;
  std::size_t annotation_count() const noexcept;
  std::optional<std::size_t> tag_index(const std::string& tag) const;

  /// Same annotations re-indexed against `vocab`, which must contain every
  /// tag used here.
  LabelSet with_vocab(const std::vector<std::string>& vocab) const;
};

LabelSet load_labels(const std::filesystem::path& path, LabelMode mode);
void save_labels(const LabelSet& labels, const std::filesystem::path& path);

/// Vocabulary of `first` in order, extended by tags first seen in the rest.
std::vector<std::string> merge_tag_vocab(std::span<const LabelSet* const> sets);

struct SampleRef {
  std::size_t sentence = 0;
  /// Token position (token mode) or annotation index within the sentence
  /// (pair mode).
  std::size_t position = 0;
};

struct AlignedCorpus {
  LabelMode mode = LabelMode::Token;
  ActivationManifest manifest;
  std::vector<std::string> tag_vocab;
  Matrix features;  // samples x F, F = D or 2D
  std::vector<std::size_t> labels;
  std::vector<std::string> word_types;
  std::vector<SampleRef> refs;
  std::vector<std::size_t> sentence_offsets;  // first sample of each sentence

  std::size_t sample_count() const noexcept { return labels.size(); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
  std::size_t tag_count() const noexcept { return tag_vocab.size(); }

  /// Inverse of refs: the sample index for a (sentence, position) pair.
  std::optional<std::size_t> sample_index(SampleRef ref) const;

  /// Copy keeping only `columns` (in the given order).
  AlignedCorpus select_columns(std::span<const std::size_t> columns) const;
};

/// Flattens a dataset and its labels into one sample per annotation.
/// Token-string mismatches are reported through lca::warn; count mismatches
/// are errors.
AlignedCorpus align_corpus(const ActivationDataset& ds, const LabelSet& labels);

struct CorpusSplits {
  AlignedCorpus train;
  AlignedCorpus dev;
  AlignedCorpus test;
};

struct SplitPaths {
  std::filesystem::path activations;
  std::filesystem::path labels;
};

/// Loads and aligns train/dev/test against one shared tag vocabulary.
CorpusSplits load_splits(const std::filesystem::path& manifest, const SplitPaths& train,
                         const SplitPaths& dev, const SplitPaths& test, LabelMode mode);

// ---------------------------------------------------------------------------
// Control tasks

struct ControlTaskOptions {
  /// Word types not present in the fitting split get a uniformly sampled tag
  /// instead of one drawn from the empirical distribution.
  bool unseen_uniform = false;
};

/// Maps every word type to one tag drawn from the tag distribution of the
/// split it was fitted on. Each draw depends only on (seed, word type,
/// frequencies).
class ControlTask {
 public:
  static ControlTask fit(const LabelSet& labels, std::uint64_t seed, ControlTaskOptions options = {});
  static ControlTask fit(const AlignedCorpus& corpus, std::uint64_t seed, ControlTaskOptions options = {});

  std::size_t assign(const std::string& word_type) const;

  LabelSet relabel(const LabelSet& labels) const;
  AlignedCorpus relabel(const AlignedCorpus& corpus) const;

  const std::vector<std::string>& tag_vocab() const noexcept { return tag_vocab_; }
  const std::vector<double>& tag_frequencies() const noexcept { return frequencies_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::vector<std::string> tag_vocab_;
  std::vector<double> frequencies_;
  std::vector<std::string> seen_;  // sorted
  std::uint64_t seed_ = 0;
  ControlTaskOptions options_;
};

/// Control version of `labels`: each word type relabeled with C(type).
LabelSet make_control_task(const LabelSet& labels, std::uint64_t seed);

}  // namespace lca
