#pragma once

// Linear probing classifier: softmax regression over activation features
// with an elastic-net (L1 + L2) penalty, trained by seeded minibatch Adam.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/dataset.hpp"

namespace lca {

struct RegularizationConfig {
  double lambda1 = 0.0;  // L1
  double lambda2 = 0.0;  // L2

  void validate() const;
  friend bool operator==(const RegularizationConfig&, const RegularizationConfig&) = default;
};

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool use_bias = true;
  /// Per-neuron z-scoring fitted on the training corpus. Masks apply to the
  /// standardized inputs.
  bool standardize = false;
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Set of kept feature indices; every other feature is read as 0.0.
class FeatureMask {
 public:
  FeatureMask() = default;
  static FeatureMask keep(std::size_t feature_dim, std::span<const std::size_t> indices);
  static FeatureMask all(std::size_t feature_dim);
  static FeatureMask none(std::size_t feature_dim);

  std::size_t feature_dim() const noexcept { return keep_.size(); }
  bool contains(std::size_t i) const { return keep_[i] != 0; }
  std::size_t size() const noexcept;

 private:
  std::vector<char> keep_;
};

struct LinearProbe {
  std::vector<std::string> tag_vocab;
  Matrix theta;  // |T| x F, row t holds the weights of tag t
  Vector bias;   // |T|, all zero when use_bias is false
  bool use_bias = true;
  // Empty unless trained with standardize=true.
  Vector feature_mean;
  Vector feature_scale;
  RegularizationConfig reg;
  TrainConfig train_config;

  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(theta.cols()); }
  std::size_t tag_count() const noexcept { return static_cast<std::size_t>(theta.rows()); }
  bool standardized() const noexcept { return feature_mean.size() > 0; }

  /// Zero probe for the given shape.
  static LinearProbe zeros(std::vector<std::string> tags, std::size_t feature_dim, bool use_bias = true);
};

struct Prediction {
  std::size_t tag = 0;
  Vector probabilities;
};

/// argmax of softmax(theta * z + b), ties to the lowest tag index.
Prediction predict_tag(const LinearProbe& probe, std::span<const double> features,
                       const FeatureMask* mask = nullptr);

struct LossGradient {
  double loss = 0.0;
  Matrix grad_theta;
  Vector grad_bias;
};

/// Mean cross-entropy over the batch plus lambda1*sum|theta| +
/// lambda2*sum(theta^2). The bias is never penalized and sign(0) = 0.
LossGradient loss_and_gradient(const LinearProbe& probe, const Eigen::Ref<const Matrix>& features,
                               std::span<const std::size_t> labels, const RegularizationConfig& reg);

LinearProbe train_probe(const AlignedCorpus& corpus, const RegularizationConfig& reg,
                        const TrainConfig& cfg);

/// Fraction of samples in [0, 1] predicted correctly.
double evaluate_accuracy(const LinearProbe& probe, const AlignedCorpus& corpus,
                         const FeatureMask* mask = nullptr);

/// Per-sample predicted tags.
std::vector<std::size_t> predict_corpus(const LinearProbe& probe, const AlignedCorpus& corpus,
                                        const FeatureMask* mask = nullptr);

nlohmann::json to_json(const RegularizationConfig& reg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const LinearProbe& probe);
RegularizationConfig regularization_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
LinearProbe probe_from_json(const nlohmann::json& j);

void save_probe(const LinearProbe& probe, const std::filesystem::path& path);
LinearProbe load_probe(const std::filesystem::path& path);

}  // namespace lca
