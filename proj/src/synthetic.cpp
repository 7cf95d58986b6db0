#include "lca/synthetic.hpp"

#include <algorithm>

#include "lca/error.hpp"
#include "lca/random.hpp"

namespace lca {

namespace {

PlantedSplit generate_split(const PlantedCorpusConfig& cfg, const ActivationManifest& manifest,
                            const std::vector<std::vector<std::size_t>>& signal_neurons, const Matrix& mixing,
                            const std::vector<std::string>& tags, std::size_t tokens, Rng& rng) {
  const std::size_t d = manifest.neuron_count();
  PlantedSplit split;
  split.activations.manifest = manifest;
  split.labels.mode = LabelMode::Token;
  split.labels.tag_vocab = tags;

  std::vector<double> signal(cfg.num_signals);
  std::size_t remaining = tokens;
  std::int64_t sentence_id = 0;
  while (remaining > 0) {
    const std::size_t len = std::min(cfg.sentence_length, remaining);
    remaining -= len;
    Sentence s;
    s.id = sentence_id++;
    s.activations.resize(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> sent_tags;
    for (std::size_t i = 0; i < len; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      for (std::size_t c = 0; c < d; ++c) s.activations(row, static_cast<Eigen::Index>(c)) = rng.normal();
      for (std::size_t k = 0; k < cfg.num_signals; ++k) {
        signal[k] = rng.normal();
        for (std::size_t n : signal_neurons[k]) {
          s.activations(row, static_cast<Eigen::Index>(n)) = signal[k] + cfg.copy_noise * rng.normal();
        }
      }
      std::size_t best = 0;
      double best_score = 0.0;
      for (std::size_t t = 0; t < cfg.num_tags; ++t) {
        double score = 0.0;
        for (std::size_t k = 0; k < cfg.num_signals; ++k) {
          score += mixing(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) * signal[k];
        }
        if (t == 0 || score > best_score) {
          best = t;
          best_score = score;
        }
      }
      s.tokens.push_back("w" + std::to_string(rng.below(cfg.vocab_size)));
      sent_tags.push_back(best);
    }
    split.labels.tokens.push_back(s.tokens);
    split.labels.tags.push_back(std::move(sent_tags));
    split.activations.sentences.push_back(std::move(s));
  }
  return split;
}

}  // namespace

PlantedCorpus make_planted_corpus(const PlantedCorpusConfig& cfg) {
  PlantedCorpus out;
  out.config = cfg;
  out.manifest.num_layers = cfg.num_layers;
  out.manifest.hidden_size = cfg.hidden_size;
  out.manifest.model_name = "synthetic-planted";
  out.manifest.validate();
  const std::size_t d = out.manifest.neuron_count();
  if (cfg.num_tags < 2) fail(ErrorCode::InvalidArgument, "need at least 2 tags");
  if (cfg.num_signals == 0 || cfg.copies == 0) fail(ErrorCode::InvalidArgument, "need at least one planted neuron");
  if (cfg.num_signals * cfg.copies > d) fail(ErrorCode::InvalidArgument, "more planted neurons than features");
  if (cfg.sentence_length == 0 || cfg.vocab_size == 0) fail(ErrorCode::InvalidArgument, "empty sentences or vocabulary");
  if (cfg.train_tokens == 0 || cfg.dev_tokens == 0 || cfg.test_tokens == 0) {
    fail(ErrorCode::InvalidArgument, "every split needs tokens");
  }

  Rng rng(splitmix64(cfg.seed ^ 0x706c616e746564ULL));
  const auto chosen = sample_without_replacement(d, cfg.num_signals * cfg.copies, rng);
  out.signal_neurons.resize(cfg.num_signals);
  for (std::size_t i = 0; i < chosen.size(); ++i) out.signal_neurons[i % cfg.num_signals].push_back(chosen[i]);
  for (auto& group : out.signal_neurons) std::sort(group.begin(), group.end());
  out.planted = chosen;
  std::sort(out.planted.begin(), out.planted.end());

  Matrix mixing(static_cast<Eigen::Index>(cfg.num_tags), static_cast<Eigen::Index>(cfg.num_signals));
  for (Eigen::Index t = 0; t < mixing.rows(); ++t) {
    for (Eigen::Index k = 0; k < mixing.cols(); ++k) mixing(t, k) = rng.normal();
  }
  std::vector<std::string> tags;
  for (std::size_t t = 0; t < cfg.num_tags; ++t) tags.push_back("T" + std::to_string(t));

  out.train = generate_split(cfg, out.manifest, out.signal_neurons, mixing, tags, cfg.train_tokens, rng);
  out.dev = generate_split(cfg, out.manifest, out.signal_neurons, mixing, tags, cfg.dev_tokens, rng);
  out.test = generate_split(cfg, out.manifest, out.signal_neurons, mixing, tags, cfg.test_tokens, rng);
  return out;
}

CorpusSplits PlantedCorpus::align() const {
  return {align_corpus(train.activations, train.labels), align_corpus(dev.activations, dev.labels),
          align_corpus(test.activations, test.labels)};
}

void save_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& dir) {
  save_manifest(corpus.manifest, dir / "manifest.json");
  const std::pair<const char*, const PlantedSplit*> splits[] = {
      {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
  for (const auto& [name, split] : splits) {
    save_activations(split->activations, dir / (std::string(name) + ".jsonl"));
    save_labels(split->labels, dir / (std::string(name) + ".tsv"));
  }
}

}  // namespace lca
