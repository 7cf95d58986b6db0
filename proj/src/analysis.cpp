#include "lca/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lca/error.hpp"
#include "lca/log.hpp"

namespace lca {

using nlohmann::json;

LayerHistogram layer_histogram(std::span<const std::size_t> neurons, const ActivationManifest& manifest,
                               bool pair_mode) {
  LayerHistogram h;
  h.pair_mode = pair_mode;
  h.counts.assign(manifest.num_layers, 0);
  if (pair_mode) {
    h.head_counts.assign(manifest.num_layers, 0);
    h.modifier_counts.assign(manifest.num_layers, 0);
  }
  for (std::size_t n : neurons) {
    const NeuronLocation loc = manifest.locate(n, pair_mode);
    ++h.counts[loc.layer];
    if (pair_mode) ++(loc.modifier_side ? h.modifier_counts : h.head_counts)[loc.layer];
    ++h.total;
  }
  return h;
}

std::string render_bar_chart(const LayerHistogram& hist, std::size_t width) {
  const std::size_t peak = hist.counts.empty() ? 0 : *std::max_element(hist.counts.begin(), hist.counts.end());
  std::ostringstream out;
  for (std::size_t l = 0; l < hist.counts.size(); ++l) {
    const std::size_t c = hist.counts[l];
    const std::size_t bar = peak == 0 ? 0 : (c * width + peak - 1) / peak;
    out << "layer " << (l < 10 ? " " : "") << l << " | " << std::string(bar, '#')
        << std::string(width - bar, ' ') << " " << c << '\n';
  }
  return out.str();
}

std::string to_csv(const LayerHistogram& hist) {
  std::ostringstream out;
  out << "layer,count\n";
  for (std::size_t l = 0; l < hist.counts.size(); ++l) out << l << ',' << hist.counts[l] << '\n';
  return out.str();
}

PropertySpread property_spread(const Matrix& theta, const std::vector<std::string>& tag_vocab, double accept_p) {
  PropertySpread s;
  s.accept_p = accept_p;
  for (Eigen::Index t = 0; t < theta.rows(); ++t) {
    std::vector<double> row(static_cast<std::size_t>(theta.cols()));
    for (Eigen::Index c = 0; c < theta.cols(); ++c) row[static_cast<std::size_t>(c)] = theta(t, c);
    const auto& tag = tag_vocab.at(static_cast<std::size_t>(t));
    try {
      const auto top = top_neurons_for_tag(row, accept_p);
      s.tags.push_back(tag);
      s.counts.push_back(top.size());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroMassTag) throw;
      warn("tag '" + tag + "' has zero weight mass; left out of the spread");
      s.skipped_tags.push_back(tag);
    }
  }
  return s;
}

PropertySpread property_spread(const LinearProbe& probe, double accept_p) {
  return property_spread(probe.theta, probe.tag_vocab, accept_p);
}

double mass_percent_for_prefix(const NeuronRanking& ranking, std::size_t prefix) {
  if (prefix == 0 || prefix > ranking.ordering.size()) {
    fail(ErrorCode::InvalidArgument, "prefix length outside the ordering");
  }
  return *std::max_element(ranking.discovered_at.begin(),
                           ranking.discovered_at.begin() + static_cast<std::ptrdiff_t>(prefix));
}

SelectivityReport compute_selectivity(double task_accuracy, double control_accuracy) {
  for (double a : {task_accuracy, control_accuracy}) {
    if (!(a >= 0.0 && a <= 100.0)) fail(ErrorCode::InvalidArgument, "accuracies must be in [0, 100]");
  }
  return {task_accuracy, control_accuracy, task_accuracy - control_accuracy};
}

SelectivityReport selectivity_experiment(const CorpusSplits& splits, const ControlTask& control,
                                         std::span<const std::size_t> neurons, const RegularizationConfig& reg,
                                         const TrainConfig& train_cfg) {
  const CorpusSplits control_splits{control.relabel(splits.train), control.relabel(splits.dev),
                                    control.relabel(splits.test)};
  const double task = 100.0 * retrain_subset(splits, neurons, reg, train_cfg).accuracy;
  const double ctrl = 100.0 * retrain_subset(control_splits, neurons, reg, train_cfg).accuracy;
  return compute_selectivity(task, ctrl);
}

std::string to_string(TopWordsMode m) {
  switch (m) {
    case TopWordsMode::Abs: return "abs";
    case TopWordsMode::Positive: return "positive";
    case TopWordsMode::Negative: return "negative";
  }
  return "abs";
}

TopWordsMode parse_top_words_mode(const std::string& text) {
  if (text == "abs") return TopWordsMode::Abs;
  if (text == "positive") return TopWordsMode::Positive;
  if (text == "negative") return TopWordsMode::Negative;
  fail(ErrorCode::InvalidArgument, "unknown mode '" + text + "' (expected abs, positive or negative)");
}

TopWords top_words_for_neuron(const ActivationDataset& ds, std::size_t neuron, std::size_t k, TopWordsMode mode,
                              std::size_t min_occurrences) {
  const std::size_t d = ds.manifest.neuron_count();
  if (neuron >= d) {
    fail(ErrorCode::IndexOutOfRange, "neuron " + std::to_string(neuron) + " outside [0, " + std::to_string(d) + ")");
  }
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be >= 1");

  std::unordered_map<std::string, std::vector<double>> values;
  for (const auto& s : ds.sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      values[s.tokens[i]].push_back(s.activations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(neuron)));
    }
  }

  std::vector<WordActivation> words;
  for (auto& [word, vals] : values) {
    if (vals.size() < min_occurrences) continue;
    std::sort(vals.begin(), vals.end());
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    words.push_back({word, mean, vals.size(), mean > 0.0 ? 1 : (mean < 0.0 ? -1 : 0)});
  }
  auto key = [mode](const WordActivation& w) {
    switch (mode) {
      case TopWordsMode::Abs: return std::abs(w.score);
      case TopWordsMode::Positive: return w.score;
      case TopWordsMode::Negative: return -w.score;
    }
    return w.score;
  };
  std::sort(words.begin(), words.end(), [&](const WordActivation& a, const WordActivation& b) {
    const double ka = key(a);
    const double kb = key(b);
    if (ka != kb) return ka > kb;
    return a.word < b.word;
  });
  if (words.size() > k) words.resize(k);

  TopWords out;
  out.neuron = neuron;
  out.mode = mode;
  out.words = std::move(words);
  if (mode != TopWordsMode::Abs && !out.words.empty()) {
    const int wanted = mode == TopWordsMode::Positive ? 1 : -1;
    out.degenerate = std::none_of(out.words.begin(), out.words.end(),
                                  [wanted](const WordActivation& w) { return w.sign == wanted; });
  }
  return out;
}

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  const std::set<std::size_t> sa(a.begin(), a.end());
  const std::set<std::size_t> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (std::size_t x : sa) inter += sb.count(x);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

RankingComparison compare_rankings(const NeuronRanking& base, std::span<const std::size_t> base_selection,
                                   const NeuronRanking& other, std::span<const std::size_t> other_selection,
                                   const ActivationManifest& manifest, bool pair_mode,
                                   std::optional<std::size_t> top_n) {
  if (base.feature_dim != other.feature_dim) {
    fail(ErrorCode::DimensionMismatch, "rankings cover different feature widths");
  }
  const std::size_t expected = manifest.neuron_count() * (pair_mode ? 2 : 1);
  if (base.feature_dim != expected) {
    fail(ErrorCode::DimensionMismatch, "rankings do not match the manifest dimensions");
  }
  RankingComparison c;
  c.base_layers = layer_histogram(base_selection, manifest, pair_mode);
  c.other_layers = layer_histogram(other_selection, manifest, pair_mode);
  for (std::size_t l = 0; l < manifest.num_layers; ++l) {
    c.layer_delta.push_back(static_cast<long long>(c.other_layers.counts[l]) -
                            static_cast<long long>(c.base_layers.counts[l]));
  }
  c.top_n = std::min(top_n.value_or(base_selection.size()), base.ordering.size());
  const auto a = base.head(c.top_n);
  const auto b = other.head(c.top_n);
  c.top_n_jaccard = jaccard(a, b);
  c.selection_jaccard = jaccard(base_selection, other_selection);
  return c;
}

// ---------------------------------------------------------------------------

json to_json(const LayerHistogram& h) {
  json j = {{"counts", h.counts}, {"total", h.total}, {"pair_mode", h.pair_mode}};
  std::vector<std::size_t> labels(h.counts.size());
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  j["labels"] = labels;
  if (h.pair_mode) {
    j["head_counts"] = h.head_counts;
    j["modifier_counts"] = h.modifier_counts;
  }
  return j;
}

json to_json(const PropertySpread& s) {
  json per_tag = json::object();
  for (std::size_t i = 0; i < s.tags.size(); ++i) per_tag[s.tags[i]] = s.counts[i];
  return {{"accept_p", s.accept_p},
          {"per_tag_counts", std::move(per_tag)},
          {"skipped_tags", s.skipped_tags},
          {"counting", "per-tag; a neuron shared by several tags counts once for each"}};
}

json to_json(const SelectivityReport& s) {
  return {{"task_accuracy", s.task_accuracy},
          {"control_accuracy", s.control_accuracy},
          {"selectivity", s.selectivity}};
}

json to_json(const TopWords& t) {
  json words = json::array();
  for (const auto& w : t.words) {
    words.push_back({{"word", w.word}, {"score", w.score}, {"occurrences", w.occurrences}, {"sign", w.sign}});
  }
  return {{"neuron", t.neuron}, {"mode", to_string(t.mode)}, {"degenerate", t.degenerate}, {"words", std::move(words)}};
}

json to_json(const RankingComparison& c) {
  return {{"base_layers", to_json(c.base_layers)},
          {"other_layers", to_json(c.other_layers)},
          {"layer_delta", c.layer_delta},
          {"top_n", c.top_n},
          {"top_n_jaccard", c.top_n_jaccard},
          {"selection_jaccard", c.selection_jaccard}};
}

}  // namespace lca
