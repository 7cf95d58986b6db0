#include "lca/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lca/error.hpp"
#include "lca/log.hpp"

namespace lca {

using nlohmann::json;

namespace {

constexpr double kMassSlack = 1e-12;

/// Indices sorted by |w| descending, ties by ascending index.
std::vector<std::size_t> by_magnitude(std::span<const double> w) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(w[a]) > std::abs(w[b]); });
  return idx;
}

std::vector<double> row_of(const Matrix& theta, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(theta.cols()));
  for (Eigen::Index c = 0; c < theta.cols(); ++c) out[static_cast<std::size_t>(c)] = theta(r, c);
  return out;
}

}  // namespace

void RankingConfig::validate() const {
  if (!(alpha_step > 0.0 && alpha_step <= 100.0)) fail(ErrorCode::InvalidArgument, "alpha_step must be in (0, 100]");
  if (!(start_p > 0.0 && start_p <= 100.0)) fail(ErrorCode::InvalidArgument, "start_p must be in (0, 100]");
}

std::vector<std::size_t> NeuronRanking::head(std::size_t count) const {
  count = std::min(count, ordering.size());
  return {ordering.begin(), ordering.begin() + static_cast<std::ptrdiff_t>(count)};
}

std::vector<std::size_t> NeuronRanking::tail(std::size_t count) const {
  count = std::min(count, ordering.size());
  return {ordering.end() - static_cast<std::ptrdiff_t>(count), ordering.end()};
}

std::vector<std::size_t> top_neurons_for_tag(std::span<const double> tag_weights, double p) {
  if (!(p > 0.0 && p <= 100.0)) fail(ErrorCode::InvalidArgument, "p must be in (0, 100]");
  double total = 0.0;
  for (double w : tag_weights) total += std::abs(w);
  if (!(total > 0.0)) fail(ErrorCode::ZeroMassTag, "tag has no weight mass");

  const auto order = by_magnitude(tag_weights);
  std::vector<std::size_t> out;
  if (p >= 100.0) {
    for (std::size_t n : order) {
      if (tag_weights[n] != 0.0) out.push_back(n);
    }
    return out;
  }
  const double target = (p / 100.0) * total - kMassSlack * total;
  double cum = 0.0;
  for (std::size_t n : order) {
    out.push_back(n);
    cum += std::abs(tag_weights[n]);
    if (cum >= target) break;
  }
  return out;
}

std::vector<double> sweep_percentages(const RankingConfig& cfg) {
  cfg.validate();
  std::vector<double> ps;
  for (std::size_t k = 0;; ++k) {
    const double p = cfg.start_p + static_cast<double>(k) * cfg.alpha_step;
    if (p >= 100.0 - 1e-9) break;
    ps.push_back(p);
  }
  ps.push_back(100.0);
  return ps;
}

NeuronRanking extract_ordering(const Matrix& theta, const std::vector<std::string>& tag_vocab,
                               const RankingConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(theta.rows()) != tag_vocab.size()) {
    fail(ErrorCode::DimensionMismatch, "theta rows do not match the tag vocabulary");
  }
  const auto f = static_cast<std::size_t>(theta.cols());
  NeuronRanking ranking;
  ranking.tag_vocab = tag_vocab;
  ranking.feature_dim = f;
  ranking.config = cfg;
  ranking.per_tag.resize(tag_vocab.size());

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> live_tags;
  for (Eigen::Index t = 0; t < theta.rows(); ++t) {
    rows.push_back(row_of(theta, t));
    double total = 0.0;
    for (double w : rows.back()) total += std::abs(w);
    if (total > 0.0) {
      live_tags.push_back(static_cast<std::size_t>(t));
      auto& list = ranking.per_tag[static_cast<std::size_t>(t)];
      double cum = 0.0;
      for (std::size_t n : by_magnitude(rows.back())) {
        const double a = std::abs(rows.back()[n]);
        if (a == 0.0) break;
        cum += a;
        list.push_back({n, a, cum / total});
      }
      list.back().cum_mass = 1.0;
    } else {
      warn("tag '" + tag_vocab[static_cast<std::size_t>(t)] + "' has zero weight mass; skipped in ranking");
    }
  }
  if (live_tags.empty()) fail(ErrorCode::AllZeroWeights, "every tag has zero weight mass");

  std::vector<double> max_abs(f, 0.0);
  for (const auto& row : rows) {
    for (std::size_t n = 0; n < f; ++n) max_abs[n] = std::max(max_abs[n], std::abs(row[n]));
  }
  auto by_saliency = [&](std::size_t a, std::size_t b) {
    if (max_abs[a] != max_abs[b]) return max_abs[a] > max_abs[b];
    return a < b;
  };

  std::vector<char> placed(f, 0);
  for (double p : sweep_percentages(cfg)) {
    std::vector<std::size_t> fresh;
    for (std::size_t t : live_tags) {
      for (std::size_t n : top_neurons_for_tag(rows[t], p)) {
        if (!placed[n]) {
          placed[n] = 1;
          fresh.push_back(n);
        }
      }
    }
    std::sort(fresh.begin(), fresh.end(), by_saliency);
    for (std::size_t n : fresh) {
      ranking.ordering.push_back(n);
      ranking.discovered_at.push_back(p);
    }
  }
  for (std::size_t n = 0; n < f; ++n) {
    if (!placed[n]) {
      ranking.ordering.push_back(n);
      ranking.discovered_at.push_back(100.0);
      ranking.zero_weight_neurons.push_back(n);
    }
  }
  return ranking;
}

NeuronRanking extract_ordering(const LinearProbe& probe, const RankingConfig& cfg) {
  return extract_ordering(probe.theta, probe.tag_vocab, cfg);
}

std::size_t percent_to_count(double percent, std::size_t total) {
  if (!(percent > 0.0 && percent <= 100.0)) fail(ErrorCode::InvalidArgument, "percent must be in (0, 100]");
  if (total == 0) return 0;
  const double exact = percent / 100.0 * static_cast<double>(total);
  // half up, with slack so 0.5 computed as 0.49999... still rounds up
  auto count = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
  return std::clamp<std::size_t>(count, 1, total);
}

// ---------------------------------------------------------------------------

json to_json(const ActivationManifest& m) {
  return {{"num_layers", m.num_layers},
          {"hidden_size", m.hidden_size},
          {"model_name", m.model_name},
          {"aggregation", to_string(m.aggregation)},
          {"dtype", m.dtype}};
}

ActivationManifest manifest_from_json(const json& j) {
  ActivationManifest m;
  m.num_layers = j.at("num_layers").get<std::size_t>();
  m.hidden_size = j.at("hidden_size").get<std::size_t>();
  m.model_name = j.value("model_name", std::string{});
  m.aggregation = parse_aggregation(j.value("aggregation", std::string{"last"}));
  m.dtype = j.value("dtype", std::string{"f32"});
  m.validate();
  return m;
}

json to_json(const NeuronRanking& r) {
  json per_tag = json::object();
  for (std::size_t t = 0; t < r.tag_vocab.size(); ++t) {
    json list = json::array();
    for (const auto& s : r.per_tag[t]) {
      list.push_back({{"neuron", s.neuron}, {"abs_weight", s.abs_weight}, {"cum_mass", s.cum_mass}});
    }
    per_tag[r.tag_vocab[t]] = std::move(list);
  }
  json j = {{"ordering", r.ordering},
            {"discovered_at", r.discovered_at},
            {"tag_vocab", r.tag_vocab},
            {"per_tag", std::move(per_tag)},
            {"zero_weight_neurons", r.zero_weight_neurons},
            {"config", {{"alpha_step", r.config.alpha_step}, {"start_p", r.config.start_p}}},
            {"feature_dim", r.feature_dim}};
  j["manifest"] = r.manifest ? to_json(*r.manifest) : json(nullptr);
  return j;
}

NeuronRanking ranking_from_json(const json& j) {
  try {
    NeuronRanking r;
    r.ordering = j.at("ordering").get<std::vector<std::size_t>>();
    r.feature_dim = j.at("feature_dim").get<std::size_t>();
    r.discovered_at = j.value("discovered_at", std::vector<double>(r.ordering.size(), 100.0));
    r.zero_weight_neurons = j.value("zero_weight_neurons", std::vector<std::size_t>{});
    const auto& cfg = j.at("config");
    r.config.alpha_step = cfg.at("alpha_step").get<double>();
    r.config.start_p = cfg.value("start_p", 1.0);
    const auto& per_tag = j.at("per_tag");
    r.tag_vocab = j.contains("tag_vocab") ? j["tag_vocab"].get<std::vector<std::string>>() : std::vector<std::string>{};
    if (r.tag_vocab.empty()) {
      for (auto it = per_tag.begin(); it != per_tag.end(); ++it) r.tag_vocab.push_back(it.key());
    }
    for (const auto& tag : r.tag_vocab) {
      std::vector<NeuronSaliency> list;
      if (per_tag.contains(tag)) {
        for (const auto& e : per_tag[tag]) {
          list.push_back({e.at("neuron").get<std::size_t>(), e.at("abs_weight").get<double>(),
                          e.at("cum_mass").get<double>()});
        }
      }
      r.per_tag.push_back(std::move(list));
    }
    if (j.contains("manifest") && !j["manifest"].is_null()) r.manifest = manifest_from_json(j["manifest"]);

    std::vector<char> seen(r.feature_dim, 0);
    for (std::size_t n : r.ordering) {
      if (n >= r.feature_dim || seen[n]) fail(ErrorCode::MalformedRecord, "ranking ordering is not a valid index list");
      seen[n] = 1;
    }
    if (r.discovered_at.size() != r.ordering.size()) fail(ErrorCode::MalformedRecord, "discovered_at length mismatch");
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, std::string("ranking: ") + e.what());
  }
}

void save_ranking(const NeuronRanking& ranking, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(ranking).dump(1) << '\n';
}

NeuronRanking load_ranking(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingArtifact, "no ranking at " + path.string());
  try {
    return ranking_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
}

}  // namespace lca
