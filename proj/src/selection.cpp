#include "lca/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lca/error.hpp"
#include "lca/log.hpp"
#include "lca/random.hpp"

namespace lca {

using nlohmann::json;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::MinimalTop: return "minimal_top";
    case Strategy::Top: return "top";
    case Strategy::Random: return "random";
    case Strategy::Bottom: return "bottom";
  }
  return "top";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "minimal_top") return Strategy::MinimalTop;
  if (text == "top") return Strategy::Top;
  if (text == "random") return Strategy::Random;
  if (text == "bottom") return Strategy::Bottom;
  fail(ErrorCode::InvalidArgument, "unknown strategy '" + text + "' (expected top, random or bottom)");
}

void SelectionConfig::validate() const {
  if (!(delta >= 0.0)) fail(ErrorCode::InvalidArgument, "delta must be >= 0");
  if (!(step_percent > 0.0 && step_percent <= 100.0)) fail(ErrorCode::InvalidArgument, "step_percent must be in (0, 100]");
  if (!(max_percent > 0.0 && max_percent <= 100.0)) fail(ErrorCode::InvalidArgument, "max_percent must be in (0, 100]");
}

RetrainResult retrain_subset(const CorpusSplits& splits, std::span<const std::size_t> neurons,
                             const RegularizationConfig& reg, const TrainConfig& train_cfg) {
  if (neurons.empty()) fail(ErrorCode::EmptySubset, "cannot retrain on an empty neuron set");
  std::vector<std::size_t> cols(neurons.begin(), neurons.end());
  std::sort(cols.begin(), cols.end());
  if (std::adjacent_find(cols.begin(), cols.end()) != cols.end()) {
    fail(ErrorCode::InvalidArgument, "neuron set contains duplicates");
  }
  const std::size_t f = splits.train.feature_dim();
  if (cols.back() >= f) {
    fail(ErrorCode::IndexOutOfRange, "neuron " + std::to_string(cols.back()) + " outside [0, " + std::to_string(f) + ")");
  }
  RetrainResult out;
  if (cols.size() == f) {
    out.probe = train_probe(splits.train, reg, train_cfg);
    out.accuracy = evaluate_accuracy(out.probe, splits.test);
  } else {
    out.probe = train_probe(splits.train.select_columns(cols), reg, train_cfg);
    out.accuracy = evaluate_accuracy(out.probe, splits.test.select_columns(cols));
  }
  return out;
}

std::vector<std::size_t> select_neurons(const NeuronRanking& ranking, Strategy strategy, double percent,
                                        std::uint64_t seed) {
  const std::size_t f = ranking.ordering.size();
  const std::size_t k = percent_to_count(percent, f);
  std::vector<std::size_t> out;
  switch (strategy) {
    case Strategy::MinimalTop:
    case Strategy::Top: out = ranking.head(k); break;
    case Strategy::Bottom: out = ranking.tail(k); break;
    case Strategy::Random: {
      Rng rng(seed);
      out = sample_without_replacement(f, k, rng);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr double kAccuracySlack = 1e-9;

SelectionResult make_result(Strategy strategy, std::vector<std::size_t> neurons, double percent,
                            RetrainResult trained, double oracle_pct, double delta) {
  SelectionResult r;
  r.strategy = strategy;
  r.neurons = std::move(neurons);
  r.percent = percent;
  r.accuracy = 100.0 * trained.accuracy;
  r.oracle_accuracy = oracle_pct;
  r.delta = delta;
  r.probe = std::move(trained.probe);
  return r;
}

}  // namespace

SelectionResult minimal_selection(const CorpusSplits& splits, const NeuronRanking& ranking,
                                  const RegularizationConfig& reg, const TrainConfig& train_cfg,
                                  const SelectionConfig& cfg) {
  cfg.validate();
  const std::size_t f = splits.train.feature_dim();
  if (ranking.ordering.size() != f) {
    fail(ErrorCode::DimensionMismatch, "ranking covers " + std::to_string(ranking.ordering.size()) +
                                           " neurons, corpus has " + std::to_string(f));
  }
  std::vector<std::size_t> all(f);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double oracle_pct = 100.0 * retrain_subset(splits, all, reg, train_cfg).accuracy;
  const double threshold = oracle_pct - cfg.delta - kAccuracySlack;

  std::vector<SelectionIteration> log;
  std::optional<SelectionResult> best;
  std::size_t last_count = 0;
  for (std::size_t k = 1;; ++k) {
    double percent = static_cast<double>(k) * cfg.step_percent;
    const bool final_step = percent >= cfg.max_percent - 1e-9;
    if (final_step) percent = cfg.max_percent;
    const std::size_t count = percent_to_count(percent, f);
    if (count != last_count) {
      last_count = count;
      auto neurons = select_neurons(ranking, Strategy::Top, percent, cfg.seed);
      RetrainResult trained = retrain_subset(splits, neurons, reg, train_cfg);
      const double acc = 100.0 * trained.accuracy;
      log.push_back({percent, count, acc});
      if (acc >= threshold) {
        SelectionResult r = make_result(Strategy::MinimalTop, std::move(neurons), percent, std::move(trained),
                                        oracle_pct, cfg.delta);
        r.iterations = std::move(log);
        return r;
      }
      if (!best || acc > best->accuracy) {
        best = make_result(Strategy::MinimalTop, std::move(neurons), percent, std::move(trained), oracle_pct,
                           cfg.delta);
      }
    }
    if (final_step) break;
  }
  warn("minimal selection did not reach oracle - delta by " + std::to_string(cfg.max_percent) +
       "% of neurons; returning the best subset tried");
  best->threshold_reached = false;
  best->iterations = std::move(log);
  return std::move(*best);
}

SelectionResult subset_experiment(const CorpusSplits& splits, const NeuronRanking& ranking, Strategy strategy,
                                  double percent, const RegularizationConfig& reg, const TrainConfig& train_cfg,
                                  std::uint64_t seed, std::optional<double> oracle_accuracy) {
  const std::size_t f = splits.train.feature_dim();
  if (ranking.ordering.size() != f) fail(ErrorCode::DimensionMismatch, "ranking does not match corpus width");
  if (!oracle_accuracy) {
    std::vector<std::size_t> all(f);
    std::iota(all.begin(), all.end(), std::size_t{0});
    oracle_accuracy = 100.0 * retrain_subset(splits, all, reg, train_cfg).accuracy;
  }
  auto neurons = select_neurons(ranking, strategy, percent, seed);
  RetrainResult trained = retrain_subset(splits, neurons, reg, train_cfg);
  SelectionResult r = make_result(strategy, std::move(neurons), percent, std::move(trained), *oracle_accuracy, 0.0);
  r.iterations.push_back({percent, r.neurons.size(), r.accuracy});
  return r;
}

double mask_evaluate(const LinearProbe& probe, const AlignedCorpus& corpus, const NeuronRanking& ranking,
                     Strategy strategy, double percent, std::uint64_t seed) {
  if (ranking.ordering.size() != probe.feature_dim()) {
    fail(ErrorCode::DimensionMismatch, "ranking does not match probe width");
  }
  const auto neurons = select_neurons(ranking, strategy, percent, seed);
  const auto mask = FeatureMask::keep(probe.feature_dim(), neurons);
  return evaluate_accuracy(probe, corpus, &mask);
}

json to_json(const SelectionResult& r) {
  json iterations = json::array();
  for (const auto& it : r.iterations) {
    iterations.push_back({{"percent", it.percent}, {"neuron_count", it.neuron_count}, {"accuracy", it.accuracy}});
  }
  return {{"strategy", to_string(r.strategy)},
          {"percent", r.percent},
          {"neuron_count", r.neurons.size()},
          {"neurons", r.neurons},
          {"accuracy", r.accuracy},
          {"oracle_accuracy", r.oracle_accuracy},
          {"delta", r.delta},
          {"threshold_reached", r.threshold_reached},
          {"iterations", std::move(iterations)}};
}

SelectionResult selection_from_json(const json& j) {
  try {
    SelectionResult r;
    r.strategy = parse_strategy(j.at("strategy").get<std::string>());
    r.percent = j.at("percent").get<double>();
    r.neurons = j.at("neurons").get<std::vector<std::size_t>>();
    r.accuracy = j.at("accuracy").get<double>();
    r.oracle_accuracy = j.at("oracle_accuracy").get<double>();
    r.delta = j.value("delta", 0.0);
    r.threshold_reached = j.value("threshold_reached", true);
    for (const auto& it : j.value("iterations", json::array())) {
      r.iterations.push_back({it.at("percent").get<double>(), it.value("neuron_count", std::size_t{0}),
                              it.at("accuracy").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, std::string("selection: ") + e.what());
  }
}

}  // namespace lca
