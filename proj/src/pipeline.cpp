#include "lca/pipeline.hpp"

#include <fstream>
#include <numeric>

#include "lca/analysis.hpp"
#include "lca/error.hpp"

namespace lca {

using nlohmann::json;

std::string tool_version() {
#ifdef LCA_VERSION
  return LCA_VERSION;
#else
  return "0.0.0";
#endif
}

PipelineRun run_pipeline(const CorpusSplits& splits, const PipelineConfig& cfg) {
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;
  SelectionConfig sel_cfg = cfg.selection;
  sel_cfg.seed = cfg.seed;

  PipelineRun run;
  RunArtifacts& art = run.artifacts;
  art.tool_version = tool_version();
  art.seed = cfg.seed;
  art.config = cfg.config_echo;
  art.manifest = splits.train.manifest;
  art.pair_mode = splits.train.mode == LabelMode::Pair;
  art.generated_at = cfg.timestamp;

  if (cfg.fixed_reg) {
    run.reg = *cfg.fixed_reg;
  } else {
    SearchConfig search = cfg.search;
    search.ranking = cfg.ranking;
    art.search = grid_search(splits, search, train_cfg);
    run.reg = art.search->best;
  }

  run.probe = train_probe(splits.train, run.reg, train_cfg);
  art.probe = run.probe;
  art.probe_test_accuracy = 100.0 * evaluate_accuracy(run.probe, splits.test);

  run.ranking = extract_ordering(run.probe, cfg.ranking);
  run.ranking.manifest = splits.train.manifest;
  art.ranking = run.ranking;

  art.minimal = minimal_selection(splits, run.ranking, run.reg, train_cfg, sel_cfg);
  const auto& minimal = *art.minimal;

  if (!art.pair_mode) {
    const ControlTask control = ControlTask::fit(splits.train, cfg.seed, cfg.control);
    std::vector<std::size_t> all(splits.train.feature_dim());
    std::iota(all.begin(), all.end(), std::size_t{0});
    art.selectivity_all = selectivity_experiment(splits, control, all, run.reg, train_cfg);
    art.selectivity_top = selectivity_experiment(splits, control, minimal.neurons, run.reg, train_cfg);
  }

  art.layers = layer_histogram(minimal.neurons, splits.train.manifest, art.pair_mode);
  art.spread = property_spread(run.probe, mass_percent_for_prefix(run.ranking, minimal.neurons.size()));

  const std::size_t f = run.probe.feature_dim();
  art.ablation.push_back({"All", f, 100.0, 100.0 * evaluate_accuracy(run.probe, splits.test)});
  const std::pair<const char*, Strategy> strategies[] = {
      {"Top", Strategy::Top}, {"Random", Strategy::Random}, {"Bottom", Strategy::Bottom}};
  for (const auto& [name, strategy] : strategies) {
    const double acc = mask_evaluate(run.probe, splits.test, run.ranking, strategy, cfg.ablation_percent, cfg.seed);
    art.ablation.push_back({name, percent_to_count(cfg.ablation_percent, f), cfg.ablation_percent, 100.0 * acc});
  }
  for (const auto& [name, strategy] : strategies) {
    art.retrained_subsets.push_back(subset_experiment(splits, run.ranking, strategy, minimal.percent, run.reg,
                                                      train_cfg, cfg.seed, minimal.oracle_accuracy));
  }
  return run;
}

void write_json(const json& j, const std::filesystem::path& path, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(indent) << '\n';
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

json read_json(const std::filesystem::path& path, ErrorCode missing) {
  std::ifstream in(path);
  if (!in) fail(missing, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
}

void write_pipeline_outputs(const PipelineRun& run, const std::filesystem::path& out_dir) {
  emit_report(run.artifacts, out_dir);
  save_probe(run.probe, out_dir / "probe.json");
  save_ranking(run.ranking, out_dir / "ranking.json");
  if (run.artifacts.search) write_json(to_json(*run.artifacts.search), out_dir / "search.json");
  if (run.artifacts.minimal) write_json(to_json(*run.artifacts.minimal), out_dir / "selection.json");
}

}  // namespace lca
