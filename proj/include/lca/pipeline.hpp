#pragma once

// End-to-end run from the grid search to the report bundle.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "lca/dataset.hpp"
#include "lca/error.hpp"
#include "lca/lambda_search.hpp"
#include "lca/probe.hpp"
#include "lca/ranking.hpp"
#include "lca/report.hpp"
#include "lca/selection.hpp"

namespace lca {

std::string tool_version();

struct PipelineConfig {
  std::uint64_t seed = 0;  // shared by every stochastic step
  TrainConfig train;
  SearchConfig search;
  SelectionConfig selection;
  RankingConfig ranking;
  double ablation_percent = 20.0;
  /// Skips the grid search when set.
  std::optional<RegularizationConfig> fixed_reg;
  ControlTaskOptions control;
  std::optional<std::string> timestamp;
  nlohmann::json config_echo = nlohmann::json::object();
};

struct PipelineRun {
  RunArtifacts artifacts;
  LinearProbe probe;
  NeuronRanking ranking;
  RegularizationConfig reg;
};

PipelineRun run_pipeline(const CorpusSplits& splits, const PipelineConfig& cfg);

/// Report bundle plus probe.json, ranking.json, search.json and
/// selection.json in `out_dir`.
void write_pipeline_outputs(const PipelineRun& run, const std::filesystem::path& out_dir);

void write_json(const nlohmann::json& j, const std::filesystem::path& path, int indent = 2);
nlohmann::json read_json(const std::filesystem::path& path, ErrorCode missing = ErrorCode::MissingArtifact);

}  // namespace lca
