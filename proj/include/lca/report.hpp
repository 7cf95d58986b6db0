#pragma once

// Static outputs: per-neuron activation heatmaps as standalone HTML and the
// run bundle (run.json, tables.txt, CSVs).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/analysis.hpp"
#include "lca/dataset.hpp"
#include "lca/lambda_search.hpp"
#include "lca/probe.hpp"
#include "lca/ranking.hpp"
#include "lca/selection.hpp"

namespace lca {

inline constexpr int kRunSchemaVersion = 1;

enum class Hue { White, Red, Blue };

struct SpanColor {
  Hue hue = Hue::White;
  double opacity = 0.0;  // in [0, 1]
};

/// Negative values are red, positive blue, zero white; opacity is
/// |value| / max_abs (white everywhere when max_abs is 0).
SpanColor span_color(double value, double max_abs);

std::string css_color(const SpanColor& c);

struct HeatmapRow {
  std::int64_t sentence_id = 0;
  std::vector<std::string> tokens;
  std::vector<double> values;
};

struct HeatmapSpec {
  std::size_t neuron = 0;
  NeuronLocation location;
  std::vector<HeatmapRow> rows;
  double max_abs = 0.0;  // over every rendered value
  std::string caption;
};

HeatmapSpec build_heatmap(const ActivationDataset& ds, std::size_t neuron, std::span<const std::int64_t> sentence_ids,
                          std::string caption = {});

std::string render_heatmap_html(const HeatmapSpec& spec);

/// Writes the rendered heatmap to `out` and returns the HTML.
std::string render_heatmap(const ActivationDataset& ds, std::size_t neuron, std::span<const std::int64_t> sentence_ids,
                           const std::filesystem::path& out, std::string caption = {});

/// neuron_<layer>_<unit>.html
std::string heatmap_file_name(const ActivationManifest& manifest, std::size_t neuron);

std::string html_escape(std::string_view text);

struct AblationRow {
  std::string name;  // All, Top, Random, Bottom
  std::size_t neuron_count = 0;
  double percent = 0.0;
  double accuracy = 0.0;  // percent
};

struct RunArtifacts {
  std::string tool_version;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  ActivationManifest manifest;
  bool pair_mode = false;
  std::optional<std::string> generated_at;  // defaults to the current UTC time

  std::optional<LinearProbe> probe;
  std::optional<double> probe_test_accuracy;  // percent
  std::optional<NeuronRanking> ranking;
  std::optional<SearchResult> search;
  std::optional<SelectionResult> minimal;
  std::vector<AblationRow> ablation;            // mask-only
  std::vector<SelectionResult> retrained_subsets;  // top/random/bottom after retraining
  std::optional<SelectivityReport> selectivity_all;
  std::optional<SelectivityReport> selectivity_top;
  std::optional<LayerHistogram> layers;
  std::optional<PropertySpread> spread;
};

nlohmann::json build_run_json(const RunArtifacts& run);
std::string build_tables(const RunArtifacts& run);

/// Writes run.json, tables.txt and one CSV per available analysis. Returns
/// the written file names.
std::vector<std::string> emit_report(const RunArtifacts& run, const std::filesystem::path& out_dir);

std::string format_percent(double value);

}  // namespace lca
