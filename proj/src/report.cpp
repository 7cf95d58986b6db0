#include "lca/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lca/error.hpp"

namespace lca {

using nlohmann::json;
namespace fs = std::filesystem;

SpanColor span_color(double value, double max_abs) {
  SpanColor c;
  if (value == 0.0 || !(max_abs > 0.0)) return c;
  c.hue = value < 0.0 ? Hue::Red : Hue::Blue;
  c.opacity = std::min(1.0, std::abs(value) / max_abs);
  return c;
}

std::string css_color(const SpanColor& c) {
  if (c.hue == Hue::White) return "#ffffff";
  char buf[64];
  std::snprintf(buf, sizeof buf, "rgba(%s,%.4f)", c.hue == Hue::Red ? "220,38,38" : "37,99,235", c.opacity);
  return buf;
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += ch;
    }
  }
  return out;
}

HeatmapSpec build_heatmap(const ActivationDataset& ds, std::size_t neuron, std::span<const std::int64_t> sentence_ids,
                          std::string caption) {
  if (sentence_ids.empty()) fail(ErrorCode::EmptySelection, "no sentences selected for the heatmap");
  HeatmapSpec spec;
  spec.neuron = neuron;
  spec.location = ds.manifest.locate(neuron);
  spec.caption = std::move(caption);
  for (std::int64_t id : sentence_ids) {
    auto it = std::find_if(ds.sentences.begin(), ds.sentences.end(), [id](const Sentence& s) { return s.id == id; });
    if (it == ds.sentences.end()) fail(ErrorCode::IndexOutOfRange, "no sentence with id " + std::to_string(id));
    HeatmapRow row;
    row.sentence_id = id;
    row.tokens = it->tokens;
    for (Eigen::Index r = 0; r < it->activations.rows(); ++r) {
      const double v = it->activations(r, static_cast<Eigen::Index>(neuron));
      row.values.push_back(v);
      spec.max_abs = std::max(spec.max_abs, std::abs(v));
    }
    spec.rows.push_back(std::move(row));
  }
  return spec;
}

std::string render_heatmap_html(const HeatmapSpec& spec) {
  std::ostringstream out;
  const std::string title =
      "Neuron " + std::to_string(spec.location.layer) + ":" + std::to_string(spec.location.unit);
  out << "<!DOCTYPE html>\n"
      << "<html lang=\"en\">\n"
      << "<head>\n"
      << "<meta charset=\"utf-8\">\n"
      << "<title>" << html_escape(title) << "</title>\n"
      << "<style>\n"
      << "body { font-family: monospace; margin: 2em; }\n"
      << ".sentence { margin: 0.4em 0; line-height: 2em; }\n"
      << ".token { padding: 0.15em 0.25em; margin-right: 0.2em; border: 1px solid #dddddd; }\n"
      << ".caption { color: #555555; }\n"
      << "</style>\n"
      << "</head>\n"
      << "<body>\n"
      << "<h1>" << html_escape(title) << " (index " << spec.neuron << ")</h1>\n";
  if (!spec.caption.empty()) out << "<p class=\"caption\">" << html_escape(spec.caption) << "</p>\n";
  out << "<p class=\"caption\">red = negative, blue = positive, opacity = |value| / "
      << html_escape(json(spec.max_abs).dump()) << "</p>\n";
  for (const auto& row : spec.rows) {
    out << "<div class=\"sentence\" data-sentence-id=\"" << row.sentence_id << "\">";
    for (std::size_t i = 0; i < row.tokens.size(); ++i) {
      const SpanColor c = span_color(row.values[i], spec.max_abs);
      out << "<span class=\"token\" title=\"" << html_escape(json(row.values[i]).dump())
          << "\" style=\"background-color: " << css_color(c) << "\">" << html_escape(row.tokens[i]) << "</span>";
    }
    out << "</div>\n";
  }
  out << "</body>\n</html>\n";
  return out.str();
}

std::string heatmap_file_name(const ActivationManifest& manifest, std::size_t neuron) {
  const NeuronLocation loc = manifest.locate(neuron);
  return "neuron_" + std::to_string(loc.layer) + "_" + std::to_string(loc.unit) + ".html";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string format_real(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string format_percent(double value) { return format_real(value, "%.2f"); }

std::string render_heatmap(const ActivationDataset& ds, std::size_t neuron, std::span<const std::int64_t> sentence_ids,
                           const fs::path& out, std::string caption) {
  std::string html = render_heatmap_html(build_heatmap(ds, neuron, sentence_ids, std::move(caption)));
  write_text(out, html);
  return html;
}

json build_run_json(const RunArtifacts& run) {
  json j;
  j["schema_version"] = kRunSchemaVersion;
  j["tool"] = {{"name", "neuron-lca"}, {"version", run.tool_version}};
  j["generated_at"] = run.generated_at.value_or(utc_now());
  j["seed"] = run.seed;
  j["config"] = run.config;
  j["manifest"] = to_json(run.manifest);
  j["mode"] = run.pair_mode ? "pair" : "token";

  if (run.probe) {
    j["probe"] = {{"tag_vocab", run.probe->tag_vocab},
                  {"feature_dim", run.probe->feature_dim()},
                  {"reg", to_json(run.probe->reg)},
                  {"train_config", to_json(run.probe->train_config)},
                  {"test_accuracy", run.probe_test_accuracy ? json(*run.probe_test_accuracy) : json(nullptr)}};
  }
  if (run.ranking) j["ranking"] = to_json(*run.ranking);
  if (run.search) j["search"] = to_json(*run.search);
  if (run.minimal) j["selection"] = to_json(*run.minimal);
  if (!run.ablation.empty()) {
    json rows = json::array();
    for (const auto& r : run.ablation) {
      rows.push_back({{"name", r.name}, {"neuron_count", r.neuron_count}, {"percent", r.percent}, {"accuracy", r.accuracy}});
    }
    j["ablation"] = std::move(rows);
  }
  if (!run.retrained_subsets.empty()) {
    json rows = json::array();
    for (const auto& r : run.retrained_subsets) rows.push_back(to_json(r));
    j["retrained_subsets"] = std::move(rows);
  }
  if (run.selectivity_all || run.selectivity_top) {
    j["selectivity"] = {{"all", run.selectivity_all ? to_json(*run.selectivity_all) : json(nullptr)},
                        {"top", run.selectivity_top ? to_json(*run.selectivity_top) : json(nullptr)}};
  }
  if (run.layers) j["layers"] = to_json(*run.layers);
  if (run.spread) j["spread"] = to_json(*run.spread);
  return j;
}

std::string build_tables(const RunArtifacts& run) {
  std::ostringstream out;
  out << "neuron-lca " << run.tool_version << "  seed " << run.seed << "  model "
      << (run.manifest.model_name.empty() ? "-" : run.manifest.model_name) << "  D = " << run.manifest.num_layers
      << " x " << run.manifest.hidden_size << " = " << run.manifest.neuron_count() << "\n\n";

  if (run.probe) {
    out << "Probe: " << run.probe->tag_count() << " tags, " << run.probe->feature_dim() << " features, lambda1 = "
        << format_real(run.probe->reg.lambda1, "%g") << ", lambda2 = " << format_real(run.probe->reg.lambda2, "%g");
    if (run.probe_test_accuracy) out << ", test accuracy " << format_percent(*run.probe_test_accuracy);
    out << "\n\n";
  }

  if (!run.ablation.empty()) {
    out << "Ablation (mask-only, non-selected neurons zeroed)\n";
    out << pad_right("", 8) << pad_left("neurons", 9) << pad_left("percent", 9) << pad_left("accuracy", 10) << '\n';
    for (const auto& r : run.ablation) {
      out << pad_right(r.name, 8) << pad_left(std::to_string(r.neuron_count), 9)
          << pad_left(format_real(r.percent, "%.1f"), 9) << pad_left(format_percent(r.accuracy), 10) << '\n';
    }
    out << '\n';
  }

  if (run.minimal) {
    const auto& m = *run.minimal;
    out << "Minimal neuron selection (retrained, delta = " << format_real(m.delta, "%.2f") << ")\n";
    out << pad_right("Neu_t", 16) << pad_left("Acc_a", 8) << pad_left("Acc_t", 8);
    if (run.selectivity_all && run.selectivity_top) out << pad_left("Sel_a", 8) << pad_left("Sel_t", 8);
    out << '\n';
    const std::string neu = std::to_string(m.neurons.size()) + " (" + format_real(m.percent, "%.1f") + "%)";
    out << pad_right(neu, 16) << pad_left(format_percent(m.oracle_accuracy), 8) << pad_left(format_percent(m.accuracy), 8);
    if (run.selectivity_all && run.selectivity_top) {
      out << pad_left(format_percent(run.selectivity_all->selectivity), 8)
          << pad_left(format_percent(run.selectivity_top->selectivity), 8);
    }
    out << '\n';
    if (!m.threshold_reached) out << "(threshold not reached; best subset shown)\n";
    out << '\n';
  }

  if (!run.retrained_subsets.empty()) {
    out << "Retrained subsets (equal size)\n";
    out << pad_right("", 8) << pad_left("neurons", 9) << pad_left("Acc", 8) << pad_left("Acc_a", 8) << '\n';
    for (const auto& r : run.retrained_subsets) {
      std::string name = to_string(r.strategy);
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      out << pad_right(name, 8) << pad_left(std::to_string(r.neurons.size()), 9)
          << pad_left(format_percent(r.accuracy), 8) << pad_left(format_percent(r.oracle_accuracy), 8) << '\n';
    }
    out << '\n';
  }

  if (run.search) {
    out << "Lambda grid search (dev, sorted by score)\n";
    out << pad_left("lambda1", 9) << pad_left("lambda2", 9) << pad_left("A_t", 8) << pad_left("A_b", 8)
        << pad_left("A_l", 8) << pad_left("A_z", 8) << pad_left("score", 9) << '\n';
    std::vector<std::size_t> idx(run.search->cells.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return run.search->cells[a].score > run.search->cells[b].score; });
    for (std::size_t i : idx) {
      const auto& c = run.search->cells[i];
      out << pad_left(format_real(c.reg.lambda1, "%g"), 9) << pad_left(format_real(c.reg.lambda2, "%g"), 9)
          << pad_left(format_percent(c.inputs.acc_top), 8) << pad_left(format_percent(c.inputs.acc_bottom), 8)
          << pad_left(format_percent(c.inputs.acc_lambda), 8) << pad_left(format_percent(c.inputs.acc_noreg), 8)
          << pad_left(format_real(c.score, "%.3f"), 9) << (i == run.search->best_index ? "  *" : "") << '\n';
    }
    out << '\n';
  }

  if (run.layers) {
    out << "Selected neurons per layer (0 = embeddings)\n" << render_bar_chart(*run.layers) << '\n';
  }

  if (run.spread) {
    out << "Neurons per property at " << format_real(run.spread->accept_p, "%.1f") << "% weight mass\n";
    for (std::size_t i = 0; i < run.spread->tags.size(); ++i) {
      out << pad_right(run.spread->tags[i], 12) << pad_left(std::to_string(run.spread->counts[i]), 6) << '\n';
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> emit_report(const RunArtifacts& run, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(out_dir / name, text);
    written.push_back(name);
  };
  emit("run.json", build_run_json(run).dump(2) + "\n");
  emit("tables.txt", build_tables(run));

  if (run.ranking) {
    std::ostringstream csv;
    csv << "rank,neuron,layer,unit,side,discovered_at\n";
    for (std::size_t i = 0; i < run.ranking->ordering.size(); ++i) {
      const std::size_t n = run.ranking->ordering[i];
      const NeuronLocation loc = run.manifest.locate(n, run.pair_mode);
      csv << i << ',' << n << ',' << loc.layer << ',' << loc.unit << ',' << (loc.modifier_side ? "modifier" : "head")
          << ',' << json(run.ranking->discovered_at[i]).dump() << '\n';
    }
    emit("ranking.csv", csv.str());
  }
  if (run.layers) emit("layers.csv", to_csv(*run.layers));
  if (run.search) {
    std::ostringstream csv;
    csv << "lambda1,lambda2,acc_top,acc_bottom,acc_lambda,acc_noreg,score\n";
    for (const auto& c : run.search->cells) {
      csv << json(c.reg.lambda1).dump() << ',' << json(c.reg.lambda2).dump() << ',' << json(c.inputs.acc_top).dump()
          << ',' << json(c.inputs.acc_bottom).dump() << ',' << json(c.inputs.acc_lambda).dump() << ','
          << json(c.inputs.acc_noreg).dump() << ',' << json(c.score).dump() << '\n';
    }
    emit("search.csv", csv.str());
  }
  if (run.spread) {
    std::ostringstream csv;
    csv << "tag,count\n";
    for (std::size_t i = 0; i < run.spread->tags.size(); ++i) csv << run.spread->tags[i] << ',' << run.spread->counts[i] << '\n';
    emit("spread.csv", csv.str());
  }
  if (!run.ablation.empty()) {
    std::ostringstream csv;
    csv << "name,neuron_count,percent,accuracy\n";
    for (const auto& r : run.ablation) {
      csv << r.name << ',' << r.neuron_count << ',' << json(r.percent).dump() << ',' << json(r.accuracy).dump() << '\n';
    }
    emit("ablation.csv", csv.str());
  }
  return written;
}

}  // namespace lca
