#include "lca/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "lca/analysis.hpp"
#include "lca/error.hpp"
#include "lca/pipeline.hpp"
#include "lca/synthetic.hpp"

namespace lca {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string data_dir;
  std::string manifest;
  std::string train_activations, train_labels;
  std::string dev_activations, dev_labels;
  std::string test_activations, test_labels;
  std::string mode = "token";
  std::uint64_t seed = 0;
  std::string out = "lca_out";

  std::optional<double> lambda1, lambda2;
  std::size_t epochs = 10;
  std::size_t batch_size = 512;
  double learning_rate = 1e-3;
  bool standardize = false;
  bool no_bias = false;

  double delta = 1.0;
  double step = 1.0;
  double mass_fraction = 20.0;
  double alpha_step = 1.0;
  std::size_t jobs = 1;
  bool unseen_uniform = false;

  std::string probe, ranking, selection;
  std::string timestamp;
};

struct StageArgs {
  std::string strategy;
  double percent = 20.0;
  bool retrain = false;

  std::optional<double> spread_percent;
  std::optional<double> layers_percent;

  std::size_t neuron = 0;
  std::size_t k = 10;
  std::string words_mode = "abs";
  std::string activations;
  std::vector<std::int64_t> sentences;

  std::string base, other;

  PlantedCorpusConfig synth;
};

fs::path or_default(const std::string& value, const fs::path& fallback) {
  return value.empty() ? fallback : fs::path(value);
}

fs::path probe_path(const Options& o) { return or_default(o.probe, fs::path(o.out) / "probe.json"); }
fs::path ranking_path(const Options& o) { return or_default(o.ranking, fs::path(o.out) / "ranking.json"); }
fs::path selection_path(const Options& o) { return or_default(o.selection, fs::path(o.out) / "selection.json"); }

fs::path require_input(const std::string& explicit_path, const std::string& data_dir, const char* file_name,
                       const char* flag) {
  fs::path p;
  if (!explicit_path.empty()) {
    p = explicit_path;
  } else if (!data_dir.empty()) {
    p = fs::path(data_dir) / file_name;
  } else {
    fail(ErrorCode::InvalidArgument, std::string("missing ") + flag + " (or --data)");
  }
  if (!fs::exists(p)) fail(ErrorCode::InvalidArgument, "input file not found: " + p.string());
  return p;
}

fs::path manifest_path(const Options& o) { return require_input(o.manifest, o.data_dir, "manifest.json", "--manifest"); }

CorpusSplits load_corpus(const Options& o) {
  const LabelMode mode = parse_label_mode(o.mode);
  const SplitPaths train{require_input(o.train_activations, o.data_dir, "train.jsonl", "--train-activations"),
                         require_input(o.train_labels, o.data_dir, "train.tsv", "--train-labels")};
  const SplitPaths dev{require_input(o.dev_activations, o.data_dir, "dev.jsonl", "--dev-activations"),
                       require_input(o.dev_labels, o.data_dir, "dev.tsv", "--dev-labels")};
  const SplitPaths test{require_input(o.test_activations, o.data_dir, "test.jsonl", "--test-activations"),
                        require_input(o.test_labels, o.data_dir, "test.tsv", "--test-labels")};
  return load_splits(manifest_path(o), train, dev, test, mode);
}

TrainConfig train_config(const Options& o) {
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.learning_rate;
  cfg.standardize = o.standardize;
  cfg.use_bias = !o.no_bias;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

RankingConfig ranking_config(const Options& o) {
  RankingConfig cfg;
  cfg.alpha_step = o.alpha_step;
  cfg.validate();
  return cfg;
}

SearchConfig search_config(const Options& o) {
  SearchConfig cfg;
  cfg.mass_fraction_m = o.mass_fraction;
  cfg.ranking = ranking_config(o);
  cfg.jobs = o.jobs;
  cfg.validate();
  return cfg;
}

SelectionConfig selection_config(const Options& o) {
  SelectionConfig cfg;
  cfg.delta = o.delta;
  cfg.step_percent = o.step;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

std::optional<RegularizationConfig> flag_reg(const Options& o) {
  if (!o.lambda1 && !o.lambda2) return std::nullopt;
  RegularizationConfig reg{o.lambda1.value_or(0.0), o.lambda2.value_or(0.0)};
  reg.validate();
  return reg;
}

RegularizationConfig reg_for_retraining(const Options& o, const LinearProbe& probe) {
  return flag_reg(o).value_or(probe.reg);
}

json config_echo(const Options& o) {
  return {{"mode", o.mode},
          {"seed", o.seed},
          {"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"learning_rate", o.learning_rate},
          {"standardize", o.standardize},
          {"use_bias", !o.no_bias},
          {"delta", o.delta},
          {"step_percent", o.step},
          {"mass_fraction_m", o.mass_fraction},
          {"alpha_step", o.alpha_step},
          {"unseen_uniform", o.unseen_uniform},
          {"lambda1", o.lambda1 ? json(*o.lambda1) : json(nullptr)},
          {"lambda2", o.lambda2 ? json(*o.lambda2) : json(nullptr)}};
}

RunArtifacts base_artifacts(const Options& o, const ActivationManifest& manifest, bool pair_mode) {
  RunArtifacts art;
  art.tool_version = tool_version();
  art.seed = o.seed;
  art.config = config_echo(o);
  art.manifest = manifest;
  art.pair_mode = pair_mode;
  return art;
}

std::vector<std::size_t> load_selection_neurons(const fs::path& path) {
  return selection_from_json(read_json(path)).neurons;
}

int cmd_train(const Options& o, std::ostream& out) {
  const CorpusSplits splits = load_corpus(o);
  const RegularizationConfig reg = flag_reg(o).value_or(RegularizationConfig{});
  const LinearProbe probe = train_probe(splits.train, reg, train_config(o));
  save_probe(probe, probe_path(o));
  RunArtifacts art = base_artifacts(o, splits.train.manifest, splits.train.mode == LabelMode::Pair);
  art.probe = probe;
  art.probe_test_accuracy = 100.0 * evaluate_accuracy(probe, splits.test);
  out << build_tables(art);
  out << "probe written to " << probe_path(o).string() << '\n';
  return 0;
}

int cmd_grid_search(const Options& o, std::ostream& out) {
  const CorpusSplits splits = load_corpus(o);
  RunArtifacts art = base_artifacts(o, splits.train.manifest, splits.train.mode == LabelMode::Pair);
  art.search = grid_search(splits, search_config(o), train_config(o));
  const fs::path path = fs::path(o.out) / "search.json";
  write_json(to_json(*art.search), path);
  out << build_tables(art);
  out << "search report written to " << path.string() << '\n';
  return 0;
}

int cmd_rank(const Options& o, std::ostream& out) {
  const LinearProbe probe = load_probe(probe_path(o));
  NeuronRanking ranking = extract_ordering(probe, ranking_config(o));
  if (!o.manifest.empty() || !o.data_dir.empty()) ranking.manifest = load_manifest(manifest_path(o));
  save_ranking(ranking, ranking_path(o));
  const std::size_t shown = std::min<std::size_t>(ranking.ordering.size(), 20);
  out << "ordering of " << ranking.ordering.size() << " neurons (" << ranking.zero_weight_neurons.size()
      << " with zero weight); first " << shown << ":\n";
  for (std::size_t i = 0; i < shown; ++i) {
    out << "  " << i << '\t' << ranking.ordering[i] << "\tp=" << json(ranking.discovered_at[i]).dump() << '\n';
  }
  out << "ranking written to " << ranking_path(o).string() << '\n';
  return 0;
}

int cmd_select_minimal(const Options& o, std::ostream& out) {
  const CorpusSplits splits = load_corpus(o);
  const LinearProbe probe = load_probe(probe_path(o));
  const NeuronRanking ranking = load_ranking(ranking_path(o));
  RunArtifacts art = base_artifacts(o, splits.train.manifest, splits.train.mode == LabelMode::Pair);
  art.minimal = minimal_selection(splits, ranking, reg_for_retraining(o, probe), train_config(o), selection_config(o));
  write_json(to_json(*art.minimal), selection_path(o));
  out << build_tables(art);
  out << "selection written to " << selection_path(o).string() << '\n';
  return 0;
}

int cmd_ablate(const Options& o, const StageArgs& a, std::ostream& out) {
  const Strategy strategy = parse_strategy(a.strategy);
  if (strategy == Strategy::MinimalTop) fail(ErrorCode::InvalidArgument, "ablate takes top, random or bottom");
  const CorpusSplits splits = load_corpus(o);
  const LinearProbe probe = load_probe(probe_path(o));
  const NeuronRanking ranking = load_ranking(ranking_path(o));
  RunArtifacts art = base_artifacts(o, splits.train.manifest, splits.train.mode == LabelMode::Pair);
  const double all = 100.0 * evaluate_accuracy(probe, splits.test);
  json result;
  if (a.retrain) {
    SelectionResult r = subset_experiment(splits, ranking, strategy, a.percent, reg_for_retraining(o, probe),
                                          train_config(o), o.seed, all);
    result = to_json(r);
    result["protocol"] = "retrain";
    art.retrained_subsets.push_back(std::move(r));
  } else {
    const std::size_t count = percent_to_count(a.percent, probe.feature_dim());
    const double acc = 100.0 * mask_evaluate(probe, splits.test, ranking, strategy, a.percent, o.seed);
    art.ablation.push_back({"All", probe.feature_dim(), 100.0, all});
    std::string name = to_string(strategy);
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    art.ablation.push_back({name, count, a.percent, acc});
    result = {{"protocol", "mask"},     {"strategy", to_string(strategy)}, {"percent", a.percent},
              {"neuron_count", count}, {"accuracy", acc},                 {"all_accuracy", all}};
  }
  const fs::path path = fs::path(o.out) / ("ablate_" + to_string(strategy) + ".json");
  write_json(result, path);
  out << build_tables(art);
  return 0;
}

int cmd_selectivity(const Options& o, std::ostream& out) {
  const CorpusSplits splits = load_corpus(o);
  if (splits.train.mode == LabelMode::Pair) fail(ErrorCode::PairModeUnsupported, "selectivity needs token labels");
  const LinearProbe probe = load_probe(probe_path(o));
  const RegularizationConfig reg = reg_for_retraining(o, probe);
  const ControlTask control = ControlTask::fit(splits.train, o.seed, ControlTaskOptions{o.unseen_uniform});
  std::vector<std::size_t> all(splits.train.feature_dim());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const SelectivityReport sel_all = selectivity_experiment(splits, control, all, reg, train_config(o));
  json result = {{"all", to_json(sel_all)}};
  out << "all neurons: accuracy " << format_percent(sel_all.task_accuracy) << ", control "
      << format_percent(sel_all.control_accuracy) << ", selectivity " << format_percent(sel_all.selectivity) << '\n';
  const fs::path sel_path = selection_path(o);
  if (fs::exists(sel_path)) {
    const auto neurons = load_selection_neurons(sel_path);
    const SelectivityReport sel_top = selectivity_experiment(splits, control, neurons, reg, train_config(o));
    result["top"] = to_json(sel_top);
    out << "selected (" << neurons.size() << "): accuracy " << format_percent(sel_top.task_accuracy) << ", control "
        << format_percent(sel_top.control_accuracy) << ", selectivity " << format_percent(sel_top.selectivity) << '\n';
  }
  write_json(result, fs::path(o.out) / "selectivity.json");
  return 0;
}

int cmd_layers(const Options& o, const StageArgs& a, std::ostream& out) {
  const bool pair_mode = parse_label_mode(o.mode) == LabelMode::Pair;
  const NeuronRanking ranking = load_ranking(ranking_path(o));
  const ActivationManifest manifest = ranking.manifest ? *ranking.manifest : load_manifest(manifest_path(o));
  std::vector<std::size_t> neurons;
  if (a.layers_percent) {
    neurons = select_neurons(ranking, Strategy::Top, *a.layers_percent, o.seed);
  } else {
    neurons = load_selection_neurons(selection_path(o));
  }
  const LayerHistogram hist = layer_histogram(neurons, manifest, pair_mode);
  write_json(to_json(hist), fs::path(o.out) / "layers.json");
  out << render_bar_chart(hist);
  return 0;
}

int cmd_spread(const Options& o, const StageArgs& a, std::ostream& out) {
  const LinearProbe probe = load_probe(probe_path(o));
  double accept_p = 0.0;
  if (a.spread_percent) {
    accept_p = *a.spread_percent;
  } else {
    const NeuronRanking ranking = load_ranking(ranking_path(o));
    accept_p = mass_percent_for_prefix(ranking, load_selection_neurons(selection_path(o)).size());
  }
  RunArtifacts art;
  art.tool_version = tool_version();
  art.seed = o.seed;
  art.spread = property_spread(probe, accept_p);
  write_json(to_json(*art.spread), fs::path(o.out) / "spread.json");
  out << "Neurons per property at " << json(accept_p).dump() << "% weight mass\n";
  for (std::size_t i = 0; i < art.spread->tags.size(); ++i) {
    out << art.spread->tags[i] << '\t' << art.spread->counts[i] << '\n';
  }
  for (const auto& t : art.spread->skipped_tags) out << t << "\t(skipped, zero weight)\n";
  return 0;
}

ActivationDataset load_dataset(const Options& o, const StageArgs& a) {
  const fs::path acts = require_input(a.activations.empty() ? o.train_activations : a.activations, o.data_dir,
                                      "train.jsonl", "--activations");
  return load_activations(acts, manifest_path(o));
}

int cmd_top_words(const Options& o, const StageArgs& a, std::ostream& out) {
  const ActivationDataset ds = load_dataset(o, a);
  const TopWords tw = top_words_for_neuron(ds, a.neuron, a.k, parse_top_words_mode(a.words_mode));
  const NeuronLocation loc = ds.manifest.locate(a.neuron);
  out << "neuron " << a.neuron << " (layer " << loc.layer << ", unit " << loc.unit << "), mode " << to_string(tw.mode)
      << '\n';
  for (const auto& w : tw.words) {
    out << "  " << w.word << '\t' << json(w.score).dump() << '\t' << w.occurrences << '\n';
  }
  if (tw.degenerate) out << "(no word with the requested sign)\n";
  write_json(to_json(tw), fs::path(o.out) / ("top_words_" + std::to_string(a.neuron) + ".json"));
  return 0;
}

int cmd_visualize(const Options& o, const StageArgs& a, std::ostream& out) {
  const ActivationDataset ds = load_dataset(o, a);
  if (a.sentences.empty()) fail(ErrorCode::EmptySelection, "no sentence ids given");
  const fs::path path = fs::path(o.out) / heatmap_file_name(ds.manifest, a.neuron);
  fs::create_directories(path.parent_path());
  render_heatmap(ds, a.neuron, a.sentences, path);
  out << "heatmap written to " << path.string() << '\n';
  return 0;
}

int cmd_compare(const Options& o, const StageArgs& a, std::ostream& out) {
  const fs::path base(a.base), other(a.other);
  const NeuronRanking rb = load_ranking(base / "ranking.json");
  const NeuronRanking ro = load_ranking(other / "ranking.json");
  const auto sb = load_selection_neurons(base / "selection.json");
  const auto so = load_selection_neurons(other / "selection.json");
  if (!rb.manifest) fail(ErrorCode::MissingArtifact, "ranking in " + base.string() + " has no manifest");
  const bool pair_mode = parse_label_mode(o.mode) == LabelMode::Pair;
  const RankingComparison cmp = compare_rankings(rb, sb, ro, so, *rb.manifest, pair_mode);
  write_json(to_json(cmp), fs::path(o.out) / "compare.json");
  out << "top-" << cmp.top_n << " jaccard " << format_percent(100.0 * cmp.top_n_jaccard) << "%, selection jaccard "
      << format_percent(100.0 * cmp.selection_jaccard) << "%\n";
  out << "layer\tbase\tother\tdelta\n";
  for (std::size_t l = 0; l < cmp.layer_delta.size(); ++l) {
    out << l << '\t' << cmp.base_layers.counts[l] << '\t' << cmp.other_layers.counts[l] << '\t' << cmp.layer_delta[l]
        << '\n';
  }
  return 0;
}

int cmd_pipeline(const Options& o, std::ostream& out) {
  const CorpusSplits splits = load_corpus(o);
  PipelineConfig cfg;
  cfg.seed = o.seed;
  cfg.train = train_config(o);
  cfg.search = search_config(o);
  cfg.selection = selection_config(o);
  cfg.ranking = ranking_config(o);
  cfg.fixed_reg = flag_reg(o);
  cfg.control.unseen_uniform = o.unseen_uniform;
  if (!o.timestamp.empty()) cfg.timestamp = o.timestamp;
  cfg.config_echo = config_echo(o);
  const PipelineRun run = run_pipeline(splits, cfg);
  write_pipeline_outputs(run, o.out);
  out << build_tables(run.artifacts);
  out << "report written to " << o.out << '\n';
  return 0;
}

int cmd_synth(const Options& o, const StageArgs& a, std::ostream& out) {
  PlantedCorpusConfig cfg = a.synth;
  cfg.seed = o.seed;
  const PlantedCorpus corpus = make_planted_corpus(cfg);
  save_planted_corpus(corpus, o.out);
  json planted = {{"planted", corpus.planted}, {"signal_neurons", corpus.signal_neurons}};
  write_json(planted, fs::path(o.out) / "planted.json");
  out << "planted corpus (D = " << corpus.manifest.neuron_count() << ", " << corpus.planted.size()
      << " planted neurons) written to " << o.out << '\n';
  return 0;
}

void add_common_options(CLI::App& app, Options& o) {
  app.set_config("--config", "", "Flat key=value file; keys are long option names, flags win");

  auto* data = "Data";
  app.add_option("--data", o.data_dir, "Directory with manifest.json and {train,dev,test}.{jsonl,tsv}")->group(data);
  app.add_option("--manifest", o.manifest, "Activation manifest")->group(data);
  app.add_option("--train-activations", o.train_activations, "Train activations (JSON lines)")->group(data);
  app.add_option("--train-labels", o.train_labels, "Train labels (TSV)")->group(data);
  app.add_option("--dev-activations", o.dev_activations, "Dev activations")->group(data);
  app.add_option("--dev-labels", o.dev_labels, "Dev labels")->group(data);
  app.add_option("--test-activations", o.test_activations, "Test activations")->group(data);
  app.add_option("--test-labels", o.test_labels, "Test labels")->group(data);
  app.add_option("--mode", o.mode, "Label mode")->check(CLI::IsMember({"token", "pair"}))->capture_default_str()->group(data);

  auto* run = "Run";
  app.add_option("--seed", o.seed, "Seed for every stochastic step")->envname("NEURON_LCA_SEED")->capture_default_str()->group(run);
  app.add_option("--out", o.out, "Output directory")->capture_default_str()->group(run);
  app.add_option("--probe", o.probe, "Probe file (default <out>/probe.json)")->group(run);
  app.add_option("--ranking", o.ranking, "Ranking file (default <out>/ranking.json)")->group(run);
  app.add_option("--selection", o.selection, "Selection file (default <out>/selection.json)")->group(run);
  app.add_option("--timestamp", o.timestamp, "Fixed generated_at value for run.json")->group(run);
  app.add_option("--jobs", o.jobs, "Parallel grid-search cells")->check(CLI::PositiveNumber)->capture_default_str()->group(run);

  auto* training = "Training";
  app.add_option("--lambda1", o.lambda1, "L1 penalty (skips the grid search in pipeline)")->group(training);
  app.add_option("--lambda2", o.lambda2, "L2 penalty (skips the grid search in pipeline)")->group(training);
  app.add_option("--epochs", o.epochs, "Training epochs")->capture_default_str()->group(training);
  app.add_option("--batch-size", o.batch_size, "Minibatch size")->capture_default_str()->group(training);
  app.add_option("--learning-rate", o.learning_rate, "Adam learning rate")->capture_default_str()->group(training);
  app.add_flag("--standardize", o.standardize, "Z-score features on the training split")->group(training);
  app.add_flag("--no-bias", o.no_bias, "Train without a bias term")->group(training);

  auto* analysis = "Analysis";
  app.add_option("--delta", o.delta, "Accepted accuracy loss for minimal selection, in points")->capture_default_str()->group(analysis);
  app.add_option("--step", o.step, "Minimal selection step, percent of neurons")->capture_default_str()->group(analysis);
  app.add_option("--mass-fraction", o.mass_fraction, "Top/bottom mask size for the grid score, percent")->capture_default_str()->group(analysis);
  app.add_option("--alpha-step", o.alpha_step, "Ranking sweep increment, percentage points")->capture_default_str()->group(analysis);
  app.add_flag("--unseen-uniform", o.unseen_uniform, "Control task: uniform tags for unseen word types")->group(analysis);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linguistic correlation analysis of neuron activations", "neuron-lca"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  StageArgs a;
  add_common_options(app, o);

  auto* train = app.add_subcommand("train", "Train an elastic-net probe on the train split");
  auto* search = app.add_subcommand("grid-search", "Score the lambda grid on dev");
  auto* rank = app.add_subcommand("rank", "Rank neurons from a trained probe");
  auto* minimal = app.add_subcommand("select-minimal", "Smallest top subset within delta of the oracle");

  auto* ablate = app.add_subcommand("ablate", "Accuracy with only a top, random or bottom subset");
  ablate->add_option("--strategy", a.strategy, "Subset strategy")
      ->check(CLI::IsMember({"top", "random", "bottom"}))
      ->required();
  ablate->add_option("--percent", a.percent, "Subset size, percent of neurons")->check(CLI::Range(0.0, 100.0))->required();
  ablate->add_flag("--retrain", a.retrain, "Retrain on the subset instead of zeroing the rest");

  auto* selectivity = app.add_subcommand("selectivity", "Task minus control-task accuracy");

  auto* layers = app.add_subcommand("layers", "Selected neurons per layer");
  layers->add_option("--percent", a.layers_percent, "Use the top percent of the ranking instead of the selection file")
      ->check(CLI::Range(0.0, 100.0));

  auto* spread = app.add_subcommand("spread", "Neurons needed per property");
  spread->add_option("--percent", a.spread_percent, "Weight-mass percent (default: level of the minimal selection)")
      ->check(CLI::Range(0.0, 100.0));

  auto* top_words = app.add_subcommand("top-words", "Words that most activate a neuron");
  top_words->add_option("--neuron", a.neuron, "Neuron index")->required();
  top_words->add_option("--k", a.k, "Number of words")->check(CLI::PositiveNumber)->capture_default_str();
  top_words->add_option("--mode", a.words_mode, "Ranking sign")
      ->check(CLI::IsMember({"abs", "positive", "negative"}))
      ->capture_default_str();
  top_words->add_option("--activations", a.activations, "Activation file (default: train split)");

  auto* visualize = app.add_subcommand("visualize", "HTML heatmap of one neuron over sentences");
  visualize->add_option("--neuron", a.neuron, "Neuron index")->required();
  visualize->add_option("--sentences", a.sentences, "Sentence ids, comma separated")->delimiter(',')->required();
  visualize->add_option("--activations", a.activations, "Activation file (default: train split)");

  auto* compare = app.add_subcommand("compare", "Compare two run directories");
  compare->add_option("--base", a.base, "Base run directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--other", a.other, "Other run directory")->required()->check(CLI::ExistingDirectory);

  auto* pipeline = app.add_subcommand("pipeline", "Full analysis and report bundle");

  auto* synth = app.add_subcommand("synth", "Write a seeded planted-neuron corpus");
  synth->add_option("--layers", a.synth.num_layers, "Layers")->capture_default_str();
  synth->add_option("--hidden", a.synth.hidden_size, "Units per layer")->capture_default_str();
  synth->add_option("--tags", a.synth.num_tags, "Tags")->capture_default_str();
  synth->add_option("--signals", a.synth.num_signals, "Planted signals")->capture_default_str();
  synth->add_option("--copies", a.synth.copies, "Neurons per signal")->capture_default_str();
  synth->add_option("--copy-noise", a.synth.copy_noise, "Noise on each copy")->capture_default_str();
  synth->add_option("--train-tokens", a.synth.train_tokens, "Train tokens")->capture_default_str();
  synth->add_option("--dev-tokens", a.synth.dev_tokens, "Dev tokens")->capture_default_str();
  synth->add_option("--test-tokens", a.synth.test_tokens, "Test tokens")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (train->parsed()) return cmd_train(o, out);
    if (search->parsed()) return cmd_grid_search(o, out);
    if (rank->parsed()) return cmd_rank(o, out);
    if (minimal->parsed()) return cmd_select_minimal(o, out);
    if (ablate->parsed()) return cmd_ablate(o, a, out);
    if (selectivity->parsed()) return cmd_selectivity(o, out);
    if (layers->parsed()) return cmd_layers(o, a, out);
    if (spread->parsed()) return cmd_spread(o, a, out);
    if (top_words->parsed()) return cmd_top_words(o, a, out);
    if (visualize->parsed()) return cmd_visualize(o, a, out);
    if (compare->parsed()) return cmd_compare(o, a, out);
    if (pipeline->parsed()) return cmd_pipeline(o, out);
    if (synth->parsed()) return cmd_synth(o, a, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace lca
