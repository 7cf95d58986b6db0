#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lca/analysis.hpp"
#include "lca/cli.hpp"
#include "lca/dataset.hpp"
#include "lca/error.hpp"
#include "lca/lambda_search.hpp"
#include "lca/pipeline.hpp"
#include "lca/probe.hpp"
#include "lca/ranking.hpp"
#include "lca/selection.hpp"
#include "lca/synthetic.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace lca;

namespace {

py::handle lca_error;

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

CorpusSplits load_dir(const fs::path& dir, const std::string& mode) {
  const LabelMode m = parse_label_mode(mode);
  return load_splits(dir / "manifest.json", {dir / "train.jsonl", dir / "train.tsv"},
                     {dir / "dev.jsonl", dir / "dev.tsv"}, {dir / "test.jsonl", dir / "test.tsv"}, m);
}

TrainConfig train_config(std::uint64_t seed, std::size_t epochs, std::size_t batch_size, double learning_rate,
                         bool standardize, bool use_bias) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.learning_rate = learning_rate;
  cfg.standardize = standardize;
  cfg.use_bias = use_bias;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neuron ranking and analysis for linear probing classifiers";
  m.attr("__version__") = tool_version();

  lca_error = py::exception<Error>(m, "LcaError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(lca_error)(std::string(e.what()));
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(lca_error.ptr(), exc.ptr());
    }
  });

  py::class_<ActivationManifest>(m, "Manifest")
      .def_readonly("num_layers", &ActivationManifest::num_layers)
      .def_readonly("hidden_size", &ActivationManifest::hidden_size)
      .def_readonly("model_name", &ActivationManifest::model_name)
      .def_property_readonly("neuron_count", &ActivationManifest::neuron_count)
      .def("locate", [](const ActivationManifest& mf, std::size_t n, bool pair) {
        const NeuronLocation loc = mf.locate(n, pair);
        return py::make_tuple(loc.layer, loc.unit, loc.modifier_side);
      }, py::arg("neuron"), py::arg("pair_mode") = false);

  py::class_<AlignedCorpus>(m, "Corpus")
      .def_readonly("manifest", &AlignedCorpus::manifest)
      .def_readonly("tag_vocab", &AlignedCorpus::tag_vocab)
      .def_readonly("labels", &AlignedCorpus::labels)
      .def_readonly("word_types", &AlignedCorpus::word_types)
      .def_property_readonly("features", [](const AlignedCorpus& c) { return c.features; })
      .def_property_readonly("sample_count", &AlignedCorpus::sample_count)
      .def_property_readonly("feature_dim", &AlignedCorpus::feature_dim)
      .def_property_readonly("mode", [](const AlignedCorpus& c) { return to_string(c.mode); });

  py::class_<CorpusSplits>(m, "Splits")
      .def_readonly("train", &CorpusSplits::train)
      .def_readonly("dev", &CorpusSplits::dev)
      .def_readonly("test", &CorpusSplits::test);

  m.def("load_splits", &load_dir, py::arg("data_dir"), py::arg("mode") = "token",
        "Loads manifest.json and {train,dev,test}.{jsonl,tsv} from a directory");

  py::class_<LinearProbe>(m, "Probe")
      .def_readonly("tag_vocab", &LinearProbe::tag_vocab)
      .def_property_readonly("theta", [](const LinearProbe& p) { return p.theta; })
      .def_property_readonly("bias", [](const LinearProbe& p) { return p.bias; })
      .def_property_readonly("lambda1", [](const LinearProbe& p) { return p.reg.lambda1; })
      .def_property_readonly("lambda2", [](const LinearProbe& p) { return p.reg.lambda2; })
      .def("predict", [](const LinearProbe& p, const std::vector<double>& z) { return predict_tag(p, z).tag; })
      .def("accuracy", [](const LinearProbe& p, const AlignedCorpus& c) { return evaluate_accuracy(p, c); })
      .def("to_dict", [](const LinearProbe& p) { return to_python(to_json(p)); })
      .def("save", [](const LinearProbe& p, const fs::path& path) { save_probe(p, path); });

  m.def("load_probe", &load_probe, py::arg("path"));

  m.def(
      "train_probe",
      [](const AlignedCorpus& corpus, double lambda1, double lambda2, std::uint64_t seed, std::size_t epochs,
         std::size_t batch_size, double learning_rate, bool standardize, bool use_bias) {
        const TrainConfig cfg = train_config(seed, epochs, batch_size, learning_rate, standardize, use_bias);
        py::gil_scoped_release release;
        return train_probe(corpus, {lambda1, lambda2}, cfg);
      },
      py::arg("corpus"), py::arg("lambda1") = 0.0, py::arg("lambda2") = 0.0, py::arg("seed") = 0,
      py::arg("epochs") = 10, py::arg("batch_size") = 512, py::arg("learning_rate") = 1e-3,
      py::arg("standardize") = false, py::arg("use_bias") = true);

  py::class_<NeuronRanking>(m, "Ranking")
      .def_readonly("ordering", &NeuronRanking::ordering)
      .def_readonly("discovered_at", &NeuronRanking::discovered_at)
      .def_readonly("zero_weight_neurons", &NeuronRanking::zero_weight_neurons)
      .def_readonly("tag_vocab", &NeuronRanking::tag_vocab)
      .def("head", &NeuronRanking::head)
      .def("tail", &NeuronRanking::tail)
      .def("to_dict", [](const NeuronRanking& r) { return to_python(to_json(r)); });

  m.def(
      "extract_ordering",
      [](const LinearProbe& probe, double alpha_step, double start_p) {
        return extract_ordering(probe, RankingConfig{alpha_step, start_p});
      },
      py::arg("probe"), py::arg("alpha_step") = 1.0, py::arg("start_p") = 1.0);

  m.def("top_neurons_for_tag", [](const std::vector<double>& w, double p) { return top_neurons_for_tag(w, p); },
        py::arg("weights"), py::arg("p"));

  m.def(
      "score_lambdas",
      [](double acc_top, double acc_bottom, double acc_noreg, double acc_lambda, double alpha, double beta) {
        return score_lambdas({acc_top, acc_bottom, acc_noreg, acc_lambda}, alpha, beta);
      },
      py::arg("acc_top"), py::arg("acc_bottom"), py::arg("acc_noreg"), py::arg("acc_lambda"), py::arg("alpha") = 0.5,
      py::arg("beta") = 0.5);

  m.def(
      "grid_search",
      [](const CorpusSplits& splits, std::optional<std::vector<std::pair<double, double>>> grid, std::uint64_t seed,
         std::size_t epochs, double learning_rate, std::size_t jobs) {
        SearchConfig cfg;
        if (grid) {
          cfg.grid.clear();
          for (auto [l1, l2] : *grid) cfg.grid.push_back({l1, l2});
        }
        cfg.jobs = jobs;
        const TrainConfig train = train_config(seed, epochs, 512, learning_rate, false, true);
        SearchResult r;
        {
          py::gil_scoped_release release;
          r = grid_search(splits, cfg, train);
        }
        return to_python(to_json(r));
      },
      py::arg("splits"), py::arg("grid") = py::none(), py::arg("seed") = 0, py::arg("epochs") = 10,
      py::arg("learning_rate") = 1e-3, py::arg("jobs") = 1);

  m.def(
      "minimal_selection",
      [](const CorpusSplits& splits, const NeuronRanking& ranking, double lambda1, double lambda2, std::uint64_t seed,
         std::size_t epochs, double learning_rate, double delta, double step_percent) {
        SelectionConfig cfg;
        cfg.delta = delta;
        cfg.step_percent = step_percent;
        cfg.seed = seed;
        const TrainConfig train = train_config(seed, epochs, 512, learning_rate, false, true);
        SelectionResult r;
        {
          py::gil_scoped_release release;
          r = minimal_selection(splits, ranking, {lambda1, lambda2}, train, cfg);
        }
        return to_python(to_json(r));
      },
      py::arg("splits"), py::arg("ranking"), py::arg("lambda1") = 0.0, py::arg("lambda2") = 0.0, py::arg("seed") = 0,
      py::arg("epochs") = 10, py::arg("learning_rate") = 1e-3, py::arg("delta") = 1.0, py::arg("step_percent") = 1.0);

  m.def(
      "mask_accuracy",
      [](const LinearProbe& probe, const AlignedCorpus& corpus, const NeuronRanking& ranking,
         const std::string& strategy, double percent, std::uint64_t seed) {
        return mask_evaluate(probe, corpus, ranking, parse_strategy(strategy), percent, seed);
      },
      py::arg("probe"), py::arg("corpus"), py::arg("ranking"), py::arg("strategy"), py::arg("percent"),
      py::arg("seed") = 0);

  m.def(
      "layer_histogram",
      [](const std::vector<std::size_t>& neurons, const ActivationManifest& manifest, bool pair_mode) {
        return to_python(to_json(layer_histogram(neurons, manifest, pair_mode)));
      },
      py::arg("neurons"), py::arg("manifest"), py::arg("pair_mode") = false);

  m.def(
      "control_labels",
      [](const AlignedCorpus& corpus, std::uint64_t seed, bool unseen_uniform) {
        return ControlTask::fit(corpus, seed, ControlTaskOptions{unseen_uniform}).relabel(corpus).labels;
      },
      py::arg("corpus"), py::arg("seed"), py::arg("unseen_uniform") = false);

  m.def(
      "run_pipeline",
      [](const fs::path& data_dir, const fs::path& out_dir, std::uint64_t seed, std::optional<double> lambda1,
         std::optional<double> lambda2, std::size_t epochs, double learning_rate, std::optional<std::string> timestamp,
         std::size_t jobs) {
        const CorpusSplits splits = load_dir(data_dir, "token");
        PipelineConfig cfg;
        cfg.seed = seed;
        cfg.train.epochs = epochs;
        cfg.train.learning_rate = learning_rate;
        cfg.search.jobs = jobs;
        cfg.timestamp = timestamp;
        if (lambda1 || lambda2) cfg.fixed_reg = RegularizationConfig{lambda1.value_or(0.0), lambda2.value_or(0.0)};
        cfg.config_echo = {{"seed", seed}, {"epochs", epochs}, {"learning_rate", learning_rate}};
        nlohmann::json run_json;
        {
          py::gil_scoped_release release;
          const PipelineRun run = run_pipeline(splits, cfg);
          write_pipeline_outputs(run, out_dir);
          run_json = read_json(out_dir / "run.json");
        }
        return to_python(run_json);
      },
      py::arg("data_dir"), py::arg("out_dir"), py::arg("seed") = 0, py::arg("lambda1") = py::none(),
      py::arg("lambda2") = py::none(), py::arg("epochs") = 10, py::arg("learning_rate") = 1e-3,
      py::arg("timestamp") = py::none(), py::arg("jobs") = 1,
      "Runs the full analysis on a data directory and writes the report bundle; returns run.json");

  m.def(
      "write_planted_corpus",
      [](const fs::path& out_dir, std::uint64_t seed, std::size_t num_layers, std::size_t hidden_size,
         std::size_t num_tags, std::size_t num_signals, std::size_t train_tokens, std::size_t dev_tokens,
         std::size_t test_tokens) {
        PlantedCorpusConfig cfg;
        cfg.seed = seed;
        cfg.num_layers = num_layers;
        cfg.hidden_size = hidden_size;
        cfg.num_tags = num_tags;
        cfg.num_signals = num_signals;
        cfg.train_tokens = train_tokens;
        cfg.dev_tokens = dev_tokens;
        cfg.test_tokens = test_tokens;
        const PlantedCorpus corpus = make_planted_corpus(cfg);
        save_planted_corpus(corpus, out_dir);
        return corpus.planted;
      },
      py::arg("out_dir"), py::arg("seed") = 1, py::arg("num_layers") = 4, py::arg("hidden_size") = 50,
      py::arg("num_tags") = 5, py::arg("num_signals") = 10, py::arg("train_tokens") = 10000,
      py::arg("dev_tokens") = 1000, py::arg("test_tokens") = 1000,
      "Writes a seeded corpus with known salient neurons; returns their indices");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_command(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr)");
}
