#include <algorithm>
#include <map>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "lca/dataset.hpp"
#include "lca/error.hpp"
#include "oracles.hpp"

using namespace lca;
using fixtures::TempDir;
using fixtures::write_file;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an lca::Error");
  return ErrorCode::InvalidArgument;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

LabelSet token_labels(const std::vector<std::vector<std::pair<std::string, std::string>>>& sentences) {
  LabelSet set;
  for (const auto& sent : sentences) {
    std::vector<std::string> toks;
    std::vector<std::size_t> tags;
    for (const auto& [tok, tag] : sent) {
      auto it = std::find(set.tag_vocab.begin(), set.tag_vocab.end(), tag);
      if (it == set.tag_vocab.end()) {
        set.tag_vocab.push_back(tag);
        it = set.tag_vocab.end() - 1;
      }
      toks.push_back(tok);
      tags.push_back(static_cast<std::size_t>(it - set.tag_vocab.begin()));
    }
    set.tokens.push_back(toks);
    set.tags.push_back(tags);
  }
  return set;
}

}  // namespace

TEST_CASE("manifest maps neuron indices to layer and unit") {
  ActivationManifest m;
  m.num_layers = 13;
  m.hidden_size = 768;
  CHECK(m.neuron_count() == 9984);
  CHECK(m.locate(0).layer == 0);
  CHECK(m.locate(769).layer == 1);
  CHECK(m.locate(769).unit == 1);
  CHECK(m.locate(9983).layer == 12);
  CHECK(m.locate(9983).unit == 767);
  const NeuronLocation mod = m.locate(9984 + 5, true);
  CHECK(mod.modifier_side);
  CHECK(mod.layer == 0);
  CHECK(mod.unit == 5);
  CHECK(code_of([&] { (void)m.locate(9984); }) == ErrorCode::IndexOutOfRange);

  ActivationManifest empty;
  CHECK(code_of([&] { empty.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("smallest valid activation file loads") {
  TempDir dir;
  write_file(dir / "m.json", fixtures::manifest_json(2, 3));
  write_file(dir / "a.jsonl",
             "{\"sentence_id\": 4, \"tokens\": [\"a\", \"b\"], \"activations\": [[1,2,3,4,5,6],[6,5,4,3,2,1]]}\n");
  const ActivationDataset ds = load_activations(dir / "a.jsonl", dir / "m.json");
  CHECK(ds.manifest.neuron_count() == 6);
  REQUIRE(ds.sentences.size() == 1);
  CHECK(ds.sentences[0].id == 4);
  CHECK(ds.sentences[0].activations.rows() == 2);
  CHECK(ds.sentences[0].activations.cols() == 6);
  CHECK(ds.sentences[0].activations(1, 0) == 6.0);
  CHECK(ds.token_count() == 2);
}

TEST_CASE("paper-sized manifest is accepted") {
  TempDir dir;
  write_file(dir / "m.json", fixtures::manifest_json(13, 768));
  std::string row = "[";
  for (int i = 0; i < 9984; ++i) row += (i ? ",0.5" : "0.5");
  row += "]";
  write_file(dir / "a.jsonl", "{\"sentence_id\": 0, \"tokens\": [\"x\"], \"activations\": [" + row + "]}\n");
  const ActivationDataset ds = load_activations(dir / "a.jsonl", dir / "m.json");
  CHECK(ds.sentences[0].activations.cols() == 9984);
}

TEST_CASE("activation loader rejects malformed input") {
  TempDir dir;
  write_file(dir / "m.json", fixtures::manifest_json(2, 3));

  SUBCASE("row width differs from D") {
    write_file(dir / "a.jsonl", "{\"sentence_id\": 0, \"tokens\": [\"a\"], \"activations\": [[1,2,3,4,5]]}\n");
    auto load = [&] { load_activations(dir / "a.jsonl", dir / "m.json"); };
    CHECK(code_of(load) == ErrorCode::DimensionMismatch);
    CHECK(message_of(load).find("line 1") != std::string::npos);
  }
  SUBCASE("not JSON") {
    write_file(dir / "a.jsonl", "{\"sentence_id\": 0, \"tokens\": [\"a\"], \"activations\": [[1,2,3,4,5,6]]}\nnot json\n");
    auto load = [&] { load_activations(dir / "a.jsonl", dir / "m.json"); };
    CHECK(code_of(load) == ErrorCode::MalformedRecord);
    CHECK(message_of(load).find("line 2") != std::string::npos);
  }
  SUBCASE("row count differs from token count") {
    write_file(dir / "a.jsonl", "{\"sentence_id\": 0, \"tokens\": [\"a\", \"b\"], \"activations\": [[1,2,3,4,5,6]]}\n");
    CHECK(code_of([&] { load_activations(dir / "a.jsonl", dir / "m.json"); }) == ErrorCode::MalformedRecord);
  }
  SUBCASE("value outside f32 range") {
    write_file(dir / "a.jsonl", "{\"sentence_id\": 0, \"tokens\": [\"a\"], \"activations\": [[1,2,3,4,5,1e300]]}\n");
    CHECK(code_of([&] { load_activations(dir / "a.jsonl", dir / "m.json"); }) == ErrorCode::NonFiniteValue);
  }
  SUBCASE("empty file") {
    write_file(dir / "a.jsonl", "\n\n");
    CHECK(code_of([&] { load_activations(dir / "a.jsonl", dir / "m.json"); }) == ErrorCode::EmptyFile);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { load_activations(dir / "nope.jsonl", dir / "m.json"); }) == ErrorCode::IoError);
  }
}

TEST_CASE("activations survive a save/load round trip at f32 precision") {
  TempDir dir;
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  std::vector<std::vector<std::vector<double>>> sents(3, std::vector<std::vector<double>>(4, std::vector<double>(6)));
  for (auto& s : sents)
    for (auto& r : s)
      for (auto& v : r) v = normal(gen);
  const ActivationDataset ds = fixtures::dataset(2, 3, sents);
  save_manifest(ds.manifest, dir / "m.json");
  save_activations(ds, dir / "a.jsonl");
  const ActivationDataset back = load_activations(dir / "a.jsonl", dir / "m.json");
  REQUIRE(back.sentences.size() == 3);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(back.sentences[s].tokens == ds.sentences[s].tokens);
    for (Eigen::Index r = 0; r < 4; ++r)
      for (Eigen::Index c = 0; c < 6; ++c)
        CHECK(back.sentences[s].activations(r, c) ==
              static_cast<double>(static_cast<float>(ds.sentences[s].activations(r, c))));
  }
  save_activations(back, dir / "b.jsonl");
  CHECK(fixtures::read_file(dir / "a.jsonl") == fixtures::read_file(dir / "b.jsonl"));
}

TEST_CASE("token label files") {
  TempDir dir;
  write_file(dir / "l.tsv", "The\tNN\nruns\tVB\n\nDogs\tNN\nbark\tVB\n");
  const LabelSet set = load_labels(dir / "l.tsv", LabelMode::Token);
  CHECK(set.sentence_count() == 2);
  CHECK(set.annotation_count() == 4);
  CHECK(set.tag_vocab == std::vector<std::string>{"NN", "VB"});
  CHECK(set.tags[1] == std::vector<std::size_t>{0, 1});
  CHECK(set.tag_index("VB") == 1);
  CHECK_FALSE(set.tag_index("JJ").has_value());

  write_file(dir / "bad.tsv", "The\tNN\nlonely\n");
  CHECK(code_of([&] { load_labels(dir / "bad.tsv", LabelMode::Token); }) == ErrorCode::MalformedLine);
  write_file(dir / "empty.tsv", "\n\n");
  CHECK(code_of([&] { load_labels(dir / "empty.tsv", LabelMode::Token); }) == ErrorCode::EmptyFile);
}

TEST_CASE("pair label files") {
  TempDir dir;
  write_file(dir / "p.tsv", "0\t2\tnsubj\n1\t2\tdet\n\n0\t1\tnsubj\n");
  const LabelSet set = load_labels(dir / "p.tsv", LabelMode::Pair);
  REQUIRE(set.pairs.size() == 2);
  CHECK(set.pairs[0][0].head == 0);
  CHECK(set.pairs[0][0].modifier == 2);
  CHECK(set.tag_vocab[set.pairs[0][0].tag] == "nsubj");
  write_file(dir / "bad.tsv", "0\tx\tnsubj\n");
  CHECK(code_of([&] { load_labels(dir / "bad.tsv", LabelMode::Pair); }) == ErrorCode::MalformedLine);
  write_file(dir / "short.tsv", "0\t1\n");
  CHECK(code_of([&] { load_labels(dir / "short.tsv", LabelMode::Pair); }) == ErrorCode::MalformedLine);
}

TEST_CASE("labels survive a save/load round trip") {
  TempDir dir;
  const LabelSet set = token_labels({{{"a", "X"}, {"b", "Y"}}, {{"c", "X"}}});
  save_labels(set, dir / "l.tsv");
  const LabelSet back = load_labels(dir / "l.tsv", LabelMode::Token);
  CHECK(back.tokens == set.tokens);
  CHECK(back.tags == set.tags);
  CHECK(back.tag_vocab == set.tag_vocab);
}

TEST_CASE("token-mode alignment") {
  const ActivationDataset ds = fixtures::dataset(1, 2, {{{1, 2}, {3, 4}, {5, 6}}}, {{"a", "b", "c"}});
  const LabelSet labels = token_labels({{{"a", "X"}, {"b", "Y"}, {"c", "X"}}});
  const AlignedCorpus c = align_corpus(ds, labels);
  CHECK(c.sample_count() == 3);
  CHECK(c.feature_dim() == 2);
  CHECK(c.features(2, 1) == 6.0);
  CHECK(c.labels == std::vector<std::size_t>{0, 1, 0});
  CHECK(c.word_types == std::vector<std::string>{"a", "b", "c"});
  for (std::size_t i = 0; i < c.sample_count(); ++i) CHECK(c.sample_index(c.refs[i]) == i);
  CHECK_FALSE(c.sample_index({0, 3}).has_value());
}

TEST_CASE("pair-mode alignment concatenates head then modifier") {
  const ActivationDataset ds = fixtures::dataset(1, 2, {{{1, 2}, {3, 4}, {5, 6}}}, {{"a", "b", "c"}});
  LabelSet labels;
  labels.mode = LabelMode::Pair;
  labels.tag_vocab = {"nsubj", "obj"};
  labels.pairs = {{{0, 2, 0}, {1, 0, 1}}};
  const AlignedCorpus c = align_corpus(ds, labels);
  CHECK(c.sample_count() == 2);
  CHECK(c.feature_dim() == 4);
  CHECK(c.features.row(0) == (Eigen::RowVectorXd(4) << 1, 2, 5, 6).finished());
  CHECK(c.features.row(1) == (Eigen::RowVectorXd(4) << 3, 4, 1, 2).finished());
  CHECK(c.word_types[0] == "a\xe2\x86\x92" "c");

  labels.pairs = {{{0, 3, 0}}};
  CHECK(code_of([&] { align_corpus(ds, labels); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("alignment errors and warnings") {
  const ActivationDataset ds = fixtures::dataset(1, 2, {{{1, 2}, {3, 4}, {5, 6}}}, {{"a", "b", "c"}});
  SUBCASE("four tags for three tokens") {
    const LabelSet labels = token_labels({{{"a", "X"}, {"b", "Y"}, {"c", "X"}, {"d", "Y"}}});
    auto align = [&] { align_corpus(ds, labels); };
    CHECK(code_of(align) == ErrorCode::TokenCountMismatch);
    CHECK(message_of(align).find("sentence 0") != std::string::npos);
  }
  SUBCASE("sentence count differs") {
    const LabelSet labels = token_labels({{{"a", "X"}, {"b", "Y"}, {"c", "X"}}, {{"d", "Y"}}});
    CHECK(code_of([&] { align_corpus(ds, labels); }) == ErrorCode::SentenceCountMismatch);
  }
  SUBCASE("token strings differ") {
    fixtures::WarningCapture warnings;
    const LabelSet labels = token_labels({{{"a", "X"}, {"B", "Y"}, {"c", "X"}}});
    const AlignedCorpus c = align_corpus(ds, labels);
    CHECK(c.sample_count() == 3);
    REQUIRE(warnings.messages.size() == 1);
    CHECK(warnings.messages[0].find("'b'") != std::string::npos);
  }
}

TEST_CASE("sample count equals annotation count and refs invert") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<std::vector<double>>> sents;
    std::vector<std::vector<std::pair<std::string, std::string>>> ann;
    const int n = 1 + static_cast<int>(gen() % 5);
    for (int s = 0; s < n; ++s) {
      const int len = 1 + static_cast<int>(gen() % 6);
      sents.emplace_back(len, std::vector<double>(4, 1.0));
      ann.emplace_back();
      for (int i = 0; i < len; ++i) ann.back().push_back({"w" + std::to_string(s) + "_" + std::to_string(i), gen() % 2 ? "A" : "B"});
    }
    const AlignedCorpus c = align_corpus(fixtures::dataset(2, 2, sents), token_labels(ann));
    const LabelSet labels = token_labels(ann);
    CHECK(c.sample_count() == labels.annotation_count());
    for (std::size_t i = 0; i < c.sample_count(); ++i) CHECK(c.sample_index(c.refs[i]) == i);
  }
}

TEST_CASE("select_columns keeps the requested columns in order") {
  const ActivationDataset ds = fixtures::dataset(1, 3, {{{1, 2, 3}, {4, 5, 6}}}, {{"a", "b"}});
  const AlignedCorpus c = align_corpus(ds, token_labels({{{"a", "X"}, {"b", "Y"}}}));
  const std::vector<std::size_t> cols = {2, 0};
  const AlignedCorpus s = c.select_columns(cols);
  CHECK(s.feature_dim() == 2);
  CHECK(s.features(1, 0) == 6.0);
  CHECK(s.features(1, 1) == 4.0);
  CHECK(s.labels == c.labels);
}

TEST_CASE("splits share one tag vocabulary") {
  TempDir dir;
  write_file(dir / "m.json", fixtures::manifest_json(1, 2));
  const std::string acts = "{\"sentence_id\": 0, \"tokens\": [\"a\", \"b\"], \"activations\": [[1,2],[3,4]]}\n";
  for (const char* split : {"train", "dev", "test"}) write_file(dir / (std::string(split) + ".jsonl"), acts);
  write_file(dir / "train.tsv", "a\tX\nb\tY\n");
  write_file(dir / "dev.tsv", "a\tZ\nb\tX\n");
  write_file(dir / "test.tsv", "a\tY\nb\tY\n");
  const CorpusSplits splits = load_splits(dir / "m.json", {dir / "train.jsonl", dir / "train.tsv"},
                                          {dir / "dev.jsonl", dir / "dev.tsv"}, {dir / "test.jsonl", dir / "test.tsv"},
                                          LabelMode::Token);
  const std::vector<std::string> vocab = {"X", "Y", "Z"};
  CHECK(splits.train.tag_vocab == vocab);
  CHECK(splits.dev.tag_vocab == vocab);
  CHECK(splits.test.tag_vocab == vocab);
  CHECK(splits.dev.labels == std::vector<std::size_t>{2, 0});
}

TEST_CASE("control task with a single tag reproduces the input") {
  const LabelSet labels = token_labels({{{"a", "X"}, {"b", "X"}}, {{"a", "X"}}});
  const LabelSet control = make_control_task(labels, 5);
  CHECK(control.tags == labels.tags);
  CHECK(control.tokens == labels.tokens);
}

TEST_CASE("control task is deterministic and consistent per word type") {
  const LabelSet labels =
      token_labels({{{"the", "D"}, {"dog", "N"}, {"runs", "V"}}, {{"the", "D"}, {"cat", "N"}, {"Runs", "V"}}});
  const LabelSet a = make_control_task(labels, 17);
  const LabelSet b = make_control_task(labels, 17);
  CHECK(a.tags == b.tags);
  CHECK(a.tags[0][0] == a.tags[1][0]);
  const ControlTask task = ControlTask::fit(labels, 17);
  CHECK(task.assign("the") == a.tags[0][0]);
  CHECK(task.tag_frequencies().size() == 3);
  CHECK(task.tag_frequencies()[0] == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("control marginals follow the tag distribution") {
  std::mt19937_64 gen(1234);
  std::discrete_distribution<std::size_t> dist({0.6, 0.3, 0.1});
  LabelSet labels;
  labels.tag_vocab = {"A", "B", "C"};
  for (int s = 0; s < 5000; ++s) {
    labels.tokens.emplace_back();
    labels.tags.emplace_back();
    for (int i = 0; i < 20; ++i) {
      labels.tokens.back().push_back("t" + std::to_string(s * 20 + i));
      labels.tags.back().push_back(dist(gen));
    }
  }
  const LabelSet control = make_control_task(labels, 99);
  std::vector<double> task(3, 0.0), ctrl(3, 0.0);
  for (std::size_t s = 0; s < labels.tags.size(); ++s) {
    for (std::size_t i = 0; i < labels.tags[s].size(); ++i) {
      task[labels.tags[s][i]] += 1e-5;
      ctrl[control.tags[s][i]] += 1e-5;
    }
  }
  CHECK(oracle::total_variation(task, ctrl) <= 0.02);
}

TEST_CASE("control assignment does not depend on sentence order") {
  const LabelSet labels = token_labels(
      {{{"a", "X"}, {"b", "Y"}}, {{"c", "Z"}, {"a", "X"}}, {{"d", "Y"}, {"e", "X"}, {"b", "Y"}}});
  LabelSet shuffled = labels;
  std::reverse(shuffled.tokens.begin(), shuffled.tokens.end());
  std::reverse(shuffled.tags.begin(), shuffled.tags.end());
  const ControlTask x = ControlTask::fit(labels, 8);
  const ControlTask y = ControlTask::fit(shuffled, 8);
  for (const char* w : {"a", "b", "c", "d", "e", "unseen"}) CHECK(x.assign(w) == y.assign(w));
}

TEST_CASE("unseen word types") {
  LabelSet labels;
  labels.tag_vocab = {"A", "B", "C", "D"};
  labels.tokens = {{"only"}};
  labels.tags = {{0}};
  const ControlTask empirical = ControlTask::fit(labels, 3);
  const ControlTask uniform = ControlTask::fit(labels, 3, ControlTaskOptions{true});
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 2000; ++i) {
    const std::string w = "new" + std::to_string(i);
    CHECK(empirical.assign(w) == 0);
    ++hits[uniform.assign(w)];
  }
  for (int h : hits) CHECK(h > 400);
  CHECK(uniform.assign("only") == 0);
}

TEST_CASE("control tasks reject pair mode") {
  LabelSet labels;
  labels.mode = LabelMode::Pair;
  labels.tag_vocab = {"A", "B"};
  labels.pairs = {{{0, 1, 0}}};
  CHECK(code_of([&] { make_control_task(labels, 1); }) == ErrorCode::PairModeUnsupported);
}

TEST_CASE("aggregation and label mode names round trip") {
  for (auto a : {Aggregation::Last, Aggregation::First, Aggregation::Average}) CHECK(parse_aggregation(to_string(a)) == a);
  for (auto m : {LabelMode::Token, LabelMode::Pair}) CHECK(parse_label_mode(to_string(m)) == m);
  CHECK(code_of([] { parse_label_mode("tree"); }) == ErrorCode::InvalidArgument);
}
