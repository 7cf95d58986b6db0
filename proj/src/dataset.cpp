#include "lca/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "lca/error.hpp"
#include "lca/log.hpp"
#include "lca/random.hpp"

namespace lca {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Last: return "last";
    case Aggregation::First: return "first";
    case Aggregation::Average: return "average";
  }
  return "last";
}

Aggregation parse_aggregation(const std::string& text) {
  if (text == "last") return Aggregation::Last;
  if (text == "first") return Aggregation::First;
  if (text == "average") return Aggregation::Average;
  fail(ErrorCode::InvalidArgument, "unknown aggregation '" + text + "'");
}

std::string to_string(LabelMode m) { return m == LabelMode::Token ? "token" : "pair"; }

LabelMode parse_label_mode(const std::string& text) {
  if (text == "token") return LabelMode::Token;
  if (text == "pair") return LabelMode::Pair;
  fail(ErrorCode::InvalidArgument, "unknown label mode '" + text + "'");
}

NeuronLocation ActivationManifest::locate(std::size_t neuron, bool pair_mode) const {
  const std::size_t d = neuron_count();
  const std::size_t limit = pair_mode ? 2 * d : d;
  if (neuron >= limit) {
    fail(ErrorCode::IndexOutOfRange,
         "neuron " + std::to_string(neuron) + " outside [0, " + std::to_string(limit) + ")");
  }
  NeuronLocation loc;
  loc.modifier_side = neuron >= d;
  const std::size_t folded = neuron % d;
  loc.layer = folded / hidden_size;
  loc.unit = folded % hidden_size;
  return loc;
}

void ActivationManifest::validate() const {
  if (num_layers == 0 || hidden_size == 0) {
    fail(ErrorCode::InvalidArgument, "manifest needs num_layers > 0 and hidden_size > 0");
  }
  if (dtype != "f32") fail(ErrorCode::InvalidArgument, "unsupported dtype '" + dtype + "'");
}

std::size_t ActivationDataset::token_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::size_t parse_index(const std::string& field, std::size_t line_no) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(field, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != field.size() || v < 0) {
    fail(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": bad index '" + field + "'");
  }
  return static_cast<std::size_t>(v);
}

std::size_t intern_tag(LabelSet& set, const std::string& tag) {
  auto it = std::find(set.tag_vocab.begin(), set.tag_vocab.end(), tag);
  if (it != set.tag_vocab.end()) return static_cast<std::size_t>(it - set.tag_vocab.begin());
  set.tag_vocab.push_back(tag);
  return set.tag_vocab.size() - 1;
}

}  // namespace

ActivationManifest load_manifest(const fs::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
    ActivationManifest m;
    m.num_layers = j.at("num_layers").get<std::size_t>();
    m.hidden_size = j.at("hidden_size").get<std::size_t>();
    m.model_name = j.value("model_name", std::string{});
    m.aggregation = parse_aggregation(j.value("aggregation", std::string{"last"}));
    m.dtype = j.value("dtype", std::string{"f32"});
    m.validate();
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
}

void save_manifest(const ActivationManifest& m, const fs::path& path) {
  json j = {{"num_layers", m.num_layers},
            {"hidden_size", m.hidden_size},
            {"model_name", m.model_name},
            {"aggregation", to_string(m.aggregation)},
            {"dtype", m.dtype}};
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

ActivationDataset load_activations(const fs::path& path, const fs::path& manifest_path) {
  ActivationDataset ds;
  ds.manifest = load_manifest(manifest_path);
  const std::size_t d = ds.manifest.neuron_count();

  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    const std::string where = "line " + std::to_string(line_no);

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::MalformedRecord, where + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("tokens") || !rec.contains("activations") ||
        !rec["tokens"].is_array() || !rec["activations"].is_array()) {
      fail(ErrorCode::MalformedRecord, where + ": expected object with tokens and activations arrays");
    }

    Sentence s;
    if (rec.contains("sentence_id")) {
      if (!rec["sentence_id"].is_number_integer()) {
        fail(ErrorCode::MalformedRecord, where + ": sentence_id must be an integer");
      }
      s.id = rec["sentence_id"].get<std::int64_t>();
    } else {
      s.id = static_cast<std::int64_t>(ds.sentences.size());
    }
    for (const auto& tok : rec["tokens"]) {
      if (!tok.is_string()) fail(ErrorCode::MalformedRecord, where + ": tokens must be strings");
      s.tokens.push_back(tok.get<std::string>());
    }
    const auto& rows = rec["activations"];
    if (s.tokens.empty()) fail(ErrorCode::MalformedRecord, where + ": sentence has no tokens");
    if (rows.size() != s.tokens.size()) {
      fail(ErrorCode::MalformedRecord, where + ": " + std::to_string(rows.size()) +
                                           " activation rows for " + std::to_string(s.tokens.size()) +
                                           " tokens");
    }
    s.activations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (!row.is_array()) fail(ErrorCode::MalformedRecord, where + ": activation row is not an array");
      if (row.size() != d) {
        fail(ErrorCode::DimensionMismatch, where + ": row " + std::to_string(r) + " has width " +
                                               std::to_string(row.size()) + ", expected " +
                                               std::to_string(d));
      }
      for (std::size_t c = 0; c < d; ++c) {
        if (!row[c].is_number()) fail(ErrorCode::MalformedRecord, where + ": non-numeric activation");
        const double v = static_cast<float>(row[c].get<double>());
        if (!std::isfinite(v)) {
          fail(ErrorCode::NonFiniteValue, where + ": non-finite activation at row " +
                                              std::to_string(r) + ", column " + std::to_string(c));
        }
        s.activations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
    }
    ds.sentences.push_back(std::move(s));
  }
  if (ds.sentences.empty()) fail(ErrorCode::EmptyFile, path.string() + " has no records");
  return ds;
}

void save_activations(const ActivationDataset& ds, const fs::path& path) {
  auto out = open_output(path);
  char buf[32];
  for (const auto& s : ds.sentences) {
    out << "{\"sentence_id\":" << s.id << ",\"tokens\":" << json(s.tokens).dump() << ",\"activations\":[";
    for (Eigen::Index r = 0; r < s.activations.rows(); ++r) {
      out << (r ? ",[" : "[");
      for (Eigen::Index c = 0; c < s.activations.cols(); ++c) {
        const float v = static_cast<float>(s.activations(r, c));
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "cannot write a non-finite activation");
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        if (c) out << ',';
        out.write(buf, res.ptr - buf);
      }
      out << ']';
    }
    out << "]}\n";
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

std::size_t LabelSet::sentence_count() const noexcept {
  return mode == LabelMode::Token ? tags.size() : pairs.size();
}

std::size_t LabelSet::annotation_count() const noexcept {
  std::size_t n = 0;
  if (mode == LabelMode::Token) {
    for (const auto& s : tags) n += s.size();
  } else {
    for (const auto& s : pairs) n += s.size();
  }
  return n;
}

std::optional<std::size_t> LabelSet::tag_index(const std::string& tag) const {
  auto it = std::find(tag_vocab.begin(), tag_vocab.end(), tag);
  if (it == tag_vocab.end()) return std::nullopt;
  return static_cast<std::size_t>(it - tag_vocab.begin());
}

LabelSet LabelSet::with_vocab(const std::vector<std::string>& vocab) const {
  std::vector<std::size_t> remap(tag_vocab.size());
  for (std::size_t i = 0; i < tag_vocab.size(); ++i) {
    auto it = std::find(vocab.begin(), vocab.end(), tag_vocab[i]);
    if (it == vocab.end()) fail(ErrorCode::InvalidArgument, "tag '" + tag_vocab[i] + "' missing from vocabulary");
    remap[i] = static_cast<std::size_t>(it - vocab.begin());
  }
  LabelSet out = *this;
  out.tag_vocab = vocab;
  for (auto& s : out.tags) {
    for (auto& t : s) t = remap[t];
  }
  for (auto& s : out.pairs) {
    for (auto& p : s) p.tag = remap[p.tag];
  }
  return out;
}

LabelSet load_labels(const fs::path& path, LabelMode mode) {
  auto in = open_input(path);
  LabelSet set;
  set.mode = mode;

  std::vector<std::string> cur_tokens;
  std::vector<std::size_t> cur_tags;
  std::vector<PairAnnotation> cur_pairs;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    if (mode == LabelMode::Token) {
      set.tokens.push_back(std::move(cur_tokens));
      set.tags.push_back(std::move(cur_tags));
    } else {
      set.pairs.push_back(std::move(cur_pairs));
    }
    cur_tokens.clear();
    cur_tags.clear();
    cur_pairs.clear();
    open = false;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) {
      flush();
      continue;
    }
    auto fields = split_tabs(line);
    const std::string where = "line " + std::to_string(line_no);
    if (mode == LabelMode::Token) {
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
        fail(ErrorCode::MalformedLine, where + ": expected token<TAB>tag");
      }
      cur_tokens.push_back(fields[0]);
      cur_tags.push_back(intern_tag(set, fields[1]));
    } else {
      if (fields.size() != 3 || fields[2].empty()) {
        fail(ErrorCode::MalformedLine, where + ": expected head<TAB>modifier<TAB>tag");
      }
      PairAnnotation p;
      p.head = parse_index(fields[0], line_no);
      p.modifier = parse_index(fields[1], line_no);
      p.tag = intern_tag(set, fields[2]);
      cur_pairs.push_back(p);
    }
    open = true;
  }
  flush();
  if (set.sentence_count() == 0) fail(ErrorCode::EmptyFile, path.string() + " has no annotations");
  return set;
}

void save_labels(const LabelSet& labels, const fs::path& path) {
  auto out = open_output(path);
  for (std::size_t s = 0; s < labels.sentence_count(); ++s) {
    if (s > 0) out << '\n';
    if (labels.mode == LabelMode::Token) {
      for (std::size_t i = 0; i < labels.tags[s].size(); ++i) {
        out << labels.tokens[s][i] << '\t' << labels.tag_vocab[labels.tags[s][i]] << '\n';
      }
    } else {
      for (const auto& p : labels.pairs[s]) {
        out << p.head << '\t' << p.modifier << '\t' << labels.tag_vocab[p.tag] << '\n';
      }
    }
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<std::string> merge_tag_vocab(std::span<const LabelSet* const> sets) {
  std::vector<std::string> vocab;
  for (const LabelSet* set : sets) {
    for (const auto& tag : set->tag_vocab) {
      if (std::find(vocab.begin(), vocab.end(), tag) == vocab.end()) vocab.push_back(tag);
    }
  }
  return vocab;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> AlignedCorpus::sample_index(SampleRef ref) const {
  if (ref.sentence >= sentence_offsets.size()) return std::nullopt;
  const std::size_t begin = sentence_offsets[ref.sentence];
  const std::size_t end =
      ref.sentence + 1 < sentence_offsets.size() ? sentence_offsets[ref.sentence + 1] : sample_count();
  if (begin + ref.position >= end) return std::nullopt;
  return begin + ref.position;
}

AlignedCorpus AlignedCorpus::select_columns(std::span<const std::size_t> columns) const {
  AlignedCorpus out;
  out.mode = mode;
  out.manifest = manifest;
  out.tag_vocab = tag_vocab;
  out.labels = labels;
  out.word_types = word_types;
  out.refs = refs;
  out.sentence_offsets = sentence_offsets;
  out.features.resize(features.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= feature_dim()) {
      fail(ErrorCode::IndexOutOfRange, "column " + std::to_string(columns[k]) + " outside feature range");
    }
    out.features.col(static_cast<Eigen::Index>(k)) = features.col(static_cast<Eigen::Index>(columns[k]));
  }
  return out;
}

AlignedCorpus align_corpus(const ActivationDataset& ds, const LabelSet& labels) {
  if (ds.sentences.size() != labels.sentence_count()) {
    fail(ErrorCode::SentenceCountMismatch, std::to_string(ds.sentences.size()) +
                                               " activation sentences vs " +
                                               std::to_string(labels.sentence_count()) + " labelled");
  }
  const auto d = static_cast<Eigen::Index>(ds.manifest.neuron_count());
  const bool pair = labels.mode == LabelMode::Pair;

  AlignedCorpus c;
  c.mode = labels.mode;
  c.manifest = ds.manifest;
  c.tag_vocab = labels.tag_vocab;
  const std::size_t n = labels.annotation_count();
  c.features.resize(static_cast<Eigen::Index>(n), pair ? 2 * d : d);
  c.labels.reserve(n);
  c.word_types.reserve(n);
  c.refs.reserve(n);
  c.sentence_offsets.reserve(ds.sentences.size());

  std::size_t mismatched_tokens = 0;
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < ds.sentences.size(); ++s) {
    const Sentence& sent = ds.sentences[s];
    c.sentence_offsets.push_back(static_cast<std::size_t>(row));
    if (!pair) {
      const auto& toks = labels.tokens[s];
      if (toks.size() != sent.tokens.size()) {
        fail(ErrorCode::TokenCountMismatch, "sentence " + std::to_string(s) + ": " +
                                                std::to_string(sent.tokens.size()) +
                                                " activation tokens vs " + std::to_string(toks.size()) +
                                                " labels");
      }
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i] != sent.tokens[i]) {
          if (mismatched_tokens < 5) {
            warn("sentence " + std::to_string(s) + " token " + std::to_string(i) + ": activation '" +
                 sent.tokens[i] + "' vs label '" + toks[i] + "'");
          }
          ++mismatched_tokens;
        }
        c.features.row(row) = sent.activations.row(static_cast<Eigen::Index>(i));
        c.labels.push_back(labels.tags[s][i]);
        c.word_types.push_back(sent.tokens[i]);
        c.refs.push_back({s, i});
        ++row;
      }
    } else {
      const auto& anns = labels.pairs[s];
      for (std::size_t a = 0; a < anns.size(); ++a) {
        const auto& p = anns[a];
        if (p.head >= sent.tokens.size() || p.modifier >= sent.tokens.size()) {
          fail(ErrorCode::IndexOutOfRange, "sentence " + std::to_string(s) + " annotation " +
                                               std::to_string(a) + ": (" + std::to_string(p.head) +
                                               ", " + std::to_string(p.modifier) + ") with " +
                                               std::to_string(sent.tokens.size()) + " tokens");
        }
        c.features.row(row).head(d) = sent.activations.row(static_cast<Eigen::Index>(p.head));
        c.features.row(row).tail(d) = sent.activations.row(static_cast<Eigen::Index>(p.modifier));
        c.labels.push_back(p.tag);
        c.word_types.push_back(sent.tokens[p.head] + "→" + sent.tokens[p.modifier]);
        c.refs.push_back({s, a});
        ++row;
      }
    }
  }
  if (mismatched_tokens > 5) {
    warn(std::to_string(mismatched_tokens) + " token string mismatches in total");
  }
  return c;
}

CorpusSplits load_splits(const fs::path& manifest, const SplitPaths& train, const SplitPaths& dev,
                         const SplitPaths& test, LabelMode mode) {
  LabelSet train_labels = load_labels(train.labels, mode);
  LabelSet dev_labels = load_labels(dev.labels, mode);
  LabelSet test_labels = load_labels(test.labels, mode);
  const LabelSet* sets[] = {&train_labels, &dev_labels, &test_labels};
  const auto vocab = merge_tag_vocab(sets);

  CorpusSplits out;
  out.train = align_corpus(load_activations(train.activations, manifest), train_labels.with_vocab(vocab));
  out.dev = align_corpus(load_activations(dev.activations, manifest), dev_labels.with_vocab(vocab));
  out.test = align_corpus(load_activations(test.activations, manifest), test_labels.with_vocab(vocab));
  return out;
}

// ---------------------------------------------------------------------------

ControlTask ControlTask::fit(const LabelSet& labels, std::uint64_t seed, ControlTaskOptions options) {
  if (labels.mode != LabelMode::Token) {
    fail(ErrorCode::PairModeUnsupported, "control tasks are defined over word types (token mode)");
  }
  ControlTask task;
  task.tag_vocab_ = labels.tag_vocab;
  task.frequencies_.assign(labels.tag_vocab.size(), 0.0);
  task.seed_ = seed;
  task.options_ = options;
  std::size_t total = 0;
  for (std::size_t s = 0; s < labels.tags.size(); ++s) {
    for (std::size_t i = 0; i < labels.tags[s].size(); ++i) {
      task.frequencies_[labels.tags[s][i]] += 1.0;
      task.seen_.push_back(labels.tokens[s][i]);
      ++total;
    }
  }
  if (total == 0) fail(ErrorCode::EmptyFile, "control task needs at least one token");
  for (auto& f : task.frequencies_) f /= static_cast<double>(total);
  std::sort(task.seen_.begin(), task.seen_.end());
  task.seen_.erase(std::unique(task.seen_.begin(), task.seen_.end()), task.seen_.end());
  return task;
}

ControlTask ControlTask::fit(const AlignedCorpus& corpus, std::uint64_t seed, ControlTaskOptions options) {
  if (corpus.mode != LabelMode::Token) {
    fail(ErrorCode::PairModeUnsupported, "control tasks are defined over word types (token mode)");
  }
  LabelSet labels;
  labels.tag_vocab = corpus.tag_vocab;
  labels.tokens.push_back(corpus.word_types);
  labels.tags.push_back(corpus.labels);
  return fit(labels, seed, options);
}

std::size_t ControlTask::assign(const std::string& word_type) const {
  const std::uint64_t h = splitmix64(fnv1a64(word_type) ^ splitmix64(seed_));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (options_.unseen_uniform && !std::binary_search(seen_.begin(), seen_.end(), word_type)) {
    return std::min(static_cast<std::size_t>(u * static_cast<double>(tag_vocab_.size())),
                    tag_vocab_.size() - 1);
  }
  return sample_categorical(frequencies_, u);
}

LabelSet ControlTask::relabel(const LabelSet& labels) const {
  if (labels.mode != LabelMode::Token) {
    fail(ErrorCode::PairModeUnsupported, "control tasks are defined over word types (token mode)");
  }
  LabelSet out = labels;
  out.tag_vocab = tag_vocab_;
  for (std::size_t s = 0; s < out.tags.size(); ++s) {
    for (std::size_t i = 0; i < out.tags[s].size(); ++i) out.tags[s][i] = assign(out.tokens[s][i]);
  }
  return out;
}

AlignedCorpus ControlTask::relabel(const AlignedCorpus& corpus) const {
  if (corpus.mode != LabelMode::Token) {
    fail(ErrorCode::PairModeUnsupported, "control tasks are defined over word types (token mode)");
  }
  if (corpus.tag_vocab != tag_vocab_) {
    fail(ErrorCode::InvalidArgument, "control task and corpus use different tag vocabularies");
  }
  AlignedCorpus out = corpus;
  for (std::size_t i = 0; i < out.labels.size(); ++i) out.labels[i] = assign(out.word_types[i]);
  return out;
}

LabelSet make_control_task(const LabelSet& labels, std::uint64_t seed) {
  return ControlTask::fit(labels, seed).relabel(labels);
}

}  // namespace lca
