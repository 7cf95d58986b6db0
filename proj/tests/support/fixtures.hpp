#pragma once

#include <atomic>
#include <functional>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lca/dataset.hpp"
#include "lca/error.hpp"
#include "lca/log.hpp"
#include "lca/synthetic.hpp"

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("lca_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string manifest_json(std::size_t layers, std::size_t hidden) {
  return "{\"num_layers\": " + std::to_string(layers) + ", \"hidden_size\": " + std::to_string(hidden) +
         ", \"model_name\": \"test\", \"aggregation\": \"last\", \"dtype\": \"f32\"}";
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = lca::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { lca::set_warning_sink(previous_); }

  std::vector<std::string> messages;

 private:
  lca::WarningSink previous_;
};

/// Token-mode dataset from explicit rows; tokens are "w<sentence>_<i>"
/// unless given.
inline lca::ActivationDataset dataset(std::size_t layers, std::size_t hidden,
                                      const std::vector<std::vector<std::vector<double>>>& sentences,
                                      const std::vector<std::vector<std::string>>& tokens = {}) {
  lca::ActivationDataset ds;
  ds.manifest.num_layers = layers;
  ds.manifest.hidden_size = hidden;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    lca::Sentence sent;
    sent.id = static_cast<std::int64_t>(s);
    const auto& rows = sentences[s];
    sent.activations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(layers * hidden));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        sent.activations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      sent.tokens.push_back(tokens.empty() ? "w" + std::to_string(s) + "_" + std::to_string(r) : tokens[s][r]);
    }
    ds.sentences.push_back(std::move(sent));
  }
  return ds;
}

/// Token-mode corpus straight from a feature matrix; tags are "t0".."t{k-1}".
inline lca::AlignedCorpus corpus(const lca::Matrix& features, const std::vector<std::size_t>& labels,
                                 std::size_t tag_count, std::size_t layers = 1) {
  lca::AlignedCorpus c;
  c.manifest.num_layers = layers;
  c.manifest.hidden_size = static_cast<std::size_t>(features.cols()) / layers;
  for (std::size_t t = 0; t < tag_count; ++t) c.tag_vocab.push_back("t" + std::to_string(t));
  c.features = features;
  c.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c.word_types.push_back("w" + std::to_string(i));
    c.refs.push_back({i, 0});
    c.sentence_offsets.push_back(i);
  }
  return c;
}

/// Code of the lca::Error thrown by `fn`, or nullopt if nothing was thrown.
inline std::optional<lca::ErrorCode> error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const lca::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline lca::PlantedCorpusConfig small_planted(std::uint64_t seed, std::size_t signals = 3) {
  lca::PlantedCorpusConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_size = 10;
  cfg.num_tags = 3;
  cfg.num_signals = signals;
  cfg.train_tokens = 3000;
  cfg.dev_tokens = 500;
  cfg.test_tokens = 500;
  cfg.seed = seed;
  return cfg;
}

}  // namespace fixtures
