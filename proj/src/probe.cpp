#include "lca/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lca/error.hpp"
#include "lca/random.hpp"

namespace lca {

using nlohmann::json;

void RegularizationConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2)) {
    fail(ErrorCode::InvalidArgument, "regularization coefficients must be finite and >= 0");
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (epochs == 0) fail(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    fail(ErrorCode::InvalidArgument, "invalid Adam parameters");
  }
}

FeatureMask FeatureMask::keep(std::size_t feature_dim, std::span<const std::size_t> indices) {
  FeatureMask m;
  m.keep_.assign(feature_dim, 0);
  for (std::size_t i : indices) {
    if (i >= feature_dim) {
      fail(ErrorCode::IndexOutOfRange,
           "mask index " + std::to_string(i) + " outside [0, " + std::to_string(feature_dim) + ")");
    }
    m.keep_[i] = 1;
  }
  return m;
}

FeatureMask FeatureMask::all(std::size_t feature_dim) {
  FeatureMask m;
  m.keep_.assign(feature_dim, 1);
  return m;
}

FeatureMask FeatureMask::none(std::size_t feature_dim) {
  FeatureMask m;
  m.keep_.assign(feature_dim, 0);
  return m;
}

std::size_t FeatureMask::size() const noexcept {
  return static_cast<std::size_t>(std::count(keep_.begin(), keep_.end(), char{1}));
}

LinearProbe LinearProbe::zeros(std::vector<std::string> tags, std::size_t feature_dim, bool use_bias) {
  LinearProbe p;
  const auto t = static_cast<Eigen::Index>(tags.size());
  p.tag_vocab = std::move(tags);
  p.theta = Matrix::Zero(t, static_cast<Eigen::Index>(feature_dim));
  p.bias = Vector::Zero(t);
  p.use_bias = use_bias;
  return p;
}

namespace {

/// Applies the probe's input transform (standardization) and the mask.
Matrix prepare_inputs(const LinearProbe& probe, const Eigen::Ref<const Matrix>& x, const FeatureMask* mask) {
  Matrix z = x;
  if (probe.standardized()) {
    z.rowwise() -= probe.feature_mean.transpose();
    z.array().rowwise() *= probe.feature_scale.transpose().array();
  }
  if (mask != nullptr) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (!mask->contains(static_cast<std::size_t>(c))) z.col(c).setZero();
    }
  }
  return z;
}

void check_dims(const LinearProbe& probe, std::size_t feature_dim, const FeatureMask* mask) {
  if (feature_dim != probe.feature_dim()) {
    fail(ErrorCode::DimensionMismatch, "features have width " + std::to_string(feature_dim) +
                                           ", probe expects " + std::to_string(probe.feature_dim()));
  }
  if (mask != nullptr && mask->feature_dim() != probe.feature_dim()) {
    fail(ErrorCode::DimensionMismatch, "mask width " + std::to_string(mask->feature_dim()) +
                                           " does not match probe width " +
                                           std::to_string(probe.feature_dim()));
  }
}

Matrix logits_of(const LinearProbe& probe, const Matrix& z) {
  Matrix logits = z * probe.theta.transpose();
  if (probe.use_bias) logits.rowwise() += probe.bias.transpose();
  return logits;
}

/// Row-wise softmax in place.
void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

std::size_t argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = c;
  }
  return static_cast<std::size_t>(best);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Loss and gradient on inputs already passed through prepare_inputs.
LossGradient loss_and_gradient_prepared(const LinearProbe& probe, const Eigen::Ref<const Matrix>& z,
                                        std::span<const std::size_t> labels,
                                        const RegularizationConfig& reg) {
  const auto n = z.rows();
  Matrix p = z * probe.theta.transpose();
  if (probe.use_bias) p.rowwise() += probe.bias.transpose();

  double ce = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    auto row = p.row(r);
    const double mx = row.maxCoeff();
    row.array() -= mx;
    const double log_norm = std::log(row.array().exp().sum());
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]);
    ce -= row(y) - log_norm;
    row = (row.array() - log_norm).exp().matrix();
    row(y) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  LossGradient out;
  out.grad_theta = (p.transpose() * z) * inv_n;
  if (probe.use_bias) {
    out.grad_bias = p.colwise().sum().transpose() * inv_n;
  } else {
    out.grad_bias = Vector::Zero(probe.theta.rows());
  }

  double penalty = 0.0;
  if (reg.lambda1 != 0.0) {
    penalty += reg.lambda1 * probe.theta.cwiseAbs().sum();
    out.grad_theta += reg.lambda1 * probe.theta.unaryExpr([](double v) { return sign(v); });
  }
  if (reg.lambda2 != 0.0) {
    penalty += reg.lambda2 * probe.theta.squaredNorm();
    out.grad_theta += (2.0 * reg.lambda2) * probe.theta;
  }
  out.loss = ce * inv_n + penalty;
  return out;
}

}  // namespace

Prediction predict_tag(const LinearProbe& probe, std::span<const double> features, const FeatureMask* mask) {
  check_dims(probe, features.size(), mask);
  for (double v : features) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "non-finite feature passed to predict_tag");
  }
  Matrix x(1, static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = features[i];
  Matrix logits = logits_of(probe, prepare_inputs(probe, x, mask));
  Prediction out;
  out.tag = argmax_row(logits, 0);
  softmax_rows(logits);
  out.probabilities = logits.row(0).transpose();
  return out;
}

LossGradient loss_and_gradient(const LinearProbe& probe, const Eigen::Ref<const Matrix>& features,
                               std::span<const std::size_t> labels, const RegularizationConfig& reg) {
  if (features.rows() == 0) fail(ErrorCode::InvalidArgument, "empty batch");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    fail(ErrorCode::DimensionMismatch, "batch rows and labels differ in length");
  }
  check_dims(probe, static_cast<std::size_t>(features.cols()), nullptr);
  return loss_and_gradient_prepared(probe, prepare_inputs(probe, features, nullptr), labels, reg);
}

LinearProbe train_probe(const AlignedCorpus& corpus, const RegularizationConfig& reg, const TrainConfig& cfg) {
  reg.validate();
  cfg.validate();
  const std::size_t n = corpus.sample_count();
  if (n == 0) fail(ErrorCode::InvalidArgument, "cannot train on an empty corpus");
  if (corpus.tag_count() < 2) fail(ErrorCode::SingleClassCorpus, "tag vocabulary has fewer than 2 tags");
  {
    std::vector<char> present(corpus.tag_count(), 0);
    for (std::size_t y : corpus.labels) present[y] = 1;
    if (std::count(present.begin(), present.end(), char{1}) < 2) {
      fail(ErrorCode::SingleClassCorpus, "training labels contain a single class");
    }
  }

  LinearProbe probe = LinearProbe::zeros(corpus.tag_vocab, corpus.feature_dim(), cfg.use_bias);
  probe.reg = reg;
  probe.train_config = cfg;
  if (cfg.standardize) {
    probe.feature_mean = corpus.features.colwise().mean().transpose();
    Vector var = (corpus.features.rowwise() - probe.feature_mean.transpose()).colwise().squaredNorm().transpose() /
                 static_cast<double>(n);
    probe.feature_scale = var.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
  }
  const Matrix inputs = prepare_inputs(probe, corpus.features, nullptr);

  const auto t = probe.theta.rows();
  const auto f = probe.theta.cols();
  Matrix m_theta = Matrix::Zero(t, f);
  Matrix v_theta = Matrix::Zero(t, f);
  Vector m_bias = Vector::Zero(t);
  Vector v_bias = Vector::Zero(t);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix batch;
  std::vector<std::size_t> batch_labels;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      batch.resize(static_cast<Eigen::Index>(end - start), f);
      batch_labels.resize(end - start);
      for (std::size_t k = start; k < end; ++k) {
        batch.row(static_cast<Eigen::Index>(k - start)) = inputs.row(static_cast<Eigen::Index>(order[k]));
        batch_labels[k - start] = corpus.labels[order[k]];
      }
      const LossGradient g = loss_and_gradient_prepared(probe, batch, batch_labels, reg);

      beta1_t *= cfg.beta1;
      beta2_t *= cfg.beta2;
      const double c1 = 1.0 - beta1_t;
      const double c2 = 1.0 - beta2_t;
      m_theta = cfg.beta1 * m_theta + (1.0 - cfg.beta1) * g.grad_theta;
      v_theta = cfg.beta2 * v_theta + (1.0 - cfg.beta2) * g.grad_theta.cwiseProduct(g.grad_theta);
      probe.theta.array() -=
          cfg.learning_rate * (m_theta.array() / c1) / ((v_theta.array() / c2).sqrt() + cfg.epsilon);
      if (cfg.use_bias) {
        m_bias = cfg.beta1 * m_bias + (1.0 - cfg.beta1) * g.grad_bias;
        v_bias = cfg.beta2 * v_bias + (1.0 - cfg.beta2) * g.grad_bias.cwiseProduct(g.grad_bias);
        probe.bias.array() -=
            cfg.learning_rate * (m_bias.array() / c1) / ((v_bias.array() / c2).sqrt() + cfg.epsilon);
      }
    }
  }
  if (!probe.theta.allFinite()) fail(ErrorCode::NonFiniteValue, "training diverged");
  return probe;
}

std::vector<std::size_t> predict_corpus(const LinearProbe& probe, const AlignedCorpus& corpus,
                                        const FeatureMask* mask) {
  check_dims(probe, corpus.feature_dim(), mask);
  constexpr Eigen::Index kChunk = 4096;
  std::vector<std::size_t> out;
  out.reserve(corpus.sample_count());
  const auto n = corpus.features.rows();
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const auto rows = std::min(kChunk, n - start);
    const Matrix logits = logits_of(probe, prepare_inputs(probe, corpus.features.middleRows(start, rows), mask));
    for (Eigen::Index r = 0; r < rows; ++r) out.push_back(argmax_row(logits, r));
  }
  return out;
}

double evaluate_accuracy(const LinearProbe& probe, const AlignedCorpus& corpus, const FeatureMask* mask) {
  if (corpus.sample_count() == 0) fail(ErrorCode::InvalidArgument, "cannot evaluate on an empty corpus");
  const auto predicted = predict_corpus(probe, corpus, mask);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == corpus.labels[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------

namespace {

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

}  // namespace

json to_json(const RegularizationConfig& reg) { return {{"lambda1", reg.lambda1}, {"lambda2", reg.lambda2}}; }

json to_json(const TrainConfig& cfg) {
  return {{"batch_size", cfg.batch_size}, {"epochs", cfg.epochs},   {"learning_rate", cfg.learning_rate},
          {"seed", cfg.seed},             {"use_bias", cfg.use_bias}, {"standardize", cfg.standardize},
          {"optimizer", "adam"},          {"beta1", cfg.beta1},     {"beta2", cfg.beta2},
          {"epsilon", cfg.epsilon}};
}

json to_json(const LinearProbe& probe) {
  json theta = json::array();
  for (Eigen::Index r = 0; r < probe.theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < probe.theta.cols(); ++c) theta.push_back(probe.theta(r, c));
  }
  json j = {{"tag_vocab", probe.tag_vocab},
            {"feature_dim", probe.feature_dim()},
            {"use_bias", probe.use_bias},
            {"theta", std::move(theta)},
            {"bias", vector_json(probe.bias)},
            {"reg", to_json(probe.reg)},
            {"train_config", to_json(probe.train_config)},
            {"seed", probe.train_config.seed}};
  if (probe.standardized()) {
    j["standardization"] = {{"mean", vector_json(probe.feature_mean)},
                            {"scale", vector_json(probe.feature_scale)}};
  }
  return j;
}

RegularizationConfig regularization_from_json(const json& j) {
  RegularizationConfig reg;
  reg.lambda1 = j.at("lambda1").get<double>();
  reg.lambda2 = j.at("lambda2").get<double>();
  reg.validate();
  return reg;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.use_bias = j.value("use_bias", cfg.use_bias);
  cfg.standardize = j.value("standardize", cfg.standardize);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.validate();
  return cfg;
}

LinearProbe probe_from_json(const json& j) {
  try {
    LinearProbe p;
    p.tag_vocab = j.at("tag_vocab").get<std::vector<std::string>>();
    const auto f = j.at("feature_dim").get<std::size_t>();
    const auto t = p.tag_vocab.size();
    p.use_bias = j.value("use_bias", true);
    const auto& theta = j.at("theta");
    if (theta.size() != t * f) {
      fail(ErrorCode::DimensionMismatch, "theta has " + std::to_string(theta.size()) + " entries, expected " +
                                             std::to_string(t * f));
    }
    p.theta.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      p.theta(static_cast<Eigen::Index>(i / f), static_cast<Eigen::Index>(i % f)) = theta[i].get<double>();
    }
    p.bias = j.contains("bias") ? vector_from_json(j["bias"]) : Vector::Zero(static_cast<Eigen::Index>(t));
    if (static_cast<std::size_t>(p.bias.size()) != t) fail(ErrorCode::DimensionMismatch, "bias length mismatch");
    if (j.contains("reg")) p.reg = regularization_from_json(j["reg"]);
    if (j.contains("train_config")) p.train_config = train_config_from_json(j["train_config"]);
    if (j.contains("standardization")) {
      p.feature_mean = vector_from_json(j["standardization"].at("mean"));
      p.feature_scale = vector_from_json(j["standardization"].at("scale"));
      if (static_cast<std::size_t>(p.feature_mean.size()) != f ||
          static_cast<std::size_t>(p.feature_scale.size()) != f) {
        fail(ErrorCode::DimensionMismatch, "standardization length mismatch");
      }
    }
    if (!p.theta.allFinite() || !p.bias.allFinite()) fail(ErrorCode::NonFiniteValue, "probe weights not finite");
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, std::string("probe: ") + e.what());
  }
}

void save_probe(const LinearProbe& probe, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(probe).dump() << '\n';
}

LinearProbe load_probe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingProbe, "no trained probe at " + path.string());
  try {
    return probe_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
}

}  // namespace lca
