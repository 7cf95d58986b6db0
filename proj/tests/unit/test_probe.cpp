#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "lca/probe.hpp"
#include "lca/synthetic.hpp"
#include "oracles.hpp"

using namespace lca;
using fixtures::error_code;

namespace {

AlignedCorpus separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  Matrix x(static_cast<Eigen::Index>(n), 4);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 3;
    for (Eigen::Index c = 0; c < 4; ++c) x(static_cast<Eigen::Index>(i), c) = noise(gen);
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])) += 3.0;
  }
  return fixtures::corpus(x, y, 3, 2);
}

TrainConfig fast(std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = 20;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.05;
  return cfg;
}

std::vector<std::vector<double>> rows(const Matrix& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)].assign(m.row(r).data(), m.row(r).data() + m.cols());
  return out;
}

}  // namespace

TEST_CASE("zero probe predicts uniformly and breaks ties to tag 0") {
  const LinearProbe probe = LinearProbe::zeros({"a", "b", "c"}, 5);
  const std::vector<double> z = {1.0, -2.0, 3.0, 0.5, 7.0};
  const Prediction p = predict_tag(probe, z);
  CHECK(p.tag == 0);
  for (Eigen::Index t = 0; t < 3; ++t) CHECK(p.probabilities(t) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("predict_tag follows the dominant row") {
  for (std::size_t dominant = 0; dominant < 4; ++dominant) {
    LinearProbe probe = LinearProbe::zeros({"a", "b", "c", "d"}, 3);
    probe.theta(static_cast<Eigen::Index>(dominant), 1) = 2.0;
    const std::vector<double> z = {0.0, 1.0, 0.0};
    const Prediction p = predict_tag(probe, z);
    CHECK(p.tag == dominant);
    CHECK(p.probabilities.sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("full mask equals no mask and masking equals zeroed columns") {
  const AlignedCorpus c = separable(300, 2);
  const LinearProbe probe = train_probe(c, {}, fast());
  const FeatureMask all = FeatureMask::all(c.feature_dim());
  CHECK(predict_corpus(probe, c, &all) == predict_corpus(probe, c));

  const std::vector<std::size_t> keep = {0, 2};
  const FeatureMask mask = FeatureMask::keep(4, keep);
  CHECK(mask.size() == 2);
  AlignedCorpus zeroed = c;
  zeroed.features.col(1).setZero();
  zeroed.features.col(3).setZero();
  for (std::size_t i = 0; i < c.sample_count(); ++i) {
    const auto row = c.features.row(static_cast<Eigen::Index>(i));
    const auto zrow = zeroed.features.row(static_cast<Eigen::Index>(i));
    const Prediction a = predict_tag(probe, {row.data(), 4}, &mask);
    const Prediction b = predict_tag(probe, {zrow.data(), 4});
    CHECK(a.tag == b.tag);
    CHECK(a.probabilities == b.probabilities);
  }
}

TEST_CASE("empty mask predicts the zero-input class for every sample") {
  const AlignedCorpus c = separable(300, 3);
  const LinearProbe probe = train_probe(c, {}, fast());
  const std::vector<double> zero(4, 0.0);
  const std::size_t constant = predict_tag(probe, zero).tag;
  const FeatureMask none = FeatureMask::none(4);
  std::size_t hits = 0;
  for (std::size_t y : c.labels) hits += y == constant;
  CHECK(evaluate_accuracy(probe, c, &none) == doctest::Approx(static_cast<double>(hits) / c.sample_count()));
}

TEST_CASE("loss of a zero probe over two tags is ln 2") {
  const LinearProbe probe = LinearProbe::zeros({"a", "b"}, 3);
  Matrix x(4, 3);
  x << 1, 2, 3, -1, 0, 4, 2, 2, 2, 0, 0, 1;
  const std::vector<std::size_t> y = {0, 1, 1, 0};
  const LossGradient g = loss_and_gradient(probe, x, y, {});
  CHECK(g.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("L1 penalty and its subgradient") {
  LinearProbe probe = LinearProbe::zeros({"a", "b"}, 3);
  probe.theta << 0.5, -0.25, 0.0, 0.0, 0.25, 0.0;
  const Matrix x = Matrix::Zero(2, 3);
  const std::vector<std::size_t> y = {0, 1};
  const LossGradient g = loss_and_gradient(probe, x, y, {1.0, 0.0});
  CHECK(g.loss - std::log(2.0) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix expected(2, 3);
  expected << 1, -1, 0, 0, 1, 0;
  CHECK(g.grad_theta == expected);

  const LossGradient g2 = loss_and_gradient(probe, x, y, {0.0, 2.0});
  CHECK(g2.loss - std::log(2.0) == doctest::Approx(2.0 * (0.25 + 0.0625 + 0.0625)));
  CHECK(g2.grad_theta(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("loss matches an independent long-double evaluation") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  LinearProbe probe = LinearProbe::zeros({"a", "b", "c"}, 4);
  for (Eigen::Index i = 0; i < probe.theta.size(); ++i) probe.theta.data()[i] = normal(gen);
  for (Eigen::Index t = 0; t < 3; ++t) probe.bias(t) = normal(gen);
  Matrix x(6, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(gen);
  const std::vector<std::size_t> y = {0, 1, 2, 2, 1, 0};
  const LossGradient g = loss_and_gradient(probe, x, y, {0.1, 0.05});
  const std::vector<double> bias(probe.bias.data(), probe.bias.data() + 3);
  const long double ref = oracle::elastic_net_loss(rows(probe.theta), bias, rows(x), y, 0.1, 0.05);
  CHECK(g.loss == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}

TEST_CASE("gradient agrees with central finite differences on a 5x4 problem") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  LinearProbe probe = LinearProbe::zeros({"a", "b", "c"}, 4);
  for (Eigen::Index i = 0; i < probe.theta.size(); ++i) probe.theta.data()[i] = normal(gen);
  Matrix x(5, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(gen);
  const std::vector<std::size_t> y = {0, 1, 2, 0, 1};
  const RegularizationConfig reg{0.01, 0.02};
  const LossGradient g = loss_and_gradient(probe, x, y, reg);
  const std::vector<double> bias(3, 0.0);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < probe.theta.size(); ++i) {
    LinearProbe plus = probe, minus = probe;
    plus.theta.data()[i] += h;
    minus.theta.data()[i] -= h;
    const long double lp = oracle::elastic_net_loss(rows(plus.theta), bias, rows(x), y, reg.lambda1, reg.lambda2);
    const long double lm = oracle::elastic_net_loss(rows(minus.theta), bias, rows(x), y, reg.lambda1, reg.lambda2);
    const double numeric = static_cast<double>((lp - lm) / (2 * h));
    CHECK(g.grad_theta.data()[i] == doctest::Approx(numeric).epsilon(1e-6));
  }
  for (Eigen::Index t = 0; t < 3; ++t) {
    LinearProbe plus = probe, minus = probe;
    plus.bias(t) += h;
    minus.bias(t) -= h;
    auto loss = [&](const LinearProbe& p) {
      const std::vector<double> b(p.bias.data(), p.bias.data() + 3);
      return oracle::elastic_net_loss(rows(p.theta), b, rows(x), y, reg.lambda1, reg.lambda2);
    };
    CHECK(g.grad_bias(t) == doctest::Approx(static_cast<double>((loss(plus) - loss(minus)) / (2 * h))).epsilon(1e-6));
  }
}

TEST_CASE("training on a separable corpus") {
  const AlignedCorpus train = separable(600, 11);
  const AlignedCorpus test = separable(300, 12);
  const LinearProbe probe = train_probe(train, {}, fast());
  CHECK(evaluate_accuracy(probe, test) >= 0.95);

  const LinearProbe again = train_probe(train, {}, fast());
  CHECK(again.theta == probe.theta);
  CHECK(again.bias == probe.bias);

  const LinearProbe other = train_probe(train, {}, fast(2));
  CHECK(other.theta != probe.theta);
}

TEST_CASE("training lowers the objective below the zero probe") {
  const AlignedCorpus train = separable(400, 13);
  const RegularizationConfig reg{0.001, 0.001};
  const LinearProbe probe = train_probe(train, reg, fast());
  const LinearProbe zero = LinearProbe::zeros(train.tag_vocab, 4);
  CHECK(loss_and_gradient(probe, train.features, train.labels, reg).loss <
        loss_and_gradient(zero, train.features, train.labels, reg).loss);
}

TEST_CASE("strong L1 shrinks the weights") {
  const AlignedCorpus train = separable(400, 14);
  const LinearProbe loose = train_probe(train, {}, fast());
  const LinearProbe tight = train_probe(train, {10.0, 0.0}, fast());
  CHECK(tight.theta.cwiseAbs().sum() < 0.1 * loose.theta.cwiseAbs().sum());
}

TEST_CASE("standardization fits on train and applies to prediction") {
  AlignedCorpus train = separable(400, 15);
  train.features *= 1000.0;
  TrainConfig cfg = fast();
  cfg.standardize = true;
  const LinearProbe probe = train_probe(train, {}, cfg);
  CHECK(probe.standardized());
  CHECK(probe.feature_mean.size() == 4);
  CHECK(evaluate_accuracy(probe, train) >= 0.95);
}

TEST_CASE("training without bias keeps the bias at zero") {
  TrainConfig cfg = fast();
  cfg.use_bias = false;
  const LinearProbe probe = train_probe(separable(300, 16), {}, cfg);
  CHECK(probe.bias.isZero());
}

TEST_CASE("training rejects degenerate inputs") {
  AlignedCorpus c = separable(30, 17);
  std::fill(c.labels.begin(), c.labels.end(), 1);
  CHECK(error_code([&] { train_probe(c, {}, fast()); }) == ErrorCode::SingleClassCorpus);
  CHECK(error_code([&] { train_probe(separable(30, 17), {-1.0, 0.0}, fast()); }) == ErrorCode::InvalidArgument);
  TrainConfig bad = fast();
  bad.batch_size = 0;
  CHECK(error_code([&] { train_probe(separable(30, 17), {}, bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("prediction checks widths") {
  const LinearProbe probe = LinearProbe::zeros({"a", "b"}, 3);
  const std::vector<double> z = {1.0, 2.0};
  CHECK(error_code([&] { predict_tag(probe, z); }) == ErrorCode::DimensionMismatch);
  const FeatureMask mask = FeatureMask::all(4);
  const std::vector<double> z3 = {1.0, 2.0, 3.0};
  CHECK(error_code([&] { predict_tag(probe, z3, &mask); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("probe JSON round trip is exact") {
  TrainConfig cfg = fast();
  cfg.standardize = true;
  const LinearProbe probe = train_probe(separable(200, 18), {0.001, 0.002}, cfg);
  fixtures::TempDir dir;
  save_probe(probe, dir / "p.json");
  const LinearProbe back = load_probe(dir / "p.json");
  CHECK(back.tag_vocab == probe.tag_vocab);
  CHECK(back.theta == probe.theta);
  CHECK(back.bias == probe.bias);
  CHECK(back.feature_mean == probe.feature_mean);
  CHECK(back.feature_scale == probe.feature_scale);
  CHECK(back.reg == probe.reg);
  CHECK(back.train_config.seed == probe.train_config.seed);

  CHECK(error_code([&] { load_probe(dir / "missing.json"); }) == ErrorCode::MissingProbe);
  fixtures::write_file(dir / "bad.json", "{\"theta\": 3}");
  CHECK(error_code([&] { load_probe(dir / "bad.json"); }) == ErrorCode::MalformedRecord);
}

TEST_CASE("planted corpus trains to high accuracy") {
  const PlantedCorpus planted = make_planted_corpus(fixtures::small_planted(4));
  const CorpusSplits splits = planted.align();
  const LinearProbe probe = train_probe(splits.train, {}, fast());
  CHECK(evaluate_accuracy(probe, splits.test) >= 0.8);
}
