#include "lca/lambda_search.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "lca/error.hpp"

namespace lca {

using nlohmann::json;

std::vector<RegularizationConfig> SearchConfig::default_grid() {
  const double values[] = {0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<RegularizationConfig> grid;
  for (double l1 : values) {
    for (double l2 : values) grid.push_back({l1, l2});
  }
  return grid;
}

void SearchConfig::validate() const {
  if (grid.empty()) fail(ErrorCode::EmptyGrid, "search grid is empty");
  for (const auto& reg : grid) reg.validate();
  if (!(mass_fraction_m > 0.0 && mass_fraction_m <= 50.0)) {
    fail(ErrorCode::InvalidArgument, "mass fraction M must be in (0, 50]");
  }
  if (!(weight_alpha >= 0.0) || !(weight_beta >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "score weights must be >= 0");
  }
  ranking.validate();
}

void ScoreInputs::validate() const {
  for (double a : {acc_top, acc_bottom, acc_noreg, acc_lambda}) {
    if (!(a >= 0.0 && a <= 100.0)) fail(ErrorCode::InvalidArgument, "accuracies must be in [0, 100]");
  }
}

double score_lambdas(const ScoreInputs& s, double alpha, double beta) {
  return alpha * (s.acc_top - s.acc_bottom) - beta * (s.acc_noreg - s.acc_lambda);
}

std::size_t select_best_cell(const std::vector<SearchCell>& cells) {
  if (cells.empty()) fail(ErrorCode::EmptyGrid, "no cells to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const auto& a = cells[i];
    const auto& b = cells[best];
    if (a.score != b.score) {
      if (a.score > b.score) best = i;
      continue;
    }
    const double sa = a.reg.lambda1 + a.reg.lambda2;
    const double sb = b.reg.lambda1 + b.reg.lambda2;
    if (sa != sb) {
      if (sa > sb) best = i;
      continue;
    }
    if (a.reg.lambda1 > b.reg.lambda1) best = i;
  }
  return best;
}

namespace {

SearchCell run_cell(const CorpusSplits& splits, const SearchConfig& cfg, const TrainConfig& train_cfg,
                    std::size_t index, double acc_noreg) {
  SearchCell cell;
  cell.grid_index = index;
  cell.reg = cfg.grid[index];
  const LinearProbe probe = train_probe(splits.train, cell.reg, train_cfg);
  const NeuronRanking ranking = extract_ordering(probe, cfg.ranking);
  const std::size_t f = probe.feature_dim();
  const std::size_t k = percent_to_count(cfg.mass_fraction_m, f);
  const auto top = FeatureMask::keep(f, ranking.head(k));
  const auto bottom = FeatureMask::keep(f, ranking.tail(k));
  cell.inputs.acc_top = 100.0 * evaluate_accuracy(probe, splits.dev, &top);
  cell.inputs.acc_bottom = 100.0 * evaluate_accuracy(probe, splits.dev, &bottom);
  cell.inputs.acc_lambda = 100.0 * evaluate_accuracy(probe, splits.dev);
  cell.inputs.acc_noreg = acc_noreg;
  cell.score = score_lambdas(cell.inputs, cfg.weight_alpha, cfg.weight_beta);
  return cell;
}

}  // namespace

SearchResult grid_search(const CorpusSplits& splits, const SearchConfig& cfg, const TrainConfig& train_cfg) {
  cfg.validate();
  train_cfg.validate();
  if (splits.train.sample_count() == 0 || splits.dev.sample_count() == 0 || splits.test.sample_count() == 0) {
    fail(ErrorCode::InvalidArgument, "grid search needs non-empty train/dev/test splits");
  }

  SearchResult result;
  const LinearProbe noreg = train_probe(splits.train, RegularizationConfig{}, train_cfg);
  result.acc_noreg = 100.0 * evaluate_accuracy(noreg, splits.dev);

  const std::size_t n = cfg.grid.size();
  result.cells.resize(n);
  const std::size_t workers = std::clamp<std::size_t>(cfg.jobs, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) result.cells[i] = run_cell(splits, cfg, train_cfg, i, result.acc_noreg);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            result.cells[i] = run_cell(splits, cfg, train_cfg, i, result.acc_noreg);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  result.best_index = select_best_cell(result.cells);
  result.best = result.cells[result.best_index].reg;
  return result;
}

json to_json(const SearchCell& c) {
  return {{"lambda1", c.reg.lambda1},         {"lambda2", c.reg.lambda2},
          {"acc_top", c.inputs.acc_top},       {"acc_bottom", c.inputs.acc_bottom},
          {"acc_lambda", c.inputs.acc_lambda}, {"acc_noreg", c.inputs.acc_noreg},
          {"score", c.score}};
}

json to_json(const SearchResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return {{"cells", std::move(cells)}, {"best", to_json(r.cells.at(r.best_index))}, {"acc_noreg", r.acc_noreg}};
}

SearchResult search_result_from_json(const json& j) {
  try {
    SearchResult r;
    r.acc_noreg = j.at("acc_noreg").get<double>();
    for (const auto& c : j.at("cells")) {
      SearchCell cell;
      cell.grid_index = r.cells.size();
      cell.reg = regularization_from_json(c);
      cell.inputs.acc_top = c.at("acc_top").get<double>();
      cell.inputs.acc_bottom = c.at("acc_bottom").get<double>();
      cell.inputs.acc_lambda = c.at("acc_lambda").get<double>();
      cell.inputs.acc_noreg = c.at("acc_noreg").get<double>();
      cell.score = c.at("score").get<double>();
      r.cells.push_back(cell);
    }
    r.best_index = select_best_cell(r.cells);
    r.best = r.cells[r.best_index].reg;
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedRecord, std::string("search report: ") + e.what());
  }
}

}  // namespace lca
