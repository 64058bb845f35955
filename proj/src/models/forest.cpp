#include "splag/models/forest.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

RandomForest::RandomForest(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                           std::vector<RegressionTree> trees)
    : Model(LearnerKind::rf, task, seed, std::move(manifest)), trees_(std::move(trees)) {
  if (trees_.empty()) throw Error("random forest needs at least one tree");
}

std::vector<double> RandomForest::predict_columns(const ColumnViews& cols, std::size_t rows) const {
  std::vector<double> out(rows, 0.0);
  const double b = static_cast<double>(trees_.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    if (task() == Task::regression) {
      for (const auto& t : trees_) acc += t.predict(cols, r);
    } else {
      for (const auto& t : trees_) acc += t.predict(cols, r) > 0.5 ? 1.0 : 0.0;
    }
    out[r] = acc / b;
  }
  return out;
}

std::vector<double> RandomForest::raw_importance(const FeatureMatrix*, std::span<const double>) const {
  std::vector<double> imp(manifest().size(), 0.0);
  for (const auto& t : trees_) t.accumulate_gain(imp);
  return imp;
}

nlohmann::json RandomForest::parameters() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"trees", std::move(trees)}};
}

TrainedModel RandomForest::from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                           const nlohmann::json& params) {
  std::vector<RegressionTree> trees;
  for (const auto& t : params.at("trees")) trees.push_back(RegressionTree::from_json(t));
  return std::make_shared<RandomForest>(task, seed, std::move(manifest), std::move(trees));
}

RfConfig resolve_rf_config(const RfConfig& cfg, Task task, std::size_t columns) {
  RfConfig out = cfg;
  const double p = static_cast<double>(std::max<std::size_t>(columns, 1));
  if (out.m_try <= 0) {
    out.m_try = task == Task::classification ? static_cast<int>(std::ceil(std::sqrt(p)))
                                             : static_cast<int>(std::ceil(p / 3.0));
  }
  if (out.min_node <= 0) out.min_node = task == Task::classification ? 1 : 5;
  return out;
}

TrainedModel fit_random_forest(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg) {
  const std::size_t n = X.rows();
  if (n == 0) throw Error("random forest: no training rows");
  RfConfig rf = resolve_rf_config(cfg.rf, cfg.task, X.cols());

  ColumnViews cols;
  for (std::size_t c = 0; c < X.cols(); ++c) cols.push_back(X.column(c));
  BinnedMatrix binned(cols, n);

  TreeParams params;
  params.min_node = static_cast<std::size_t>(rf.min_node);
  params.max_depth = static_cast<std::size_t>(std::max(rf.max_depth, 0));
  params.m_try = static_cast<std::size_t>(rf.m_try);
  const std::size_t sample_size =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rf.bootstrap_fraction * static_cast<double>(n))));

  std::vector<RegressionTree> trees(static_cast<std::size_t>(rf.trees));
  parallel_for(
      trees.size(),
      [&](std::size_t b) {
        std::mt19937_64 rng(mix_seed(cfg.seed, b));
        std::vector<std::uint32_t> rows;
        if (rf.bootstrap) {
          rows.resize(sample_size);
          std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
          for (auto& r : rows) r = pick(rng);
        } else {
          rows.resize(n);
          std::iota(rows.begin(), rows.end(), 0u);
        }
        TreeParams local = params;
        local.min_node = std::min(local.min_node, rows.size());
        trees[b] = fit_regression_tree(binned, y, rows, local, rng);
      },
      cfg.threads);
  return std::make_shared<RandomForest>(cfg.task, cfg.seed, X.names(), std::move(trees));
}

}  // namespace splag
