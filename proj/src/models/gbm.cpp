#include "splag/models/gbm.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

namespace {

constexpr double kProbFloor = 1e-15;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double mean_loss(Task task, std::span<const double> y, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (task == Task::regression) {
      double d = y[i] - f[i];
      acc += d * d;
    } else {
      double p = clamp_prob(sigmoid(f[i]));
      acc += -2.0 * (y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
  }
  return acc / static_cast<double>(y.size());
}

}  // namespace

double binomial_initial_value(std::span<const double> y) {
  if (y.empty()) throw Error("binomial initial value of an empty sample");
  double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  mean = std::clamp(mean, 1e-12, 1.0 - 1e-12);
  return std::log(mean / (1.0 - mean));
}

GradientBoosting::GradientBoosting(Task task, std::uint64_t seed, std::vector<std::string> manifest, double f0,
                                   double learning_rate, std::vector<RegressionTree> trees,
                                   std::vector<double> loss_history)
    : Model(LearnerKind::gbm, task, seed, std::move(manifest)),
      f0_(f0),
      learning_rate_(learning_rate),
      trees_(std::move(trees)),
      loss_history_(std::move(loss_history)) {}

std::vector<double> GradientBoosting::decision_function(const ColumnViews& cols, std::size_t rows) const {
  std::vector<double> f(rows, f0_);
  for (const auto& t : trees_) {
    for (std::size_t r = 0; r < rows; ++r) f[r] += learning_rate_ * t.predict(cols, r);
  }
  return f;
}

std::vector<double> GradientBoosting::predict_columns(const ColumnViews& cols, std::size_t rows) const {
  auto f = decision_function(cols, rows);
  if (task() == Task::classification) {
    for (double& v : f) v = clamp_prob(sigmoid(v));
  }
  return f;
}

std::vector<double> GradientBoosting::raw_importance(const FeatureMatrix*, std::span<const double>) const {
  std::vector<double> imp(manifest().size(), 0.0);
  for (const auto& t : trees_) t.accumulate_gain(imp);
  return imp;
}

nlohmann::json GradientBoosting::parameters() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"f0", f0_}, {"learning_rate", learning_rate_}, {"trees", std::move(trees)}, {"loss_history", loss_history_}};
}

TrainedModel GradientBoosting::from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                               const nlohmann::json& params) {
  std::vector<RegressionTree> trees;
  for (const auto& t : params.at("trees")) trees.push_back(RegressionTree::from_json(t));
  return std::make_shared<GradientBoosting>(task, seed, std::move(manifest), params.at("f0").get<double>(),
                                            params.at("learning_rate").get<double>(), std::move(trees),
                                            params.at("loss_history").get<std::vector<double>>());
}

TrainedModel fit_gbm(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg) {
  const std::size_t n = X.rows();
  if (n == 0) throw Error("gbm: no training rows");
  const GbmConfig& g = cfg.gbm;
  ColumnViews cols;
  for (std::size_t c = 0; c < X.cols(); ++c) cols.push_back(X.column(c));
  BinnedMatrix binned(cols, n);

  TreeParams params;
  params.min_node = std::min<std::size_t>(static_cast<std::size_t>(g.min_node), n);
  params.max_depth = static_cast<std::size_t>(g.max_depth);
  params.m_try = 0;

  const bool binomial = cfg.task == Task::classification;
  const double f0 = binomial ? binomial_initial_value(y)
                             : std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> f(n, f0), residual(n), prob(n);
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  std::mt19937_64 rng(cfg.seed);

  std::vector<RegressionTree> trees;
  std::vector<double> history{mean_loss(cfg.task, y, f)};
  trees.reserve(static_cast<std::size_t>(g.iterations));
  std::vector<std::int32_t> leaf_of(n);
  for (int m = 0; m < g.iterations; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      if (binomial) {
        prob[i] = sigmoid(f[i]);
        residual[i] = y[i] - prob[i];
      } else {
        residual[i] = y[i] - f[i];
      }
    }
    RegressionTree tree = fit_regression_tree(binned, residual, rows, params, rng);
    auto& nodes = tree.mutable_nodes();
    for (std::size_t i = 0; i < n; ++i) leaf_of[i] = tree.leaf(binned, i);
    if (binomial) {
      // One Newton step per leaf: sum r / sum p(1 - p).
      std::vector<double> num(nodes.size(), 0.0), den(nodes.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        num[leaf_of[i]] += residual[i];
        den[leaf_of[i]] += prob[i] * (1.0 - prob[i]);
      }
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (nodes[j].feature < 0) nodes[j].value = num[j] / std::max(den[j], 1e-12);
      }
    }
    for (std::size_t i = 0; i < n; ++i) f[i] += g.learning_rate * nodes[leaf_of[i]].value;
    double loss = mean_loss(cfg.task, y, f);
    if (!std::isfinite(loss)) {
      throw Error("gbm: training loss became non-finite at iteration " + std::to_string(m + 1));
    }
    history.push_back(loss);
    trees.push_back(std::move(tree));
  }
  return std::make_shared<GradientBoosting>(cfg.task, cfg.seed, X.names(), f0, g.learning_rate, std::move(trees),
                                            std::move(history));
}

}  // namespace splag
