#pragma once

#include <vector>

#include "splag/models/learner.hpp"
#include "splag/models/tree.hpp"

namespace splag {

/// Gradient tree boosting with squared-error (regression) or binomial
/// deviance (classification) loss.
class GradientBoosting final : public Model {
 public:
  GradientBoosting(Task task, std::uint64_t seed, std::vector<std::string> manifest, double f0, double learning_rate,
                   std::vector<RegressionTree> trees, std::vector<double> loss_history);

  double initial_value() const { return f0_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  /// Mean training loss before the first tree and after each iteration.
  const std::vector<double>& loss_history() const { return loss_history_; }

  /// Additive score before the logistic transform.
  std::vector<double> decision_function(const ColumnViews& cols, std::size_t rows) const;
  std::vector<double> predict_columns(const ColumnViews& cols, std::size_t rows) const override;
  std::vector<double> raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const override;
  nlohmann::json parameters() const override;
  static TrainedModel from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                      const nlohmann::json& params);

 private:
  double f0_;
  double learning_rate_;
  std::vector<RegressionTree> trees_;
  std::vector<double> loss_history_;
};

/// log(p / (1 - p)) of the mean label, the binomial-deviance minimizer.
double binomial_initial_value(std::span<const double> y);

TrainedModel fit_gbm(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg);

}  // namespace splag
