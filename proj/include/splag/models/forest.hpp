#pragma once

#include <vector>

#include "splag/models/learner.hpp"
#include "splag/models/tree.hpp"

namespace splag {

/// Bagged regression trees. Regression predicts the mean of the trees;
/// classification predicts the fraction of trees whose leaf value exceeds 0.5.
class RandomForest final : public Model {
 public:
  RandomForest(Task task, std::uint64_t seed, std::vector<std::string> manifest, std::vector<RegressionTree> trees);

  const std::vector<RegressionTree>& trees() const { return trees_; }

  std::vector<double> predict_columns(const ColumnViews& cols, std::size_t rows) const override;
  std::vector<double> raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const override;
  nlohmann::json parameters() const override;
  static TrainedModel from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                      const nlohmann::json& params);

 private:
  std::vector<RegressionTree> trees_;
};

/// Resolved defaults: m = ceil(sqrt(p)) / ceil(p / 3), min node 1 / 5.
RfConfig resolve_rf_config(const RfConfig& cfg, Task task, std::size_t columns);

TrainedModel fit_random_forest(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg);

}  // namespace splag
