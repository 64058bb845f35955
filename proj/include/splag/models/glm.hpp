#pragma once

#include <vector>

#include <Eigen/Dense>

#include "splag/models/learner.hpp"
#include "splag/models/preprocess.hpp"

namespace splag {

/// Gaussian (identity link) or binomial (logit link) GLM fitted on the
/// preprocessed design.
class Glm final : public Model {
 public:
  struct FitInfo {
    int iterations = 0;
    bool converged = true;
    bool separated = false;  // binomial only: training labels reproduced almost exactly
    double deviance = 0.0;
  };

  Glm(Task task, std::uint64_t seed, std::vector<std::string> manifest, Preprocessor pre, double intercept,
      Eigen::VectorXd beta, FitInfo info);

  const Preprocessor& preprocessor() const { return pre_; }
  /// Coefficients on the standardized design.
  double intercept() const { return intercept_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const FitInfo& info() const { return info_; }

  /// Intercept and one coefficient per preprocessor output on the raw scale
  /// (imputed value or 0/1 indicator).
  std::pair<double, std::vector<double>> original_scale() const;

  std::vector<double> linear_predictor(const ColumnViews& cols, std::size_t rows) const;
  std::vector<double> predict_columns(const ColumnViews& cols, std::size_t rows) const override;
  std::vector<double> raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const override;
  nlohmann::json parameters() const override;
  static TrainedModel from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                      const nlohmann::json& params);

 private:
  Preprocessor pre_;
  double intercept_;
  Eigen::VectorXd beta_;
  FitInfo info_;
};

/// Binomial deviance -2 * sum(y log p + (1 - y) log(1 - p)), with p clamped away from 0 and 1.
double binomial_deviance(std::span<const double> y, std::span<const double> p);

TrainedModel fit_glm(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg);

}  // namespace splag
