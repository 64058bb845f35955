#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "splag/models/learner.hpp"
#include "splag/models/preprocess.hpp"

namespace splag {

/// Fully connected network with ReLU hidden layers and a single linear or
/// logistic output. Parameters live in one flat vector: for each layer the
/// weight matrix (out x in, column-major) followed by its bias.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, bool logistic_output);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  bool logistic_output() const { return logistic_; }
  std::size_t layers() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }

  /// He-style uniform init: weights ~ U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), biases 0.
  void initialize(std::mt19937_64& rng);

  /// Outputs for inputs given one column per row.
  Eigen::VectorXd forward(const Eigen::MatrixXd& XT) const;
  /// Outputs given the first layer's pre-activations (one column per row).
  Eigen::VectorXd forward_from_first(const Eigen::MatrixXd& Z1) const;

  /// scale * sum (y - f)^2 + l1 * sum |w| over weights (not biases). When
  /// grad is non-null it receives the gradient, using sign(0) = 0 for the
  /// L1 subgradient.
  double objective(const Eigen::MatrixXd& XT, const Eigen::VectorXd& y, double l1, Eigen::VectorXd* grad,
                   double scale = 1.0) const;

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * static_cast<std::size_t>(sizes_[layer]);
  }

  std::vector<int> sizes_;
  bool logistic_ = false;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd theta_;
};

class Ann final : public Model {
 public:
  struct FitInfo {
    int epochs_run = 0;
    int best_epoch = 0;
    int restarts = 0;
    double learning_rate = 0.0;  // after any halving
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
  };

  Ann(Task task, std::uint64_t seed, std::vector<std::string> manifest, Preprocessor pre, Mlp net, double y_mean,
      double y_scale, FitInfo info);

  const Mlp& network() const { return net_; }
  const Preprocessor& preprocessor() const { return pre_; }
  const FitInfo& info() const { return info_; }

  std::vector<double> predict_columns(const ColumnViews& cols, std::size_t rows) const override;
  std::vector<double> raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const override;
  nlohmann::json parameters() const override;
  static TrainedModel from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                      const nlohmann::json& params);

 private:
  Preprocessor pre_;
  Mlp net_;
  double y_mean_;
  double y_scale_;
  FitInfo info_;
};

TrainedModel fit_ann(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg,
                     const ValidationData& validation = {});

}  // namespace splag
