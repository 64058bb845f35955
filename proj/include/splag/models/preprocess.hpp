#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "splag/models/learner.hpp"

namespace splag {

/// Median imputation with missing indicators, clipping to the training
/// range, then standardization. Columns that are constant after imputation
/// are dropped.
class Preprocessor {
 public:
  struct Output {
    std::uint32_t source = 0;
    bool indicator = false;  // 1{source missing} instead of the imputed value
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double mean = 0.0;
    double scale = 1.0;
  };


  static Preprocessor fit(const ColumnViews& cols, std::size_t rows);

  std::size_t sources() const { return medians_.size(); }
  const std::vector<double>& medians() const { return medians_; }
  const std::vector<Output>& outputs() const { return outputs_; }

  /// Unstandardized value of output j for a raw cell.
  double raw_value(std::size_t j, double x) const {
    const Output& o = outputs_[j];
    if (o.indicator) return std::isnan(x) ? 1.0 : 0.0;
    return std::isnan(x) ? medians_[o.source] : std::clamp(x, o.lo, o.hi);
  }
  double value(std::size_t j, double x) const { return (raw_value(j, x) - outputs_[j].mean) / outputs_[j].scale; }

  /// rows x outputs design matrix.
  Eigen::MatrixXd transform(const ColumnViews& cols, std::size_t rows) const;

  nlohmann::json to_json() const;
  static Preprocessor from_json(const nlohmann::json& j);

 private:
  std::vector<double> medians_;
  std::vector<Output> outputs_;
};

/// Permutation importance for models whose first stage is affine in the
/// preprocessed inputs: Z = W * x + b, followed by `head`, which maps Z
/// (one column per row) to scores. Shuffling a source column only changes Z
/// through the outputs derived from it, so each permutation costs one rank
/// update instead of a full forward pass.
std::vector<double> affine_permutation_importance(const Preprocessor& pre, const Eigen::MatrixXd& W,
                                                  const Eigen::VectorXd& b,
                                                  const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& head,
                                                  const ColumnViews& cols, std::size_t rows,
                                                  std::span<const double> y, std::uint64_t seed, int repeats = 5);

}  // namespace splag
