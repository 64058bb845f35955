#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "splag/feature_matrix.hpp"

namespace splag {

enum class Task { classification, regression };
enum class LearnerKind { glm, rf, gbm, ann };

std::string to_string(Task task);
std::string to_string(LearnerKind kind);
Task parse_task(std::string_view text);
LearnerKind parse_learner_kind(std::string_view text);

struct GlmConfig {
  int max_iterations = 50;
  double tolerance = 1e-10;  // relative deviance change
  double ridge = 1e-8;       // added to the non-intercept diagonal
};

/// Zero for m_try / min_node picks the task default.
struct RfConfig {
  int trees = 200;
  int m_try = 0;
  int min_node = 0;
  bool bootstrap = true;
  double bootstrap_fraction = 1.0;
  int max_depth = 0;  // 0 = unlimited
};

struct GbmConfig {
  int iterations = 100;
  double learning_rate = 0.1;
  int max_depth = 5;
  int min_node = 10;
};

struct AnnConfig {
  std::vector<int> hidden{1024};
  int epochs = 100;
  double learning_rate = 1e-3;
  double l1 = 1e-5;
  int batch_size = 256;
  /// With validation data supplied to fit(), keep the parameters of the epoch
  /// with the lowest validation loss.
  bool keep_best_epoch = true;
};

struct LearnerConfig {
  LearnerKind kind = LearnerKind::rf;
  Task task = Task::regression;
  GlmConfig glm;
  RfConfig rf;
  GbmConfig gbm;
  AnnConfig ann;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const LearnerConfig& cfg);
LearnerConfig learner_config_from_json(const nlohmann::json& j);

/// Column views aligned with a model's manifest.
using ColumnViews = std::vector<std::span<const double>>;

struct Importance {
  std::vector<std::string> names;
  std::vector<double> scores;  // scaled so the maximum is exactly 1
  bool all_zero = false;
};

/// A fitted learner. Immutable after fitting and safe for concurrent reads.
class Model {
 public:
  virtual ~Model() = default;

  LearnerKind kind() const { return kind_; }
  Task task() const { return task_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& manifest() const { return manifest_; }

  /// Regression values or probabilities in [0, 1]. X must carry exactly the
  /// training columns (any order); otherwise throws naming the differences.
  std::vector<double> predict(const FeatureMatrix& X) const;
  ColumnViews align(const FeatureMatrix& X) const;

  virtual std::vector<double> predict_columns(const ColumnViews& cols, std::size_t rows) const = 0;

  /// Unscaled importance per manifest column. Tree models ignore the data;
  /// GLM and ANN use permutation importance on it.
  virtual std::vector<double> raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const = 0;

  virtual nlohmann::json parameters() const = 0;

 protected:
  Model(LearnerKind kind, Task task, std::uint64_t seed, std::vector<std::string> manifest)
      : kind_(kind), task_(task), seed_(seed), manifest_(std::move(manifest)) {}

 private:
  LearnerKind kind_;
  Task task_;
  std::uint64_t seed_;
  std::vector<std::string> manifest_;
};

using TrainedModel = std::shared_ptr<const Model>;

/// Optional held-out data used by learners that support epoch selection.
struct ValidationData {
  const FeatureMatrix* X = nullptr;
  std::span<const double> y;
};

/// Fits the configured learner. Rows with missing targets are rejected.
TrainedModel fit(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg,
                 const ValidationData& validation = {});

/// Scores divided by their maximum. All-zero input stays zero and is flagged.
Importance scale_importance(std::vector<std::string> names, std::vector<double> raw);
Importance variable_importance(const Model& model, const FeatureMatrix* X_val = nullptr,
                               std::span<const double> y_val = {});

/// Versioned JSON container; load() restores a model with identical predictions.
nlohmann::json model_to_json(const Model& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const Model& model);
TrainedModel load_model(const std::filesystem::path& path);

/// Convenience for tests and tools: a matrix with synthetic row keys.
FeatureMatrix make_matrix(std::vector<std::string> names, std::vector<std::vector<double>> columns);

}  // namespace splag
