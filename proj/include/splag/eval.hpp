#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "splag/common.hpp"
#include "splag/feature_matrix.hpp"
#include "splag/models/learner.hpp"

namespace splag {

struct SplitSpec {
  int train_first = 2003;
  int train_last = 2015;
  int validation = 2016;
  int test = 2017;

  /// Throws ConfigError unless train_first <= train_last < validation < test.
  void validate() const;
};

/// Row sets of one partition. The three types are distinct so that test rows
/// cannot be handed to a fitting routine by accident.
template <class Tag>
struct RowSet {
  std::vector<std::size_t> rows;
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};
using TrainRows = RowSet<struct TrainTag>;
using ValidationRows = RowSet<struct ValidationTag>;
using TestRows = RowSet<struct TestTag>;

struct Split {
  TrainRows train;
  ValidationRows validation;
  TestRows test;
  std::vector<std::string> warnings;  // e.g. an empty validation year
};

Split out_of_time_split(std::span<const RowKey> keys, const SplitSpec& spec);

/// Keeps rows whose target is present (not NaN).
template <class Tag>
RowSet<Tag> with_target(const RowSet<Tag>& set, std::span<const double> target) {
  RowSet<Tag> out;
  for (std::size_t r : set.rows)
    if (!std::isnan(target[r])) out.rows.push_back(r);
  return out;
}

/// Area under the ROC curve by trapezoids over the full threshold sweep.
/// Throws unless both classes are present and every score is finite.
double auc(std::span<const double> scores, std::span<const double> labels);
/// Same quantity as the Mann-Whitney statistic with half credit for ties.
double auc_rank(std::span<const double> scores, std::span<const double> labels);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> labels);
void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points);

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double mse = 0.0;       // rmse * rmse
  double r2 = kMissing;  // missing when the observed values are constant
};
RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> observed);

/// Fits on training rows only; validation rows, when given, are offered to
/// learners that select epochs on held-out data.
TrainedModel fit_on_partition(const FeatureMatrix& X, std::span<const double> y, const TrainRows& train,
                              const LearnerConfig& cfg, const ValidationRows* validation = nullptr);

struct CellResult {
  Task task = Task::regression;
  FeatureSetKind features = FeatureSetKind::base;
  LearnerKind learner = LearnerKind::rf;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::size_t test_rows = 0;
  double validation_auc = kMissing;
  double test_auc = kMissing;
  RegressionMetrics validation_metrics;
  RegressionMetrics test_metrics;
  Importance importance;  // scaled, on validation rows
  double runtime_seconds = 0.0;
  TrainedModel model;
  std::vector<std::size_t> test_row_index;  // rows of the input matrix
  std::vector<double> test_predictions;

  std::string name() const;  // e.g. "regression/spatial/ann"
  /// Test AUC (classification) or test RMSE (regression).
  double test_score() const;
};

struct MetricsReport {
  std::vector<CellResult> cells;  // sorted by (task, feature set, learner)

  const CellResult* find(Task task, FeatureSetKind features, LearnerKind learner) const;
};

struct CompareOptions {
  std::vector<Task> tasks{Task::classification, Task::regression};
  std::vector<FeatureSetKind> feature_sets{FeatureSetKind::base, FeatureSetKind::zone, FeatureSetKind::spatial};
  std::vector<LearnerKind> learners{LearnerKind::glm, LearnerKind::rf, LearnerKind::gbm, LearnerKind::ann};
  /// Per-learner configuration; task and seed are overwritten per cell.
  std::map<LearnerKind, LearnerConfig> configs;
  std::uint64_t seed = 0;
  bool importance = true;
  unsigned threads = 0;
};

/// Targets for both tasks over the rows shared by every matrix.
struct TaskTargets {
  std::span<const double> sold;      // 0/1
  std::span<const double> sale_psf;  // missing outside regression rows
  std::span<const double> for_task(Task t) const { return t == Task::classification ? sold : sale_psf; }
};

/// Fits and evaluates every (task, feature set, learner) cell. A failing cell
/// is recorded and the rest still run.
MetricsReport compare_models(const std::map<FeatureSetKind, const FeatureMatrix*>& matrices, const TaskTargets& targets,
                             const SplitSpec& spec, const CompareOptions& options);

/// Scores already fitted models exactly as compare_models does after fitting.
/// Each entry names the feature set the model was trained on.
MetricsReport evaluate_models(const std::map<FeatureSetKind, const FeatureMatrix*>& matrices,
                              const TaskTargets& targets, const SplitSpec& spec,
                              const std::vector<std::pair<FeatureSetKind, TrainedModel>>& models,
                              bool importance = true, unsigned threads = 0);

struct SegmentRanking {
  std::string segment;
  std::vector<std::string> models;  // in rank order
  std::vector<double> scores;       // metric per model, same order
};

struct RankingSummary {
  std::string model;
  std::vector<double> percent_at_rank;  // index k = rank k + 1
  double average_rank = 0.0;
};

struct RankingTable {
  Task task = Task::regression;
  std::vector<SegmentRanking> segments;
  std::vector<RankingSummary> summary;  // sorted by model name
  std::vector<std::string> skipped;     // segments where the metric is undefined
};

/// Ranks models within each segment by AUC (descending) or RMSE
/// (ascending); ties go to the lexicographically smaller model name.
/// predictions[m][i] and observed[i] refer to row i; segment_of[i] labels it.
RankingTable rank_by_segment(const std::vector<std::string>& model_names,
                             const std::vector<std::vector<double>>& predictions, std::span<const double> observed,
                             std::span<const std::string> segment_of, Task task);

nlohmann::json report_to_json(const MetricsReport& report, std::size_t top_importance = 10);
void write_report_csv(std::ostream& out, const MetricsReport& report);
nlohmann::json timings_to_json(const MetricsReport& report);
nlohmann::json ranking_to_json(const RankingTable& table);
void write_ranking_csv(std::ostream& out, const RankingTable& table);

}  // namespace splag
