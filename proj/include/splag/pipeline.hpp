#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "splag/eval.hpp"
#include "splag/features.hpp"
#include "splag/ingest.hpp"
#include "splag/models/learner.hpp"
#include "splag/records.hpp"
#include "splag/synth.hpp"

namespace splag {

inline constexpr const char* kVersion = "1.0.0";

struct InputPaths {
  std::filesystem::path parcels;
  std::filesystem::path sales;
  std::filesystem::path aliases;  // optional
  std::filesystem::path mapping;  // optional column-mapping sidecar
};

/// Everything a pipeline run needs. Either `synth` or `inputs` supplies the
/// raw records.
struct PipelineConfig {
  std::optional<SynthConfig> synth;
  InputPaths inputs;
  double radius_m = 500.0;
  double cell_size_m = 500.0;
  SplitSpec split;
  /// Hyperparameters of all four learners; kind, task and seed are set per cell.
  LearnerConfig learners;
  Stage2Rule stage2;
  bool run_stage1 = true;
  bool write_matrices = true;
  std::filesystem::path output_dir = "splag_output";
  std::uint64_t seed = 7;
  unsigned threads = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Unknown keys are rejected at every level; absent keys keep their defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
/// Hash of the settings that influence results (output location and thread
/// count excluded).
std::string config_hash(const PipelineConfig& cfg);

struct RawInputs {
  std::vector<ParcelRecord> parcels;
  std::vector<SaleRecord> sales;
  AliasTable aliases;
};
RawInputs load_inputs(const PipelineConfig& cfg);

struct PanelBuild {
  JoinResult join;
  FilterResult filtered;
};
/// Alias resolution, join and global filters.
PanelBuild build_panel(const RawInputs& inputs);

struct FeatureSets {
  FeatureMatrix base;
  FeatureMatrix zone;
  FeatureMatrix spatial;
  std::map<FeatureSetKind, const FeatureMatrix*> view() const {
    return {{FeatureSetKind::base, &base}, {FeatureSetKind::zone, &zone}, {FeatureSetKind::spatial, &spatial}};
  }
};
FeatureSets build_feature_sets(std::span<const PropertyYearRecord> panel, const NeighborGraph& graph);

/// Segment label "<borough>/<category>" for every panel row.
std::vector<std::string> segment_labels(std::span<const PropertyYearRecord> panel);

/// Ranks the feature sets of one task within each segment from the test
/// predictions of the report's cells for that task and learner.
RankingTable rank_feature_sets(const MetricsReport& report, Task task, LearnerKind learner,
                               std::span<const double> observed, std::span<const std::string> segments);

/// Canonical artifact file name of a cell model, e.g. "regression_spatial_ann.json".
std::string model_file_name(Task task, FeatureSetKind features, LearnerKind learner);

/// Writes report.json (no timings), report.csv and timings.json into `dir`.
void write_report_files(const std::filesystem::path& dir, const MetricsReport& report, const std::string& hash,
                        std::uint64_t seed);

struct PipelineResult {
  int exit_code = 0;  // 0 ok, 2 config error, 3 stage failure
  std::string failed_stage;
  std::string error;
  MetricsReport stage1;
  MetricsReport stage2;
};

/// Runs synth/ingest, index, features, stage 1 and stage 2, writing every
/// artifact under cfg.output_dir. On a stage failure the partial artifacts
/// stay in place next to a FAILED marker.
PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr);

}  // namespace splag
