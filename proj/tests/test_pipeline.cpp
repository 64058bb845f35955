#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/csv_io.hpp"
#include "splag/ingest.hpp"
#include "splag/pipeline.hpp"

using namespace splag;
namespace fs = std::filesystem;

namespace {

nlohmann::json tiny(const fs::path& out) {
  nlohmann::json j = nlohmann::json::parse(R"({
    "seed": 11,
    "synth": {"seed": 11, "parcels": 250, "first_year": 2011, "last_year": 2017, "base_sale_rate": 0.1},
    "split": {"train_first": 2011, "train_last": 2015, "validation": 2016, "test": 2017},
    "learners": {"rf": {"trees": 8}, "gbm": {"iterations": 8}, "ann": {"hidden": [4], "epochs": 3, "batch_size": 64}},
    "threads": 1
  })");
  j["output_dir"] = out.string();
  return j;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("splag_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

std::string error_field(const nlohmann::json& j) {
  try {
    pipeline_config_from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("pipeline config parsing") {
  nlohmann::json j = tiny("out");
  PipelineConfig cfg = pipeline_config_from_json(j);
  CHECK(cfg.radius_m == 500.0);
  CHECK(cfg.cell_size_m == 500.0);
  CHECK(cfg.synth->parcels == 250);
  CHECK(cfg.learners.rf.trees == 8);
  CHECK(cfg.learners.ann.hidden == std::vector<int>{4});
  CHECK(cfg.stage2.categories == std::set<char>{'C', 'D'});
  CHECK(cfg.stage2.boroughs == std::set<int>{1, 2, 3});
  PipelineConfig round = pipeline_config_from_json(to_json(cfg));
  CHECK(to_json(round).dump() == to_json(cfg).dump());

  auto with = [&](const char* pointer, nlohmann::json value) {
    nlohmann::json copy = j;
    copy[nlohmann::json::json_pointer(pointer)] = std::move(value);
    return copy;
  };
  CHECK(error_field(with("/radius", 300)) == "radius");
  CHECK(error_field(with("/synth/parcel_count", 10)) == "synth.parcel_count");
  CHECK(error_field(with("/learners/rf/depth", 3)) == "learners.rf.depth");
  CHECK(error_field(with("/split/holdout", 2016)) == "split.holdout");
  CHECK(error_field(with("/radius_m", -1)) == "radius_m");
  CHECK(error_field(with("/radius_m", "wide")) == "radius_m");
  CHECK(error_field(with("/learners/gbm/learning_rate", 2.0)) == "learners.gbm.learning_rate");
  CHECK(error_field(with("/split/validation", 2015)) == "split.validation");
  CHECK(error_field(with("/stage2/boroughs", nlohmann::json::array({7}))) == "stage2.boroughs");

  nlohmann::json neither = j;
  neither.erase("synth");
  CHECK_FALSE(error_field(neither).empty());

  PipelineConfig moved = cfg;
  moved.output_dir = "elsewhere";
  moved.threads = 8;
  CHECK(config_hash(moved) == config_hash(cfg));
  moved.radius_m = 400;
  CHECK(config_hash(moved) != config_hash(cfg));
}

TEST_CASE("pipeline run writes every artifact and is reproducible") {
  fs::path a = fresh_dir("pipeline_a"), b = fresh_dir("pipeline_b");
  PipelineConfig cfg = pipeline_config_from_json(tiny(a));
  PipelineResult ra = run_pipeline(cfg);
  REQUIRE(ra.exit_code == 0);
  CHECK(ra.stage1.cells.size() == 6);
  CHECK(ra.stage2.cells.size() == 24);

  for (const char* name : {"config.json", "panel.csv", "graph.csv", "graph.csv.json", "features/base.csv",
                           "features/zone.csv", "features/spatial.csv", "features/spatial.csv.manifest.json",
                           "stage1/report.json", "stage1/ranking_regression.json", "stage1/ranking_classification.csv",
                           "stage2/report.json", "stage2/report.csv", "stage2/panel.csv",
                           "stage2/models/regression_spatial_ann.json", "manifest.json", "timings.json",
                           "input/parcels.csv"}) {
    CAPTURE(name);
    CHECK(fs::exists(a / name));
  }
  CHECK_FALSE(fs::exists(a / "FAILED"));

  nlohmann::json manifest = read_json(a / "manifest.json");
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["config"]["radius_m"] == 500.0);
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK(manifest["version"] == kVersion);

  // stage 2 holds exactly the rows the subset rule selects from the panel
  auto panel = read_panel(a / "panel.csv");
  const std::size_t expected = subset_stage2(panel, cfg.stage2).size();
  CHECK(read_panel(a / "stage2" / "panel.csv").size() == expected);
  bool found = false;
  for (const auto& stage : manifest["stages"]) {
    if (stage["stage"] == "stage2") {
      CHECK(stage["rows"] == expected);
      found = true;
    }
  }
  CHECK(found);

  cfg.output_dir = b;
  cfg.threads = 2;
  PipelineResult rb = run_pipeline(cfg);
  REQUIRE(rb.exit_code == 0);
  for (const char* name : {"panel.csv", "graph.csv", "features/spatial.csv", "stage1/report.json",
                           "stage1/ranking_regression.json", "stage2/report.json", "stage2/models/classification_zone_gbm.json",
                           "manifest.json"}) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

TEST_CASE("pipeline reads the same records from csv inputs") {
  fs::path a = fresh_dir("pipeline_synth"), b = fresh_dir("pipeline_csv");
  nlohmann::json j = tiny(a);
  j["write_matrices"] = false;
  j["stage1"] = false;
  j["learners"]["ann"]["epochs"] = 1;
  REQUIRE(run_pipeline(pipeline_config_from_json(j)).exit_code == 0);

  nlohmann::json k = j;
  k.erase("synth");
  k["inputs"] = {{"parcels", (a / "input" / "parcels.csv").string()},
                 {"sales", (a / "input" / "sales.csv").string()},
                 {"aliases", (a / "input" / "aliases.csv").string()}};
  k["output_dir"] = b.string();
  REQUIRE(run_pipeline(pipeline_config_from_json(k)).exit_code == 0);
  CHECK(slurp(a / "panel.csv") == slurp(b / "panel.csv"));
  CHECK(slurp(a / "stage2" / "report.json").size() > 0);
  CHECK_FALSE(fs::exists(b / "stage1"));
  CHECK_FALSE(fs::exists(b / "features"));
}

TEST_CASE("a failing stage leaves a marker and a failed manifest") {
  fs::path out = fresh_dir("pipeline_fail");
  nlohmann::json j = tiny(out);
  j["stage1"] = false;
  // hotels never pass the global filters, so the subset is empty
  j["stage2"] = {{"categories", {"H"}}, {"boroughs", {1}}};
  j["synth"]["parcels"] = 40;
  PipelineResult r = run_pipeline(pipeline_config_from_json(j));
  CHECK(r.exit_code == 3);
  CHECK(r.failed_stage == "stage2");
  REQUIRE(fs::exists(out / "FAILED"));
  CHECK(slurp(out / "FAILED").find("stage2") != std::string::npos);
  CHECK(read_json(out / "manifest.json")["status"] == "failed");
  CHECK(fs::exists(out / "panel.csv"));

  PipelineConfig bad = pipeline_config_from_json(tiny(fresh_dir("pipeline_bad")));
  bad.radius_m = 0;
  PipelineResult rb = run_pipeline(bad);
  CHECK(rb.exit_code == 2);
  CHECK(rb.error.find("radius_m") != std::string::npos);
  CHECK_FALSE(fs::exists(bad.output_dir));

  PipelineConfig missing = pipeline_config_from_json(tiny(fresh_dir("pipeline_missing")));
  missing.synth.reset();
  missing.inputs.parcels = "/nonexistent/parcels.csv";
  missing.inputs.sales = "/nonexistent/sales.csv";
  PipelineResult rm = run_pipeline(missing);
  CHECK(rm.exit_code == 3);
  CHECK(rm.failed_stage == "ingest");
}
