#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "splag/csv_io.hpp"
#include "splag/eval.hpp"
#include "splag/features.hpp"
#include "splag/ingest.hpp"
#include "splag/pipeline.hpp"
#include "splag/spatial_index.hpp"
#include "splag/synth.hpp"

namespace fs = std::filesystem;
using namespace splag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

/// Relative output paths are placed under $SPLAG_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p) {
  const char* root = std::getenv("SPLAG_OUTPUT_ROOT");
  if (!root || !*root || p.is_absolute()) return p;
  return fs::path(root) / p;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Pipeline settings shared by several subcommands: a config file plus the
/// flags that override its keys.
struct CommonOptions {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<double> radius_m;
  std::optional<double> cell_size_m;
  std::optional<unsigned> threads;

  void add_to(CLI::App* app, bool geometry) {
    app->add_option("--config", config_file, "pipeline config JSON");
    app->add_option("--seed", seed, "master seed (overrides config)");
    app->add_option("--threads", threads, "worker threads, 0 = hardware concurrency");
    if (geometry) {
      app->add_option("--radius", radius_m, "neighbor radius in meters (overrides config radius_m)");
      app->add_option("--cell-size", cell_size_m, "grid cell size in meters (overrides config cell_size_m)");
    }
  }

  /// Config file (or defaults) with flag overrides applied, validated.
  PipelineConfig resolve(bool require_inputs) const {
    PipelineConfig cfg;
    if (!config_file.empty()) {
      cfg = load_pipeline_config(config_file);
    } else if (!require_inputs) {
      cfg.synth = SynthConfig{};
    }
    if (seed) cfg.seed = *seed;
    if (radius_m) cfg.radius_m = *radius_m;
    if (cell_size_m) cfg.cell_size_m = *cell_size_m;
    if (threads) cfg.threads = *threads;
    cfg.validate();
    return cfg;
  }
};

LearnerKind learner_from_file_name(const fs::path& p, FeatureSetKind& features) {
  // <task>_<features>_<learner>.json
  std::string stem = p.stem().string();
  auto first = stem.find('_');
  auto last = stem.rfind('_');
  if (first == std::string::npos || last == first) throw Error("unexpected model file name: " + p.string());
  features = parse_feature_set_kind(stem.substr(first + 1, last - first - 1));
  return parse_learner_kind(stem.substr(last + 1));
}

/// Rows of `m` in the order of `keys`; throws when a key is absent.
FeatureMatrix align_rows(const FeatureMatrix& m, const std::vector<RowKey>& keys) {
  if (m.keys() == keys) return m;
  std::map<RowKey, std::size_t> index;
  for (std::size_t r = 0; r < m.rows(); ++r) index.emplace(m.keys()[r], r);
  std::vector<std::size_t> rows;
  rows.reserve(keys.size());
  for (const auto& k : keys) {
    auto it = index.find(k);
    if (it == index.end()) throw Error("feature matrix has no row for " + k.bbl.str() + " " + std::to_string(k.year));
    rows.push_back(it->second);
  }
  return m.select_rows(rows);
}

std::vector<RowKey> panel_keys(const std::vector<PropertyYearRecord>& panel) {
  std::vector<RowKey> keys;
  keys.reserve(panel.size());
  for (const auto& r : panel) keys.push_back({r.bbl(), r.year()});
  return keys;
}

fs::path require_graph(const std::string& graph) {
  if (graph.empty() || !fs::exists(graph)) {
    throw Error("spatial features need a neighbor graph artifact; run `splag index --panel <panel.csv> --out graph.csv` "
                "first and pass it with --graph");
  }
  return graph;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-lag feature construction and model comparison for parcel sales panels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // synth
  CommonOptions synth_opt;
  std::string synth_out;
  std::optional<int> synth_parcels;
  auto* synth = app.add_subcommand("synth", "generate a synthetic city (parcels.csv, sales.csv, aliases.csv)");
  synth_opt.add_to(synth, false);
  synth->add_option("--parcels", synth_parcels, "number of parcels (overrides synth.parcels)");
  synth->add_option("--out", synth_out, "output directory")->required();

  // ingest
  std::string in_parcels, in_sales, in_aliases, in_mapping, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "resolve aliases, join sales to parcel-years and apply global filters");
  ingest->add_option("--parcels", in_parcels, "parcel-year CSV")->required();
  ingest->add_option("--sales", in_sales, "sales CSV")->required();
  ingest->add_option("--aliases", in_aliases, "alias CSV");
  ingest->add_option("--mapping", in_mapping, "column-mapping JSON");
  ingest->add_option("--out", ingest_out, "output panel CSV")->required();

  // index
  CommonOptions index_opt;
  std::string index_panel, index_out;
  auto* index = app.add_subcommand("index", "build the fixed-radius neighbor graph of a panel");
  index_opt.add_to(index, true);
  index->add_option("--panel", index_panel, "panel CSV")->required();
  index->add_option("--out", index_out, "edge list CSV")->required();

  // features
  CommonOptions feat_opt;
  std::string feat_panel, feat_graph, feat_kind = "all", feat_out;
  auto* features = app.add_subcommand("features", "compute base, zone and spatial feature matrices");
  feat_opt.add_to(features, false);
  features->add_option("--panel", feat_panel, "panel CSV")->required();
  features->add_option("--graph", feat_graph, "edge list CSV from `index` (needed for spatial)");
  features->add_option("--kind", feat_kind, "base, zone, spatial or all")
      ->check(CLI::IsMember({"base", "zone", "spatial", "all"}));
  features->add_option("--out", feat_out, "output directory")->required();

  // train
  CommonOptions train_opt;
  std::string train_panel, train_features, train_kind = "spatial", train_learner = "gbm", train_task = "classification",
                                           train_out;
  auto* train = app.add_subcommand("train", "fit one learner on the training years");
  train_opt.add_to(train, false);
  train->add_option("--panel", train_panel, "panel CSV")->required();
  train->add_option("--features", train_features, "directory written by `features`")->required();
  train->add_option("--kind", train_kind, "feature set")->check(CLI::IsMember({"base", "zone", "spatial"}));
  train->add_option("--learner", train_learner, "glm, rf, gbm or ann")->check(CLI::IsMember({"glm", "rf", "gbm", "ann"}));
  train->add_option("--task", train_task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  train->add_option("--out", train_out, "model JSON (default <task>_<kind>_<learner>.json)");

  // evaluate
  CommonOptions eval_opt;
  std::string eval_panel, eval_features, eval_models, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "score saved models on the validation and test years");
  eval_opt.add_to(evaluate, false);
  evaluate->add_option("--panel", eval_panel, "panel CSV")->required();
  evaluate->add_option("--features", eval_features, "directory written by `features`")->required();
  evaluate->add_option("--models", eval_models, "directory of <task>_<kind>_<learner>.json models")->required();
  evaluate->add_option("--out", eval_out, "output directory")->required();

  // bench-index
  std::vector<std::size_t> bench_n{1000, 10000, 50000};
  double bench_radius = 500.0, bench_cell = 500.0, bench_extent = 25000.0;
  std::uint64_t bench_seed = 7;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench-index", "time gridded vs brute-force neighbor search");
  bench->add_option("--n", bench_n, "point counts, ascending")->delimiter(',');
  bench->add_option("--radius", bench_radius, "radius in meters");
  bench->add_option("--cell-size", bench_cell, "grid cell size in meters");
  bench->add_option("--extent", bench_extent, "side of the square in meters");
  bench->add_option("--seed", bench_seed, "point seed");
  bench->add_option("--out", bench_out, "timing CSV (stdout when omitted)");

  // pipeline
  CommonOptions pipe_opt;
  std::string pipe_output;
  auto* pipeline = app.add_subcommand("pipeline", "run every stage from one config file");
  pipe_opt.add_to(pipeline, true);
  pipeline->add_option("--output-dir", pipe_output, "output directory (overrides config output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) {
      PipelineConfig cfg = synth_opt.resolve(false);
      if (!cfg.synth) throw ConfigError("synth", "the config has no synth section");
      SynthConfig sc = *cfg.synth;
      if (synth_opt.seed) sc.seed = *synth_opt.seed;
      if (synth_parcels) sc.parcels = *synth_parcels;
      sc.validate();
      SynthCity city = generate_city(sc);
      fs::path dir = output_path(synth_out);
      fs::create_directories(dir);
      write_parcels(dir / "parcels.csv", city.parcels);
      write_sales(dir / "sales.csv", city.sales);
      write_aliases(dir / "aliases.csv", city.aliases);
      write_json_file(dir / "synth.json", to_json(sc));
      std::cout << "parcel-years " << city.parcels.size() << ", sales " << city.sales.size() << " -> " << dir.string()
                << "\n";
    } else if (*ingest) {
      RawInputs raw;
      ColumnMapping mapping;
      if (!in_mapping.empty()) mapping = ColumnMapping::load(in_mapping);
      raw.parcels = read_parcels(in_parcels, mapping);
      raw.sales = read_sales(in_sales, mapping);
      if (!in_aliases.empty()) raw.aliases = read_aliases(in_aliases);
      PanelBuild built = build_panel(raw);
      fs::path out = output_path(ingest_out);
      ensure_parent(out);
      write_panel(out, built.filtered.panel);
      nlohmann::json stats{{"parcel_years", built.join.parcel_years},
                           {"sales", built.join.total_sales},
                           {"unmatched_sales", built.join.unmatched_sales},
                           {"unmatched_rate", built.join.unmatched_rate()},
                           {"multi_sale_groups", built.join.multi_sale_groups},
                           {"missing_location_rows", built.join.missing_location_rows},
                           {"retention", built.filtered.retention},
                           {"panel_rows", built.filtered.panel.size()}};
      std::cout << stats.dump(2) << "\n";
    } else if (*index) {
      PipelineConfig cfg = index_opt.resolve(false);
      auto panel = read_panel(index_panel);
      NeighborGraph graph = build_parcel_graph(panel, cfg.radius_m, cfg.cell_size_m, cfg.threads);
      fs::path out = output_path(index_out);
      ensure_parent(out);
      write_graph_csv(out, graph, config_hash(cfg), cfg.seed);
      std::cout << "nodes " << graph.size() << ", edges " << graph.edge_count() / 2 << " -> " << out.string() << "\n";
    } else if (*features) {
      PipelineConfig cfg = feat_opt.resolve(false);
      const bool want_spatial = feat_kind == "spatial" || feat_kind == "all";
      NeighborGraph graph;
      if (want_spatial) graph = read_graph_csv(require_graph(feat_graph));
      auto panel = read_panel(feat_panel);
      fs::path dir = output_path(feat_out);
      fs::create_directories(dir);
      const std::string hash = config_hash(cfg);
      FeatureMatrix base = base_features(panel);
      auto emit = [&](const FeatureMatrix& m) {
        fs::path path = dir / (to_string(m.kind()) + ".csv");
        write_feature_matrix(path, m, hash, cfg.seed);
        std::cout << to_string(m.kind()) << ": " << m.rows() << " x " << m.cols() << " -> " << path.string() << "\n";
      };
      if (feat_kind == "base" || feat_kind == "all") emit(base);
      if (feat_kind == "zone" || feat_kind == "all") emit(zone_features(base, panel));
      if (want_spatial) emit(spatial_lag_features(base, panel, graph));
    } else if (*train) {
      PipelineConfig cfg = train_opt.resolve(false);
      auto panel = read_panel(train_panel);
      const FeatureSetKind kind = parse_feature_set_kind(train_kind);
      FeatureMatrix X = align_rows(read_feature_matrix(fs::path(train_features) / (train_kind + ".csv")), panel_keys(panel));
      Labels labels = make_labels(panel);
      LearnerConfig lc = cfg.learners;
      lc.kind = parse_learner_kind(train_learner);
      lc.task = parse_task(train_task);
      lc.seed = cfg.seed;
      std::span<const double> y = lc.task == Task::classification ? std::span<const double>(labels.sold)
                                                                  : std::span<const double>(labels.sale_psf);
      Split split = out_of_time_split(X.keys(), cfg.split);
      for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
      ValidationRows val = with_target(split.validation, y);
      TrainedModel model = fit_on_partition(X, y, with_target(split.train, y), lc, &val);
      fs::path out = output_path(train_out.empty() ? model_file_name(lc.task, kind, lc.kind) : train_out);
      ensure_parent(out);
      save_model(out, *model);
      std::cout << "model -> " << out.string() << "\n";
    } else if (*evaluate) {
      PipelineConfig cfg = eval_opt.resolve(false);
      auto panel = read_panel(eval_panel);
      const auto keys = panel_keys(panel);
      Labels labels = make_labels(panel);
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(eval_models))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      if (files.empty()) throw Error("no model files in " + eval_models);
      std::map<FeatureSetKind, FeatureMatrix> matrices;
      std::vector<std::pair<FeatureSetKind, TrainedModel>> models;
      for (const auto& f : files) {
        FeatureSetKind kind;
        LearnerKind learner = learner_from_file_name(f, kind);
        TrainedModel m = load_model(f);
        if (m->kind() != learner) throw Error("model kind does not match its file name: " + f.string());
        if (!matrices.count(kind)) {
          matrices[kind] = align_rows(read_feature_matrix(fs::path(eval_features) / (to_string(kind) + ".csv")), keys);
        }
        models.emplace_back(kind, std::move(m));
      }
      std::map<FeatureSetKind, const FeatureMatrix*> view;
      for (const auto& [k, m] : matrices) view[k] = &m;
      MetricsReport report = evaluate_models(view, {labels.sold, labels.sale_psf}, cfg.split, models, true, cfg.threads);
      fs::path dir = output_path(eval_out);
      write_report_files(dir, report, config_hash(cfg), cfg.seed);
      std::cout << "report -> " << (dir / "report.json").string() << "\n";
    } else if (*bench) {
      auto rows = benchmark_index(bench_n, bench_radius, bench_cell, bench_seed, bench_extent);
      if (bench_out.empty()) {
        write_benchmark_csv(std::cout, rows);
      } else {
        fs::path out = output_path(bench_out);
        ensure_parent(out);
        std::ofstream f(out);
        if (!f) throw Error("cannot write " + out.string());
        write_benchmark_csv(f, rows);
        std::cout << "benchmark -> " << out.string() << "\n";
      }
    } else if (*pipeline) {
      if (pipe_opt.config_file.empty()) throw ConfigError("--config", "the pipeline needs a config file");
      PipelineConfig cfg = pipe_opt.resolve(true);
      if (!pipe_output.empty()) cfg.output_dir = pipe_output;
      cfg.output_dir = output_path(cfg.output_dir);
      PipelineResult result = run_pipeline(cfg, &std::cerr);
      if (result.exit_code != kExitOk) {
        std::cerr << "error in " << result.failed_stage << ": " << result.error << "\n";
        return result.exit_code;
      }
      std::cout << "artifacts -> " << cfg.output_dir.string() << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitOk;
}
