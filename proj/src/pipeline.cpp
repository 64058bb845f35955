#include "splag/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/csv_io.hpp"
#include "splag/spatial_index.hpp"

namespace splag {

namespace fs = std::filesystem;

namespace {

/// Applies every key of `j` through `visit(name, field)`, rejecting unknown
/// keys and type mismatches with the full field path.
template <class Visit>
void read_object(const nlohmann::json& j, const std::string& prefix, Visit&& visit_all) {
  if (!j.is_object()) throw ConfigError(prefix, "must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    visit_all([&](const char* name, auto& field) {
      if (key != name) return;
      known = true;
      try {
        field = value.template get<std::remove_reference_t<decltype(field)>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(prefix + "." + key, "has the wrong type");
      }
    });
    if (!known) throw ConfigError(prefix + "." + key, "unknown key");
  }
}

template <class F>
void glm_fields(GlmConfig& c, F&& f) {
  f("max_iterations", c.max_iterations);
  f("tolerance", c.tolerance);
  f("ridge", c.ridge);
}

template <class F>
void rf_fields(RfConfig& c, F&& f) {
  f("trees", c.trees);
  f("m_try", c.m_try);
  f("min_node", c.min_node);
  f("bootstrap", c.bootstrap);
  f("bootstrap_fraction", c.bootstrap_fraction);
  f("max_depth", c.max_depth);
}

template <class F>
void gbm_fields(GbmConfig& c, F&& f) {
  f("iterations", c.iterations);
  f("learning_rate", c.learning_rate);
  f("max_depth", c.max_depth);
  f("min_node", c.min_node);
}

template <class F>
void ann_fields(AnnConfig& c, F&& f) {
  f("hidden", c.hidden);
  f("epochs", c.epochs);
  f("learning_rate", c.learning_rate);
  f("l1", c.l1);
  f("batch_size", c.batch_size);
  f("keep_best_epoch", c.keep_best_epoch);
}

template <class F>
void split_fields(SplitSpec& c, F&& f) {
  f("train_first", c.train_first);
  f("train_last", c.train_last);
  f("validation", c.validation);
  f("test", c.test);
}

template <class Fields, class Config>
nlohmann::json fields_to_json(Config& c, Fields&& fields) {
  nlohmann::json j = nlohmann::json::object();
  fields(c, [&](const char* name, const auto& field) { j[name] = field; });
  return j;
}

nlohmann::json learners_to_json(LearnerConfig c) {
  return {{"glm", fields_to_json(c.glm, [](auto& x, auto&& f) { glm_fields(x, f); })},
          {"rf", fields_to_json(c.rf, [](auto& x, auto&& f) { rf_fields(x, f); })},
          {"gbm", fields_to_json(c.gbm, [](auto& x, auto&& f) { gbm_fields(x, f); })},
          {"ann", fields_to_json(c.ann, [](auto& x, auto&& f) { ann_fields(x, f); })}};
}

/// Semantic part of the configuration, shared by to_json and config_hash.
nlohmann::json semantic_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  if (cfg.synth) {
    j["synth"] = to_json(*cfg.synth);
  } else {
    j["inputs"] = {{"parcels", cfg.inputs.parcels.generic_string()},
                   {"sales", cfg.inputs.sales.generic_string()},
                   {"aliases", cfg.inputs.aliases.generic_string()},
                   {"mapping", cfg.inputs.mapping.generic_string()}};
  }
  j["radius_m"] = cfg.radius_m;
  j["cell_size_m"] = cfg.cell_size_m;
  SplitSpec split = cfg.split;
  j["split"] = fields_to_json(split, [](auto& x, auto&& f) { split_fields(x, f); });
  j["learners"] = learners_to_json(cfg.learners);
  std::vector<std::string> cats;
  for (char c : cfg.stage2.categories) cats.emplace_back(1, c);
  j["stage2"] = {{"categories", cats}, {"boroughs", cfg.stage2.boroughs}};
  j["stage1"] = cfg.run_stage1;
  j["write_matrices"] = cfg.write_matrices;
  return j;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

void PipelineConfig::validate() const {
  if (synth) {
    synth->validate();
  } else {
    if (inputs.parcels.empty()) throw ConfigError("inputs.parcels", "required when no synth section is given");
    if (inputs.sales.empty()) throw ConfigError("inputs.sales", "required when no synth section is given");
  }
  if (!(radius_m > 0.0) || !std::isfinite(radius_m)) throw ConfigError("radius_m", "must be a positive number");
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m))
    throw ConfigError("cell_size_m", "must be a positive number");
  split.validate();
  try {
    learners.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("learners." + e.field(), "invalid value");
  }
  if (stage2.categories.empty()) throw ConfigError("stage2.categories", "must not be empty");
  if (stage2.boroughs.empty()) throw ConfigError("stage2.boroughs", "must not be empty");
  for (int b : stage2.boroughs)
    if (b < 1 || b > 5) throw ConfigError("stage2.boroughs", "borough codes are 1 to 5");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json j = semantic_json(cfg);
  j["output_dir"] = cfg.output_dir.generic_string();
  j["threads"] = cfg.threads;
  return j;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "must be an object");
  PipelineConfig cfg;
  for (const auto& [key, value] : j.items()) {
    auto scalar = [&](auto& field) {
      try {
        field = value.template get<std::remove_reference_t<decltype(field)>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(key, "has the wrong type");
      }
    };
    if (key == "seed") {
      scalar(cfg.seed);
    } else if (key == "synth") {
      cfg.synth = synth_config_from_json(value, "synth");
    } else if (key == "inputs") {
      std::string parcels, sales, aliases, mapping;
      read_object(value, "inputs", [&](auto&& f) {
        f("parcels", parcels);
        f("sales", sales);
        f("aliases", aliases);
        f("mapping", mapping);
      });
      cfg.inputs = {parcels, sales, aliases, mapping};
    } else if (key == "radius_m") {
      scalar(cfg.radius_m);
    } else if (key == "cell_size_m") {
      scalar(cfg.cell_size_m);
    } else if (key == "split") {
      read_object(value, "split", [&](auto&& f) { split_fields(cfg.split, f); });
    } else if (key == "learners") {
      if (!value.is_object()) throw ConfigError("learners", "must be an object");
      for (const auto& [name, section] : value.items()) {
        const std::string path = "learners." + name;
        if (name == "glm") {
          read_object(section, path, [&](auto&& f) { glm_fields(cfg.learners.glm, f); });
        } else if (name == "rf") {
          read_object(section, path, [&](auto&& f) { rf_fields(cfg.learners.rf, f); });
        } else if (name == "gbm") {
          read_object(section, path, [&](auto&& f) { gbm_fields(cfg.learners.gbm, f); });
        } else if (name == "ann") {
          read_object(section, path, [&](auto&& f) { ann_fields(cfg.learners.ann, f); });
        } else {
          throw ConfigError(path, "unknown learner");
        }
      }
    } else if (key == "stage2") {
      std::vector<std::string> cats;
      std::vector<int> boroughs;
      bool has_cats = false, has_boroughs = false;
      if (!value.is_object()) throw ConfigError("stage2", "must be an object");
      for (const auto& [name, v] : value.items()) {
        try {
          if (name == "categories") {
            cats = v.get<std::vector<std::string>>();
            has_cats = true;
          } else if (name == "boroughs") {
            boroughs = v.get<std::vector<int>>();
            has_boroughs = true;
          } else {
            throw ConfigError("stage2." + name, "unknown key");
          }
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("stage2." + name, "has the wrong type");
        }
      }
      if (has_cats) {
        cfg.stage2.categories.clear();
        for (const auto& c : cats) {
          if (c.size() != 1) throw ConfigError("stage2.categories", "entries are single letters");
          cfg.stage2.categories.insert(c.front());
        }
      }
      if (has_boroughs) cfg.stage2.boroughs = std::set<int>(boroughs.begin(), boroughs.end());
    } else if (key == "stage1") {
      scalar(cfg.run_stage1);
    } else if (key == "write_matrices") {
      scalar(cfg.write_matrices);
    } else if (key == "output_dir") {
      std::string dir;
      scalar(dir);
      cfg.output_dir = dir;
    } else if (key == "threads") {
      scalar(cfg.threads);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return pipeline_config_from_json(j);
}

std::string config_hash(const PipelineConfig& cfg) { return hex64(fnv1a(semantic_json(cfg).dump())); }

RawInputs load_inputs(const PipelineConfig& cfg) {
  RawInputs raw;
  if (cfg.synth) {
    SynthCity city = generate_city(*cfg.synth);
    raw.parcels = std::move(city.parcels);
    raw.sales = std::move(city.sales);
    raw.aliases = std::move(city.aliases);
    return raw;
  }
  ColumnMapping mapping;
  if (!cfg.inputs.mapping.empty()) mapping = ColumnMapping::load(cfg.inputs.mapping);
  raw.parcels = read_parcels(cfg.inputs.parcels, mapping);
  raw.sales = read_sales(cfg.inputs.sales, mapping);
  if (!cfg.inputs.aliases.empty()) raw.aliases = read_aliases(cfg.inputs.aliases);
  return raw;
}

PanelBuild build_panel(const RawInputs& inputs) {
  PanelBuild out;
  out.join = join_panel(inputs.parcels, resolve_sales(inputs.sales, inputs.aliases));
  out.filtered = apply_global_filters(out.join.panel);
  return out;
}

FeatureSets build_feature_sets(std::span<const PropertyYearRecord> panel, const NeighborGraph& graph) {
  FeatureSets sets;
  sets.base = base_features(panel);
  sets.zone = zone_features(sets.base, panel);
  sets.spatial = spatial_lag_features(sets.base, panel, graph);
  return sets;
}

std::vector<std::string> segment_labels(std::span<const PropertyYearRecord> panel) {
  std::vector<std::string> out;
  out.reserve(panel.size());
  for (const auto& r : panel) out.push_back(std::to_string(r.parcel.borough) + "/" + r.parcel.category());
  return out;
}

RankingTable rank_feature_sets(const MetricsReport& report, Task task, LearnerKind learner,
                               std::span<const double> observed, std::span<const std::string> segments) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> predictions;
  const std::vector<std::size_t>* rows = nullptr;
  for (const auto& c : report.cells) {
    if (c.task != task || c.learner != learner || c.failed) continue;
    if (rows && c.test_row_index != *rows) throw Error("ranking: cells were scored on different rows");
    rows = &c.test_row_index;
    names.push_back(to_string(c.features));
    predictions.push_back(c.test_predictions);
  }
  if (!rows) throw Error("ranking: no successful " + to_string(task) + " cells");
  std::vector<double> obs;
  std::vector<std::string> seg;
  for (std::size_t r : *rows) {
    obs.push_back(observed[r]);
    seg.push_back(segments[r]);
  }
  return rank_by_segment(names, predictions, obs, seg, task);
}

std::string model_file_name(Task task, FeatureSetKind features, LearnerKind learner) {
  return to_string(task) + "_" + to_string(features) + "_" + to_string(learner) + ".json";
}

void write_report_files(const fs::path& dir, const MetricsReport& report, const std::string& hash,
                        std::uint64_t seed) {
  fs::create_directories(dir);
  nlohmann::json j = report_to_json(report);
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["version"] = kVersion;
  write_json(dir / "report.json", j);
  std::ofstream csv(dir / "report.csv");
  if (!csv) throw Error("cannot write " + (dir / "report.csv").string());
  write_report_csv(csv, report);
  write_json(dir / "timings.json", timings_to_json(report));
}

namespace {

struct RunContext {
  const PipelineConfig& cfg;
  std::ostream* log;
  std::string hash;
  nlohmann::json stages = nlohmann::json::array();
  nlohmann::json artifacts = nlohmann::json::array();
  nlohmann::json timings = nlohmann::json::object();

  void note(const std::string& message) const {
    if (log) *log << "[splag] " << message << std::endl;
  }
  void artifact(const fs::path& path) { artifacts.push_back(fs::relative(path, cfg.output_dir).generic_string()); }

  nlohmann::json manifest(const std::string& status) const {
    return {{"format", "splag-run"},      {"version", kVersion},   {"config_hash", hash},
            {"seed", cfg.seed},           {"status", status},      {"config", semantic_json(cfg)},
            {"stages", stages},           {"artifacts", artifacts}};
  }
};

CompareOptions compare_options(const PipelineConfig& cfg, std::uint64_t seed) {
  CompareOptions opt;
  opt.seed = seed;
  opt.threads = cfg.threads;
  for (LearnerKind k : {LearnerKind::glm, LearnerKind::rf, LearnerKind::gbm, LearnerKind::ann})
    opt.configs[k] = cfg.learners;
  return opt;
}

void save_models(RunContext& ctx, const fs::path& dir, const MetricsReport& report) {
  fs::create_directories(dir);
  for (const auto& c : report.cells) {
    if (c.failed || !c.model) continue;
    fs::path path = dir / model_file_name(c.task, c.features, c.learner);
    save_model(path, *c.model);
    ctx.artifact(path);
  }
}

void write_matrices(RunContext& ctx, const fs::path& dir, const FeatureSets& sets) {
  fs::create_directories(dir);
  for (const auto& [kind, m] : sets.view()) {
    fs::path path = dir / (to_string(kind) + ".csv");
    write_feature_matrix(path, *m, ctx.hash, ctx.cfg.seed);
    ctx.artifact(path);
  }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log) {
  PipelineResult result;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    result.exit_code = 2;
    result.failed_stage = "config";
    result.error = e.what();
    return result;
  }

  RunContext ctx{cfg, log, config_hash(cfg)};
  const fs::path out = cfg.output_dir;
  std::string stage = "setup";
  auto finish_stage = [&](const std::string& name, const Stopwatch& sw, nlohmann::json info) {
    info["stage"] = name;
    ctx.stages.push_back(std::move(info));
    ctx.timings[name] = sw.seconds();
    ctx.note(name + " done");
  };

  try {
    fs::create_directories(out);
    fs::remove(out / "FAILED");
    write_json(out / "config.json", to_json(cfg));

    stage = cfg.synth ? "synth" : "ingest";
    Stopwatch sw_in;
    RawInputs raw = load_inputs(cfg);
    if (cfg.synth) {
      fs::create_directories(out / "input");
      write_parcels(out / "input" / "parcels.csv", raw.parcels);
      write_sales(out / "input" / "sales.csv", raw.sales);
      write_aliases(out / "input" / "aliases.csv", raw.aliases);
      for (const char* name : {"parcels.csv", "sales.csv", "aliases.csv"}) ctx.artifact(out / "input" / name);
    }
    PanelBuild built = build_panel(raw);
    const auto& panel = built.filtered.panel;
    write_panel(out / "panel.csv", panel);
    ctx.artifact(out / "panel.csv");
    finish_stage(stage, sw_in,
                 {{"parcel_years", built.join.parcel_years},
                  {"sales", built.join.total_sales},
                  {"unmatched_sales", built.join.unmatched_sales},
                  {"multi_sale_groups", built.join.multi_sale_groups},
                  {"missing_location_rows", built.join.missing_location_rows},
                  {"retention", built.filtered.retention},
                  {"panel_rows", panel.size()}});

    stage = "index";
    Stopwatch sw_index;
    NeighborGraph graph = build_parcel_graph(panel, cfg.radius_m, cfg.cell_size_m, cfg.threads);
    write_graph_csv(out / "graph.csv", graph, ctx.hash, cfg.seed);
    ctx.artifact(out / "graph.csv");
    finish_stage(stage, sw_index,
                 {{"nodes", graph.size()}, {"edges", graph.edge_count() / 2}, {"radius_m", cfg.radius_m},
                  {"cell_size_m", cfg.cell_size_m}});

    stage = "features";
    Stopwatch sw_features;
    FeatureSets sets = build_feature_sets(panel, graph);
    if (cfg.write_matrices) write_matrices(ctx, out / "features", sets);
    const Labels labels = make_labels(panel);
    finish_stage(stage, sw_features,
                 {{"rows", sets.base.rows()},
                  {"columns", {{"base", sets.base.cols()}, {"zone", sets.zone.cols()}, {"spatial", sets.spatial.cols()}}}});

    const std::vector<std::string> segments = segment_labels(panel);
    if (cfg.run_stage1) {
      stage = "stage1";
      Stopwatch sw1;
      CompareOptions opt = compare_options(cfg, mix_seed(cfg.seed, 1));
      opt.learners = {LearnerKind::rf};
      result.stage1 = compare_models(sets.view(), {labels.sold, labels.sale_psf}, cfg.split, opt);
      const fs::path dir = out / "stage1";
      save_models(ctx, dir / "models", result.stage1);
      write_report_files(dir, result.stage1, ctx.hash, cfg.seed);
      ctx.artifact(dir / "report.json");
      for (Task task : {Task::classification, Task::regression}) {
        RankingTable table = rank_feature_sets(result.stage1, task, LearnerKind::rf,
                                               task == Task::classification ? std::span<const double>(labels.sold)
                                                                            : std::span<const double>(labels.sale_psf),
                                               segments);
        const std::string base = "ranking_" + to_string(task);
        nlohmann::json j = ranking_to_json(table);
        j["config_hash"] = ctx.hash;
        j["seed"] = cfg.seed;
        write_json(dir / (base + ".json"), j);
        std::ofstream csv(dir / (base + ".csv"));
        write_ranking_csv(csv, table);
        ctx.artifact(dir / (base + ".json"));
      }
      std::size_t failed = 0;
      for (const auto& c : result.stage1.cells) failed += c.failed;
      finish_stage(stage, sw1, {{"cells", result.stage1.cells.size()}, {"failed_cells", failed}});
    }

    stage = "stage2";
    Stopwatch sw2;
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < panel.size(); ++r)
      if (cfg.stage2.matches(panel[r])) rows.push_back(r);
    if (rows.empty()) throw Error("the stage-2 subset rule matches no rows");
    std::vector<PropertyYearRecord> sub_panel;
    FeatureSets sub{sets.base.select_rows(rows), sets.zone.select_rows(rows), sets.spatial.select_rows(rows)};
    std::vector<double> sold, psf;
    for (std::size_t r : rows) {
      sub_panel.push_back(panel[r]);
      sold.push_back(labels.sold[r]);
      psf.push_back(labels.sale_psf[r]);
    }
    const fs::path dir = out / "stage2";
    fs::create_directories(dir);
    write_panel(dir / "panel.csv", sub_panel);
    ctx.artifact(dir / "panel.csv");
    result.stage2 = compare_models(sub.view(), {sold, psf}, cfg.split, compare_options(cfg, mix_seed(cfg.seed, 2)));
    save_models(ctx, dir / "models", result.stage2);
    write_report_files(dir, result.stage2, ctx.hash, cfg.seed);
    ctx.artifact(dir / "report.json");
    fs::create_directories(dir / "roc");
    for (const auto& c : result.stage2.cells) {
      if (c.failed || c.task != Task::classification || c.test_rows == 0) continue;
      std::vector<double> obs;
      for (std::size_t r : c.test_row_index) obs.push_back(sold[r]);
      try {
        auto curve = roc_curve(c.test_predictions, obs);
        fs::path path = dir / "roc" / (to_string(c.features) + "_" + to_string(c.learner) + ".csv");
        write_roc_csv(path, curve);
        ctx.artifact(path);
      } catch (const Error&) {
        // single-class test year: no curve to draw
      }
    }
    std::size_t failed = 0;
    for (const auto& c : result.stage2.cells) failed += c.failed;
    finish_stage(stage, sw2, {{"rows", rows.size()}, {"cells", result.stage2.cells.size()}, {"failed_cells", failed}});

    write_json(out / "manifest.json", ctx.manifest("ok"));
    write_json(out / "timings.json", ctx.timings);
    if (failed) ctx.note(std::to_string(failed) + " stage-2 cells failed; see stage2/report.json");
  } catch (const std::exception& e) {
    result.exit_code = 3;
    result.failed_stage = stage;
    result.error = e.what();
    ctx.note("stage " + stage + " failed: " + e.what());
    try {
      std::ofstream marker(out / "FAILED");
      marker << "stage: " << stage << "\nerror: " << e.what() << "\n";
      write_json(out / "manifest.json", ctx.manifest("failed"));
      write_json(out / "timings.json", ctx.timings);
    } catch (const std::exception&) {
      // the marker is best effort when the output directory itself is unusable
    }
  }
  return result;
}

}  // namespace splag
