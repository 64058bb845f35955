#include "splag/models/learner.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/models/ann.hpp"
#include "splag/models/forest.hpp"
#include "splag/models/gbm.hpp"
#include "splag/models/glm.hpp"

namespace splag {

namespace {

constexpr int kModelFormatVersion = 1;

}  // namespace

std::string to_string(Task task) { return task == Task::classification ? "classification" : "regression"; }

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::glm:
      return "glm";
    case LearnerKind::rf:
      return "rf";
    case LearnerKind::gbm:
      return "gbm";
    case LearnerKind::ann:
      return "ann";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "classification") return Task::classification;
  if (text == "regression") return Task::regression;
  throw Error("unknown task '" + std::string(text) + "' (expected classification or regression)");
}

LearnerKind parse_learner_kind(std::string_view text) {
  if (text == "glm") return LearnerKind::glm;
  if (text == "rf") return LearnerKind::rf;
  if (text == "gbm") return LearnerKind::gbm;
  if (text == "ann") return LearnerKind::ann;
  throw Error("unknown learner '" + std::string(text) + "' (expected glm, rf, gbm or ann)");
}

void LearnerConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(field, what);
  };
  require(glm.max_iterations >= 1, "glm.max_iterations", "must be >= 1");
  require(glm.tolerance > 0.0, "glm.tolerance", "must be > 0");
  require(glm.ridge >= 0.0, "glm.ridge", "must be >= 0");
  require(rf.trees >= 1, "rf.trees", "must be >= 1");
  require(rf.m_try >= 0, "rf.m_try", "must be >= 1, or 0 for the default");
  require(rf.min_node >= 0, "rf.min_node", "must be >= 1, or 0 for the default");
  require(rf.bootstrap_fraction > 0.0 && rf.bootstrap_fraction <= 1.0, "rf.bootstrap_fraction", "must be in (0, 1]");
  require(rf.max_depth >= 0, "rf.max_depth", "must be >= 0");
  require(gbm.iterations >= 1, "gbm.iterations", "must be >= 1");
  require(gbm.learning_rate > 0.0 && gbm.learning_rate <= 1.0, "gbm.learning_rate", "must be in (0, 1]");
  require(gbm.max_depth >= 1, "gbm.max_depth", "must be >= 1");
  require(gbm.min_node >= 1, "gbm.min_node", "must be >= 1");
  require(!ann.hidden.empty(), "ann.hidden", "needs at least one hidden layer");
  require(std::all_of(ann.hidden.begin(), ann.hidden.end(), [](int h) { return h >= 1; }), "ann.hidden",
          "layer sizes must be >= 1");
  require(ann.epochs >= 1, "ann.epochs", "must be >= 1");
  require(ann.learning_rate > 0.0, "ann.learning_rate", "must be > 0");
  require(ann.l1 >= 0.0, "ann.l1", "must be >= 0");
  require(ann.batch_size >= 1, "ann.batch_size", "must be >= 1");
}

nlohmann::json to_json(const LearnerConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"task", to_string(cfg.task)},
          {"seed", cfg.seed},
          {"glm", {{"max_iterations", cfg.glm.max_iterations}, {"tolerance", cfg.glm.tolerance}, {"ridge", cfg.glm.ridge}}},
          {"rf",
           {{"trees", cfg.rf.trees},
            {"m_try", cfg.rf.m_try},
            {"min_node", cfg.rf.min_node},
            {"bootstrap", cfg.rf.bootstrap},
            {"bootstrap_fraction", cfg.rf.bootstrap_fraction},
            {"max_depth", cfg.rf.max_depth}}},
          {"gbm",
           {{"iterations", cfg.gbm.iterations},
            {"learning_rate", cfg.gbm.learning_rate},
            {"max_depth", cfg.gbm.max_depth},
            {"min_node", cfg.gbm.min_node}}},
          {"ann",
           {{"hidden", cfg.ann.hidden},
            {"epochs", cfg.ann.epochs},
            {"learning_rate", cfg.ann.learning_rate},
            {"l1", cfg.ann.l1},
            {"batch_size", cfg.ann.batch_size},
            {"keep_best_epoch", cfg.ann.keep_best_epoch}}}};
}

LearnerConfig learner_config_from_json(const nlohmann::json& j) {
  LearnerConfig cfg;
  cfg.kind = parse_learner_kind(j.at("kind").get<std::string>());
  cfg.task = parse_task(j.at("task").get<std::string>());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  const auto& g = j.at("glm");
  cfg.glm = {g.at("max_iterations").get<int>(), g.at("tolerance").get<double>(), g.at("ridge").get<double>()};
  const auto& r = j.at("rf");
  cfg.rf = {r.at("trees").get<int>(),     r.at("m_try").get<int>(),
            r.at("min_node").get<int>(),  r.at("bootstrap").get<bool>(),
            r.at("bootstrap_fraction").get<double>(), r.at("max_depth").get<int>()};
  const auto& b = j.at("gbm");
  cfg.gbm = {b.at("iterations").get<int>(), b.at("learning_rate").get<double>(), b.at("max_depth").get<int>(),
             b.at("min_node").get<int>()};
  const auto& a = j.at("ann");
  cfg.ann = {a.at("hidden").get<std::vector<int>>(), a.at("epochs").get<int>(), a.at("learning_rate").get<double>(),
             a.at("l1").get<double>(),          a.at("batch_size").get<int>(), a.at("keep_best_epoch").get<bool>()};
  return cfg;
}

ColumnViews Model::align(const FeatureMatrix& X) const {
  ColumnViews cols;
  cols.reserve(manifest_.size());
  std::vector<std::string> missing, extra;
  for (const auto& name : manifest_) {
    auto c = X.find(name);
    if (c) {
      cols.push_back(X.column(*c));
    } else {
      missing.push_back(name);
    }
  }
  std::set<std::string> known(manifest_.begin(), manifest_.end());
  for (const auto& name : X.names())
    if (!known.count(name)) extra.push_back(name);
  if (!missing.empty() || !extra.empty()) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
      return s.empty() ? std::string("none") : s;
    };
    throw Error("feature columns do not match the model manifest; missing: " + join(missing) +
                "; extra: " + join(extra));
  }
  return cols;
}

std::vector<double> Model::predict(const FeatureMatrix& X) const { return predict_columns(align(X), X.rows()); }

TrainedModel fit(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg,
                 const ValidationData& validation) {
  cfg.validate();
  if (y.size() != X.rows()) throw Error("target length differs from row count");
  for (double v : y) {
    if (is_missing(v) || !std::isfinite(v)) throw Error("training targets must be finite");
    if (cfg.task == Task::classification && v != 0.0 && v != 1.0)
      throw Error("classification targets must be 0 or 1");
  }
  switch (cfg.kind) {
    case LearnerKind::glm:
      return fit_glm(X, y, cfg);
    case LearnerKind::rf:
      return fit_random_forest(X, y, cfg);
    case LearnerKind::gbm:
      return fit_gbm(X, y, cfg);
    case LearnerKind::ann:
      return fit_ann(X, y, cfg, validation);
  }
  throw Error("unknown learner");
}

Importance scale_importance(std::vector<std::string> names, std::vector<double> raw) {
  Importance out;
  out.names = std::move(names);
  double max = 0.0;
  for (double v : raw) max = std::max(max, v);
  if (!(max > 0.0)) {
    out.scores.assign(raw.size(), 0.0);
    out.all_zero = true;
    return out;
  }
  out.scores.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.scores[i] = raw[i] == max ? 1.0 : std::max(raw[i], 0.0) / max;
  return out;
}

Importance variable_importance(const Model& model, const FeatureMatrix* X_val, std::span<const double> y_val) {
  return scale_importance(model.manifest(), model.raw_importance(X_val, y_val));
}

nlohmann::json model_to_json(const Model& model) {
  return {{"format", "splag-model"},
          {"version", kModelFormatVersion},
          {"learner", to_string(model.kind())},
          {"task", to_string(model.task())},
          {"seed", model.seed()},
          {"manifest", model.manifest()},
          {"parameters", model.parameters()}};
}

TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "splag-model") throw Error("not a serialized model");
  int version = j.at("version").get<int>();
  if (version != kModelFormatVersion) throw Error("unsupported model format version " + std::to_string(version));
  Task task = parse_task(j.at("task").get<std::string>());
  auto seed = j.at("seed").get<std::uint64_t>();
  auto manifest = j.at("manifest").get<std::vector<std::string>>();
  const auto& params = j.at("parameters");
  switch (parse_learner_kind(j.at("learner").get<std::string>())) {
    case LearnerKind::glm:
      return Glm::from_parameters(task, seed, std::move(manifest), params);
    case LearnerKind::rf:
      return RandomForest::from_parameters(task, seed, std::move(manifest), params);
    case LearnerKind::gbm:
      return GradientBoosting::from_parameters(task, seed, std::move(manifest), params);
    case LearnerKind::ann:
      return Ann::from_parameters(task, seed, std::move(manifest), params);
  }
  throw Error("unknown learner");
}

void save_model(const std::filesystem::path& path, const Model& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << model_to_json(model).dump() << '\n';
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return model_from_json(nlohmann::json::parse(in));
}

FeatureMatrix make_matrix(std::vector<std::string> names, std::vector<std::vector<double>> columns) {
  if (names.size() != columns.size()) throw Error("make_matrix: name and column counts differ");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  std::vector<RowKey> keys;
  keys.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) keys.push_back({BblKey{1, static_cast<std::int64_t>(r), 0}, 0});
  FeatureMatrix m(FeatureSetKind::base, std::move(keys));
  for (std::size_t c = 0; c < names.size(); ++c) m.add_column(names[c], std::move(columns[c]), FeatureSetKind::base, "");
  return m;
}

}  // namespace splag
