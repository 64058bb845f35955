#include "splag/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "splag/csv_io.hpp"

namespace splag {

void SplitSpec::validate() const {
  if (train_first > train_last) throw ConfigError("split.train_first", "must not exceed split.train_last");
  if (!(train_last < validation)) throw ConfigError("split.validation", "must be after the last training year");
  if (!(validation < test)) throw ConfigError("split.test", "must be after the validation year");
}

Split out_of_time_split(std::span<const RowKey> keys, const SplitSpec& spec) {
  spec.validate();
  Split s;
  for (std::size_t r = 0; r < keys.size(); ++r) {
    int y = keys[r].year;
    if (y >= spec.train_first && y <= spec.train_last) {
      s.train.rows.push_back(r);
    } else if (y == spec.validation) {
      s.validation.rows.push_back(r);
    } else if (y == spec.test) {
      s.test.rows.push_back(r);
    }
  }
  if (s.train.empty()) s.warnings.push_back("no rows in the training years");
  if (s.validation.empty())
    s.warnings.push_back("validation year " + std::to_string(spec.validation) + " has no rows");
  if (s.test.empty()) s.warnings.push_back("test year " + std::to_string(spec.test) + " has no rows");
  return s;
}

namespace {

struct ClassCounts {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw Error("auc: scores and labels differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error("auc: scores must be finite");
    if (labels[i] == 1.0) {
      ++c.pos;
    } else if (labels[i] == 0.0) {
      ++c.neg;
    } else {
      throw Error("auc: labels must be 0 or 1");
    }
  }
  if (c.pos == 0 || c.neg == 0) throw Error("auc: undefined when only one class is present");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const double> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const auto idx = order_by_score(scores, true);
  // Twice the area in units of (1 / neg) x (1 / pos), kept in integers.
  unsigned __int128 area2 = 0;
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::uint64_t tp_prev = tp, fp_prev = fp;
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]] == 1.0) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    area2 += static_cast<unsigned __int128>(fp - fp_prev) * (tp + tp_prev);
    i = j;
  }
  return static_cast<double>(area2) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

double auc_rank(std::span<const double> scores, std::span<const double> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const auto idx = order_by_score(scores, false);
  // Doubled mid-ranks stay integral: ranks i+1 .. j average to (i + 1 + j) / 2.
  unsigned __int128 rank2_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]] == 1.0) ++pos_in_group;
      ++j;
    }
    rank2_sum += static_cast<unsigned __int128>(pos_in_group) * (i + 1 + j);
    i = j;
  }
  unsigned __int128 u2 = rank2_sum - static_cast<unsigned __int128>(c.pos) * (c.pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const auto idx = order_by_score(scores, true);
  std::vector<RocPoint> pts{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1.0 ? tp : fp)++;
      ++j;
    }
    pts.push_back({scores[idx[i]], static_cast<double>(fp) / static_cast<double>(c.neg),
                   static_cast<double>(tp) / static_cast<double>(c.pos)});
    i = j;
  }
  return pts;
}

void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> points) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_csv_row(out, {"threshold", "fpr", "tpr"});
  for (const auto& p : points) {
    write_csv_row(out, {std::isinf(p.threshold) ? "inf" : format_double(p.threshold), format_double(p.fpr),
                        format_double(p.tpr)});
  }
}

RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) throw Error("regression metrics: length mismatch");
  if (observed.empty()) throw Error("regression metrics: no rows");
  const double t = static_cast<double>(observed.size());
  double sse = 0.0, sae = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    double d = predicted[i] - observed[i];
    sse += d * d;
    sae += std::abs(d);
    sum += observed[i];
  }
  const double mean = sum / t;
  double sst = 0.0;
  for (double y : observed) sst += (y - mean) * (y - mean);
  RegressionMetrics m;
  m.rmse = std::sqrt(sse / t);
  m.mse = m.rmse * m.rmse;
  m.mae = sae / t;
  m.r2 = sst > 0.0 ? 1.0 - sse / sst : kMissing;
  return m;
}

TrainedModel fit_on_partition(const FeatureMatrix& X, std::span<const double> y, const TrainRows& train,
                              const LearnerConfig& cfg, const ValidationRows* validation) {
  if (train.empty()) throw Error("no training rows");
  FeatureMatrix Xt = X.select_rows(train.rows);
  std::vector<double> yt;
  yt.reserve(train.size());
  for (std::size_t r : train.rows) yt.push_back(y[r]);
  if (validation && !validation->empty()) {
    FeatureMatrix Xv = X.select_rows(validation->rows);
    std::vector<double> yv;
    for (std::size_t r : validation->rows) yv.push_back(y[r]);
    return fit(Xt, yt, cfg, {&Xv, yv});
  }
  return fit(Xt, yt, cfg);
}

std::string CellResult::name() const {
  return to_string(task) + "/" + to_string(features) + "/" + to_string(learner);
}

double CellResult::test_score() const { return task == Task::classification ? test_auc : test_metrics.rmse; }

const CellResult* MetricsReport::find(Task task, FeatureSetKind features, LearnerKind learner) const {
  for (const auto& c : cells)
    if (c.task == task && c.features == features && c.learner == learner) return &c;
  return nullptr;
}

namespace {

double safe_auc(std::span<const double> scores, std::span<const double> labels) {
  try {
    return auc(scores, labels);
  } catch (const Error&) {
    return kMissing;
  }
}

template <class Tag>
std::vector<double> gather(std::span<const double> v, const RowSet<Tag>& set) {
  std::vector<double> out;
  out.reserve(set.size());
  for (std::size_t r : set.rows) out.push_back(v[r]);
  return out;
}

/// Scores a fitted cell model on the validation and test partitions.
void score_cell(CellResult& cell, const FeatureMatrix& X, std::span<const double> y, const Split& split,
                bool importance) {
  const TrainRows train = with_target(split.train, y);
  const ValidationRows val = with_target(split.validation, y);
  const TestRows test = with_target(split.test, y);
  cell.train_rows = train.size();
  cell.validation_rows = val.size();
  cell.test_rows = test.size();

  auto score = [&](const auto& set, double& auc_out, RegressionMetrics& reg_out) {
    if (set.empty()) return std::vector<double>{};
    FeatureMatrix part = X.select_rows(set.rows);
    auto pred = cell.model->predict(part);
    auto obs = gather(y, set);
    if (cell.task == Task::classification) {
      auc_out = safe_auc(pred, obs);
    } else {
      reg_out = regression_metrics(pred, obs);
    }
    return pred;
  };
  score(val, cell.validation_auc, cell.validation_metrics);
  cell.test_predictions = score(test, cell.test_auc, cell.test_metrics);
  cell.test_row_index = test.rows;

  if (importance) {
    const bool trees = cell.learner == LearnerKind::rf || cell.learner == LearnerKind::gbm;
    if (trees) {
      cell.importance = variable_importance(*cell.model);
    } else {
      const std::vector<std::size_t>& rows = val.empty() ? train.rows : val.rows;
      FeatureMatrix Xi = X.select_rows(rows);
      std::vector<double> yi;
      for (std::size_t r : rows) yi.push_back(y[r]);
      cell.importance = variable_importance(*cell.model, &Xi, yi);
    }
  }
}

void evaluate_cell(CellResult& cell, const FeatureMatrix& X, std::span<const double> y, const Split& split,
                   const LearnerConfig& cfg, bool importance) {
  const TrainRows train = with_target(split.train, y);
  const ValidationRows val = with_target(split.validation, y);
  cell.model = fit_on_partition(X, y, train, cfg, &val);
  score_cell(cell, X, y, split, importance);
}

const FeatureMatrix* shared_reference(const std::map<FeatureSetKind, const FeatureMatrix*>& matrices,
                                      const std::vector<FeatureSetKind>& kinds, const TaskTargets& targets) {
  const FeatureMatrix* reference = nullptr;
  for (auto kind : kinds) {
    auto it = matrices.find(kind);
    if (it == matrices.end() || !it->second) throw Error("no matrix for feature set " + to_string(kind));
    if (!reference) {
      reference = it->second;
    } else if (it->second->keys() != reference->keys()) {
      throw Error("feature matrices do not share row keys");
    }
  }
  if (!reference) throw Error("no feature sets requested");
  if (targets.sold.size() != reference->rows() || targets.sale_psf.size() != reference->rows())
    throw Error("target length differs from matrix rows");
  return reference;
}

void sort_cells(std::vector<CellResult>& cells) {
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tuple(to_string(a.task), to_string(a.features), to_string(a.learner)) <
           std::tuple(to_string(b.task), to_string(b.features), to_string(b.learner));
  });
}

}  // namespace

MetricsReport compare_models(const std::map<FeatureSetKind, const FeatureMatrix*>& matrices,
                             const TaskTargets& targets, const SplitSpec& spec, const CompareOptions& options) {
  spec.validate();
  const FeatureMatrix* reference = shared_reference(matrices, options.feature_sets, targets);
  const Split split = out_of_time_split(reference->keys(), spec);

  std::vector<CellResult> cells;
  for (Task task : options.tasks) {
    for (FeatureSetKind fs : options.feature_sets) {
      for (LearnerKind lk : options.learners) {
        CellResult c;
        c.task = task;
        c.features = fs;
        c.learner = lk;
        std::uint64_t cell_id = static_cast<std::uint64_t>(task) * 100 + static_cast<std::uint64_t>(fs) * 10 +
                                static_cast<std::uint64_t>(lk);
        c.seed = mix_seed(options.seed, cell_id);
        cells.push_back(std::move(c));
      }
    }
  }

  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        CellResult& cell = cells[i];
        auto start = std::chrono::steady_clock::now();
        try {
          auto it = options.configs.find(cell.learner);
          LearnerConfig cfg = it != options.configs.end() ? it->second : LearnerConfig{};
          cfg.kind = cell.learner;
          cfg.task = cell.task;
          cfg.seed = cell.seed;
          evaluate_cell(cell, *matrices.at(cell.features), targets.for_task(cell.task), split, cfg,
                        options.importance);
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
          cell.model.reset();
        }
        cell.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      },
      options.threads);

  sort_cells(cells);
  return MetricsReport{std::move(cells)};
}

MetricsReport evaluate_models(const std::map<FeatureSetKind, const FeatureMatrix*>& matrices,
                              const TaskTargets& targets, const SplitSpec& spec,
                              const std::vector<std::pair<FeatureSetKind, TrainedModel>>& models, bool importance,
                              unsigned threads) {
  spec.validate();
  std::vector<FeatureSetKind> kinds;
  for (const auto& [fs, model] : models) {
    if (!model) throw Error("evaluate_models: null model");
    kinds.push_back(fs);
  }
  const FeatureMatrix* reference = shared_reference(matrices, kinds, targets);
  const Split split = out_of_time_split(reference->keys(), spec);

  std::vector<CellResult> cells(models.size());
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        CellResult& cell = cells[i];
        const auto& [fs, model] = models[i];
        cell.task = model->task();
        cell.features = fs;
        cell.learner = model->kind();
        cell.seed = model->seed();
        cell.model = model;
        auto start = std::chrono::steady_clock::now();
        try {
          score_cell(cell, *matrices.at(fs), targets.for_task(cell.task), split, importance);
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        cell.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      },
      threads);
  sort_cells(cells);
  return MetricsReport{std::move(cells)};
}

RankingTable rank_by_segment(const std::vector<std::string>& model_names,
                             const std::vector<std::vector<double>>& predictions, std::span<const double> observed,
                             std::span<const std::string> segment_of, Task task) {
  const std::size_t k = model_names.size();
  if (k < 2) throw Error("rank_by_segment needs at least two models");
  if (predictions.size() != k) throw Error("rank_by_segment: one prediction vector per model required");
  for (const auto& p : predictions)
    if (p.size() != observed.size()) throw Error("rank_by_segment: prediction length mismatch");
  if (segment_of.size() != observed.size()) throw Error("rank_by_segment: segment length mismatch");

  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < observed.size(); ++i) rows_of[segment_of[i]].push_back(i);

  RankingTable table;
  table.task = task;
  std::map<std::string, std::vector<std::size_t>> rank_counts;
  std::map<std::string, double> rank_sum;
  for (const auto& name : model_names) rank_counts[name].assign(k, 0);

  for (const auto& [segment, rows] : rows_of) {
    std::vector<double> obs;
    for (std::size_t r : rows) obs.push_back(observed[r]);
    std::vector<std::pair<double, std::size_t>> scored;
    bool defined = true;
    for (std::size_t m = 0; m < k && defined; ++m) {
      std::vector<double> pred;
      for (std::size_t r : rows) pred.push_back(predictions[m][r]);
      double s;
      if (task == Task::classification) {
        s = safe_auc(pred, obs);
        defined = !is_missing(s);
        s = -s;  // higher AUC ranks first
      } else {
        s = regression_metrics(pred, obs).rmse;
      }
      scored.emplace_back(s, m);
    }
    if (!defined) {
      table.skipped.push_back(segment);
      continue;
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return model_names[a.second] < model_names[b.second];
    });
    SegmentRanking seg;
    seg.segment = segment;
    for (std::size_t pos = 0; pos < k; ++pos) {
      const auto& name = model_names[scored[pos].second];
      seg.models.push_back(name);
      seg.scores.push_back(task == Task::classification ? -scored[pos].first : scored[pos].first);
      ++rank_counts[name][pos];
      rank_sum[name] += static_cast<double>(pos + 1);
    }
    table.segments.push_back(std::move(seg));
  }

  const double n_seg = static_cast<double>(table.segments.size());
  for (const auto& [name, counts] : rank_counts) {
    RankingSummary s;
    s.model = name;
    for (std::size_t c : counts) s.percent_at_rank.push_back(n_seg > 0 ? 100.0 * static_cast<double>(c) / n_seg : 0.0);
    s.average_rank = n_seg > 0 ? rank_sum[name] / n_seg : kMissing;
    table.summary.push_back(std::move(s));
  }
  return table;
}

namespace {

nlohmann::json metrics_json(const CellResult& c, bool test) {
  if (c.task == Task::classification) return {{"auc", test ? c.test_auc : c.validation_auc}};
  const RegressionMetrics& m = test ? c.test_metrics : c.validation_metrics;
  if ((test ? c.test_rows : c.validation_rows) == 0) return nlohmann::json::object();
  return {{"rmse", m.rmse}, {"mae", m.mae}, {"mse", m.mse}, {"r2", m.r2}};
}

}  // namespace

nlohmann::json report_to_json(const MetricsReport& report, std::size_t top_importance) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json j{{"task", to_string(c.task)},
                     {"features", to_string(c.features)},
                     {"learner", to_string(c.learner)},
                     {"seed", c.seed},
                     {"status", c.failed ? "failed" : "ok"},
                     {"rows", {{"train", c.train_rows}, {"validation", c.validation_rows}, {"test", c.test_rows}}}};
    if (c.failed) {
      j["error"] = c.error;
    } else {
      j["validation"] = metrics_json(c, false);
      j["test"] = metrics_json(c, true);
      std::vector<std::size_t> order(c.importance.scores.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return c.importance.scores[a] > c.importance.scores[b]; });
      nlohmann::json top = nlohmann::json::array();
      for (std::size_t i = 0; i < std::min(top_importance, order.size()); ++i) {
        top.push_back({{"feature", c.importance.names[order[i]]}, {"score", c.importance.scores[order[i]]}});
      }
      j["importance"] = {{"all_zero", c.importance.all_zero}, {"top", top}};
    }
    cells.push_back(std::move(j));
  }
  return {{"cells", cells}};
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  write_csv_row(out, {"task", "features", "learner", "status", "train_rows", "validation_rows", "test_rows",
                      "validation_auc", "test_auc", "validation_rmse", "test_rmse", "test_mae", "test_mse", "test_r2"});
  for (const auto& c : report.cells) {
    bool reg = c.task == Task::regression && !c.failed;
    auto num = [&](double v, bool show) { return show ? format_double(v) : std::string(); };
    write_csv_row(out, {to_string(c.task), to_string(c.features), to_string(c.learner), c.failed ? "failed" : "ok",
                        std::to_string(c.train_rows), std::to_string(c.validation_rows), std::to_string(c.test_rows),
                        num(c.validation_auc, !reg), num(c.test_auc, !reg),
                        num(c.validation_metrics.rmse, reg && c.validation_rows), num(c.test_metrics.rmse, reg && c.test_rows),
                        num(c.test_metrics.mae, reg && c.test_rows), num(c.test_metrics.mse, reg && c.test_rows),
                        num(c.test_metrics.r2, reg && c.test_rows)});
  }
}

nlohmann::json timings_to_json(const MetricsReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& c : report.cells) j[c.name()] = c.runtime_seconds;
  return j;
}

nlohmann::json ranking_to_json(const RankingTable& table) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : table.segments) segs.push_back({{"segment", s.segment}, {"models", s.models}, {"scores", s.scores}});
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : table.summary) {
    summary.push_back({{"model", s.model}, {"percent_at_rank", s.percent_at_rank}, {"average_rank", s.average_rank}});
  }
  return {{"task", to_string(table.task)},
          {"metric", table.task == Task::classification ? "auc" : "rmse"},
          {"segments", segs},
          {"summary", summary},
          {"skipped_segments", table.skipped}};
}

void write_ranking_csv(std::ostream& out, const RankingTable& table) {
  std::vector<std::string> header{"model"};
  const std::size_t k = table.summary.empty() ? 0 : table.summary.front().percent_at_rank.size();
  for (std::size_t r = 1; r <= k; ++r) header.push_back("percent_rank_" + std::to_string(r));
  header.push_back("average_rank");
  write_csv_row(out, header);
  for (const auto& s : table.summary) {
    std::vector<std::string> row{s.model};
    for (double p : s.percent_at_rank) row.push_back(format_double(p));
    row.push_back(format_double(s.average_rank));
    write_csv_row(out, row);
  }
}

}  // namespace splag
