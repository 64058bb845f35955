// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Usage: splag_acceptance [path-to-splag-cli]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/eval.hpp"
#include "splag/features.hpp"
#include "splag/ingest.hpp"
#include "splag/models/ann.hpp"
#include "splag/models/forest.hpp"
#include "splag/models/gbm.hpp"
#include "splag/models/glm.hpp"
#include "splag/pipeline.hpp"
#include "splag/spatial_index.hpp"
#include "splag/synth.hpp"

using namespace splag;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- criterion 1
Outcome grid_equals_brute() {
  Stopwatch sw;
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<std::size_t> n_dist(100, 5000);
  std::uniform_real_distribution<double> cell_dist(100.0, 3000.0), extent_dist(2000.0, 30000.0), unit(0.0, 1.0);
  std::size_t edges = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = n_dist(rng);
    const double cell = cell_dist(rng), extent = extent_dist(rng);
    std::vector<ProjectedPoint> pts = uniform_points(n, extent, rng());
    if (c % 2) {
      // clustered variant with exact duplicates
      for (std::size_t i = 0; i < n; ++i) {
        if (i % 4 == 0) continue;
        pts[i].x = 0.5 * extent + 0.05 * extent * (unit(rng) - 0.5);
        pts[i].y = 0.5 * extent + 0.05 * extent * (unit(rng) - 0.5);
      }
      for (std::size_t i = 1; i < n; i += 97) pts[i] = {pts[i].id, pts[i - 1].x, pts[i - 1].y};
    }
    NeighborGraph grid = neighbors_grid(pts, 500.0, cell, nullptr, 1);
    NeighborGraph brute = neighbors_brute(pts, 500.0);
    if (!(grid == brute)) {
      return {false, "configuration " + std::to_string(c) + " (n=" + std::to_string(n) + ", cell=" + fmt(cell) +
                         ") differs"};
    }
    edges += grid.edge_count() / 2;
  }
  const double t = sw.seconds();
  return {t < 60.0, "50 configurations identical, " + std::to_string(edges) + " edges, " + fmt(t) + " s (limit 60 s)"};
}

// ---------------------------------------------------------------- criterion 2
Outcome grid_faster_than_brute() {
  Stopwatch sw;
  std::vector<std::size_t> n{50000};
  auto rows = benchmark_index(n, 500.0, 500.0, 2, 25000.0, 1);
  const auto& r = rows.front();
  const double t = sw.seconds();
  bool pass = r.identical && r.grid_seconds < r.brute_seconds && t < 300.0;
  return {pass, "n=50000 grid " + fmt(r.grid_seconds) + " s vs brute " + fmt(r.brute_seconds) +
                    " s, identical=" + (r.identical ? "yes" : "no") + ", " + fmt(t) + " s (limit 300 s)"};
}

// ---------------------------------------------------------------- criterion 3
Outcome auc_agreement() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(2, 400);
  std::uniform_int_distribution<int> coarse(0, 20);
  std::uniform_real_distribution<double> unit;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = len(rng);
    std::vector<double> s(n), y(n);
    const double rate = 0.05 + 0.9 * unit(rng);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = unit(rng) < rate ? 1.0 : 0.0;
      // half the vectors carry heavy ties
      s[i] = (k % 2) ? coarse(rng) + y[i] * coarse(rng) / 4.0 : unit(rng) + 0.3 * y[i];
    }
    y[0] = 0.0;
    y[1] = 1.0;
    worst = std::max(worst, std::abs(auc(s, y) - auc_rank(s, y)));
  }
  std::vector<double> labels{0, 0, 0, 1, 1}, separable{0.1, 0.2, 0.3, 0.7, 0.9}, constant(5, 0.4);
  const double a_sep = auc(separable, labels), a_const = auc(constant, labels);
  const double r_sep = auc_rank(separable, labels), r_const = auc_rank(constant, labels);
  bool pass = worst <= 1e-12 && a_sep == 1.0 && r_sep == 1.0 && a_const == 0.5 && r_const == 0.5;
  return {pass, "max |trapezoid - rank| = " + fmt(worst) + " over 1000 vectors (limit 1e-12); separable " +
                    fmt(a_sep) + ", constant " + fmt(a_const)};
}

// ---------------------------------------------------------------- criterion 4
Outcome regression_metric_values() {
  struct Case {
    std::vector<double> pred, obs;
    double rmse, mae, r2;
  };
  const std::vector<Case> cases{
      {{2, 2, 2}, {1, 2, 3}, std::sqrt(2.0 / 3.0), 2.0 / 3.0, 0.0},
      {{1.5, 2, 5}, {1, 3, 4}, std::sqrt(0.75), 2.5 / 3.0, 1.0 - 2.25 / (42.0 / 9.0)},
      {{10, 20, 30, 40}, {12, 18, 33, 37}, std::sqrt(26.0 / 4.0), 10.0 / 4.0, 1.0 - 26.0 / 426.0}};
  double worst = 0.0;
  bool exact_square = true;
  for (const auto& c : cases) {
    RegressionMetrics m = regression_metrics(c.pred, c.obs);
    worst = std::max({worst, std::abs(m.rmse - c.rmse), std::abs(m.mae - c.mae), std::abs(m.r2 - c.r2)});
    exact_square = exact_square && (m.rmse * m.rmse == m.mse);
  }
  std::vector<double> zeros{0, 0}, p{1, -1};
  const bool undefined_r2 = is_missing(regression_metrics(p, zeros).r2);
  bool pass = worst <= 1e-12 && exact_square && undefined_r2;
  return {pass, "max deviation " + fmt(worst) + " (limit 1e-12); RMSE^2 == MSE " + (exact_square ? "exact" : "not exact")};
}

// ---------------------------------------------------------------- criterion 5
Outcome ann_gradient() {
  Stopwatch sw;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd XT(5, 20);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < XT.size(); ++i) XT.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = normal(rng);
  double worst = 0.0;
  std::size_t skipped = 0;
  for (double l1 : {0.0, 0.01}) {
    Mlp net({5, 4, 3, 1}, false);
    net.initialize(rng);
    // zero biases would place rows with all-inactive units exactly on a ReLU kink
    for (Eigen::Index k = 0; k < net.parameters().size(); ++k) net.parameters()(k) += 0.1 * normal(rng);
    Eigen::VectorXd grad;
    net.objective(XT, y, l1, &grad, 1.0 / 20.0);
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      if (l1 > 0.0 && std::abs(net.parameters()(k)) < 1e-3) {
        ++skipped;  // |w| is not differentiable at 0
        continue;
      }
      Mlp plus = net, minus = net;
      plus.parameters()(k) += h;
      minus.parameters()(k) -= h;
      const double fd =
          (plus.objective(XT, y, l1, nullptr, 1.0 / 20.0) - minus.objective(XT, y, l1, nullptr, 1.0 / 20.0)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad(k)) / std::max(std::abs(fd), 1e-8));
    }
  }
  const double t = sw.seconds();
  return {worst < 1e-4 && t < 10.0, "max relative error " + fmt(worst) + " (limit 1e-4), " + std::to_string(skipped) +
                                        " near-zero weights skipped, " + fmt(t) + " s"};
}

// ---------------------------------------------------------------- criterion 6
Outcome boosting_and_forest() {
  std::size_t violations = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> a(500), b(500), c(500), y(500);
    for (std::size_t i = 0; i < y.size(); ++i) {
      a[i] = normal(rng);
      b[i] = normal(rng);
      c[i] = i % 11 == 0 ? kMissing : normal(rng);
      y[i] = std::sin(a[i]) * 3 + b[i] * b[i] + (is_missing(c[i]) ? 1.0 : 0.5 * c[i]) + 0.3 * normal(rng);
    }
    FeatureMatrix X = make_matrix({"a", "b", "c"}, {a, b, c});
    LearnerConfig cfg;
    cfg.kind = LearnerKind::gbm;
    cfg.task = Task::regression;
    cfg.seed = seed;
    cfg.gbm.iterations = 100;
    cfg.gbm.learning_rate = 0.1;
    TrainedModel m = fit(X, y, cfg);
    const auto& loss = dynamic_cast<const GradientBoosting&>(*m).loss_history();
    for (std::size_t i = 1; i < loss.size(); ++i) violations += loss[i] > loss[i - 1];
  }

  std::size_t mismatches = 0;
  for (Task task : {Task::regression, Task::classification}) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    std::vector<double> a(400), b(400), y(400);
    for (std::size_t i = 0; i < y.size(); ++i) {
      a[i] = normal(rng);
      b[i] = normal(rng);
      y[i] = task == Task::regression ? a[i] - b[i] + normal(rng) : (a[i] + normal(rng) > 0 ? 1.0 : 0.0);
    }
    FeatureMatrix X = make_matrix({"a", "b"}, {a, b});
    LearnerConfig cfg;
    cfg.kind = LearnerKind::rf;
    cfg.task = task;
    cfg.rf.trees = 50;
    cfg.seed = 4;
    TrainedModel m = fit(X, y, cfg);
    const auto& rf = dynamic_cast<const RandomForest&>(*m);
    auto cols = m->align(X);
    auto pred = m->predict(X);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      double sum = 0.0;
      for (const auto& t : rf.trees()) {
        double v = t.predict(cols, r);
        sum += task == Task::regression ? v : (v > 0.5 ? 1.0 : 0.0);
      }
      mismatches += sum / static_cast<double>(rf.trees().size()) != pred[r];
    }
  }
  return {violations == 0 && mismatches == 0, std::to_string(violations) +
                                                  " loss increases over 10 seeds x 100 iterations; " +
                                                  std::to_string(mismatches) + " forest rows differ from the tree mean"};
}

// ---------------------------------------------------------------- criterion 7
double binomial_dev(const std::vector<double>& x, const std::vector<double>& y, double a, double b) {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = a + b * x[i];
    // log(1 + exp(eta)) - y * eta, computed stably
    const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    d += 2.0 * (softplus - y[i] * eta);
  }
  return d;
}

Outcome glm_recovery() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  std::vector<double> x0(200), x1(200), x2(200), y(200);
  for (std::size_t i = 0; i < y.size(); ++i) {
    x0[i] = normal(rng);
    x1[i] = 10 + 5 * normal(rng);
    x2[i] = std::exp(normal(rng));
    y[i] = 1.5 + 2.0 * x0[i] - 3.0 * x1[i] + 0.25 * x2[i];
  }
  LearnerConfig cfg;
  cfg.kind = LearnerKind::glm;
  cfg.task = Task::regression;
  TrainedModel g = fit(make_matrix({"x0", "x1", "x2"}, {x0, x1, x2}), y, cfg);
  auto [b0, b] = dynamic_cast<const Glm&>(*g).original_scale();
  const std::vector<double> planted{2.0, -3.0, 0.25};
  double coef_err = std::abs(b0 - 1.5);
  for (std::size_t k = 0; k < 3; ++k) coef_err = std::max(coef_err, std::abs(b[k] - planted[k]));

  std::uniform_real_distribution<double> unit;
  std::vector<double> x(400), yb(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = normal(rng);
    yb[i] = unit(rng) < 1.0 / (1.0 + std::exp(-(-0.4 + 1.2 * x[i]))) ? 1.0 : 0.0;
  }
  cfg.task = Task::classification;
  TrainedModel lg = fit(make_matrix({"x"}, {x}), yb, cfg);
  auto [a_hat, bh] = dynamic_cast<const Glm&>(*lg).original_scale();
  const double irls = binomial_dev(x, yb, a_hat, bh[0]);

  // coarse grid, then a fine grid around the coarse minimum
  double best = std::numeric_limits<double>::infinity(), ca = 0, cb = 0;
  for (double a = -2.0; a <= 2.0; a += 0.01)
    for (double s = -1.0; s <= 3.0; s += 0.01)
      if (double d = binomial_dev(x, yb, a, s); d < best) {
        best = d;
        ca = a;
        cb = s;
      }
  for (int i = -100; i <= 100; ++i)
    for (int j = -100; j <= 100; ++j)
      best = std::min(best, binomial_dev(x, yb, ca + i * 1e-4, cb + j * 1e-4));
  const double gap = irls - best;
  bool pass = coef_err <= 1e-8 && std::abs(gap) <= 1e-6;
  return {pass, "gaussian max coefficient error " + fmt(coef_err) + " (limit 1e-8); binomial deviance " + fmt(irls) +
                    " vs grid " + fmt(best) + ", difference " + fmt(gap) + " (limit 1e-6)"};
}

// ------------------------------------------------------------ criteria 8-10
struct Study {
  std::size_t rows = 0;
  MetricsReport report;
  double seconds = 0.0;
};

Study run_study() {
  Stopwatch sw;
  SynthConfig sc;  // default city: seed 7, 3000 parcels, 2003-2017, contagion 0.5
  SynthCity city = generate_city(sc);
  auto panel =
      apply_global_filters(join_panel(city.parcels, resolve_sales(city.sales, city.aliases)).panel).panel;
  NeighborGraph graph = build_parcel_graph(panel, 500.0, 500.0);
  FeatureSets sets = build_feature_sets(panel, graph);
  Labels labels = make_labels(panel);

  CompareOptions opt;
  opt.seed = 7;
  for (LearnerKind k : {LearnerKind::glm, LearnerKind::rf, LearnerKind::gbm, LearnerKind::ann}) {
    LearnerConfig c;
    c.kind = k;
    c.rf.trees = 100;
    c.ann.hidden = {32};
    c.ann.epochs = 60;
    c.ann.batch_size = 128;
    opt.configs[k] = c;
  }
  Study s;
  s.rows = panel.size();
  s.report = compare_models(sets.view(), {labels.sold, labels.sale_psf}, SplitSpec{}, opt);
  s.seconds = sw.seconds();
  return s;
}

Outcome regression_direction(const Study& s) {
  const auto* base_ann = s.report.find(Task::regression, FeatureSetKind::base, LearnerKind::ann);
  const auto* sp_ann = s.report.find(Task::regression, FeatureSetKind::spatial, LearnerKind::ann);
  const auto* base_glm = s.report.find(Task::regression, FeatureSetKind::base, LearnerKind::glm);
  const auto* sp_glm = s.report.find(Task::regression, FeatureSetKind::spatial, LearnerKind::glm);
  if (!base_ann || !sp_ann || !base_glm || !sp_glm) return {false, "missing regression cells"};
  const double ann_gain = 1.0 - sp_ann->test_metrics.rmse / base_ann->test_metrics.rmse;
  const double glm_gain = 1.0 - sp_glm->test_metrics.rmse / base_glm->test_metrics.rmse;
  std::string best;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::size_t cells = 0;
  for (const auto& c : s.report.cells) {
    if (c.task != Task::regression) continue;
    ++cells;
    if (!c.failed && c.test_metrics.rmse < best_rmse) {
      best_rmse = c.test_metrics.rmse;
      best = c.name();
    }
  }
  bool pass = s.rows >= 20000 && cells == 12 && ann_gain >= 0.10 && glm_gain >= 0.10 &&
              best == "regression/spatial/ann" && s.seconds < 600.0;
  return {pass, std::to_string(s.rows) + " panel rows; RMSE base/spatial ANN " + fmt(base_ann->test_metrics.rmse) + "/" +
                    fmt(sp_ann->test_metrics.rmse) + " (" + fmt(100 * ann_gain) + "% better), GLM " +
                    fmt(base_glm->test_metrics.rmse) + "/" + fmt(sp_glm->test_metrics.rmse) + " (" +
                    fmt(100 * glm_gain) + "% better); best of " + std::to_string(cells) + " cells: " + best + " " +
                    fmt(best_rmse) + "; study " + fmt(s.seconds) + " s (limit 600 s)"};
}

Outcome classification_direction(const Study& s) {
  const auto* base = s.report.find(Task::classification, FeatureSetKind::base, LearnerKind::gbm);
  const auto* spatial = s.report.find(Task::classification, FeatureSetKind::spatial, LearnerKind::gbm);
  if (!base || !spatial || base->failed || spatial->failed) return {false, "missing or failed GBM cells"};
  const double lift = spatial->test_auc - base->test_auc;
  bool pass = lift >= 0.05 && spatial->test_auc > 0.70;
  return {pass, "GBM test AUC spatial " + fmt(spatial->test_auc) + " vs base " + fmt(base->test_auc) + " (lift " +
                    fmt(lift) + ", need >= 0.05 and > 0.70)"};
}

Outcome importance_ranking(const Study& s) {
  std::size_t unscaled = 0;
  for (const auto& c : s.report.cells) {
    if (c.failed || c.importance.all_zero || c.importance.scores.empty()) continue;
    unscaled += *std::max_element(c.importance.scores.begin(), c.importance.scores.end()) != 1.0;
  }
  const auto* cell = s.report.find(Task::classification, FeatureSetKind::spatial, LearnerKind::gbm);
  if (!cell || cell->failed) return {false, "spatial GBM classification cell missing"};
  const auto& imp = cell->importance;
  std::size_t top = static_cast<std::size_t>(std::max_element(imp.scores.begin(), imp.scores.end()) - imp.scores.begin());
  const std::string& name = imp.names[top];
  bool pass = unscaled == 0 && name == "Percent_Neighbors_Sold";
  return {pass, "top feature of classification/spatial/gbm: " + name + "; " + std::to_string(unscaled) +
                    " cells without a maximum of exactly 1"};
}

// --------------------------------------------------------------- criterion 11
Outcome leakage_guard() {
  SynthConfig sc;
  sc.parcels = 1500;
  SynthCity city = generate_city(sc);
  auto panel =
      apply_global_filters(join_panel(city.parcels, resolve_sales(city.sales, city.aliases)).panel).panel;
  NeighborGraph graph = build_parcel_graph(panel, 500.0, 500.0);
  FeatureSets full = build_feature_sets(panel, graph);
  std::size_t checked = 0;
  for (int t = sc.first_year + 1; t <= sc.last_year; ++t) {
    // data known at the end of t - 1: earlier years as recorded, year-t parcels without outcomes
    std::vector<PropertyYearRecord> cut;
    for (auto r : panel) {
      if (r.year() > t) continue;
      if (r.year() == t) {
        r.sold = false;
        r.sale_price_total.reset();
        r.sale_psf.reset();
      }
      cut.push_back(std::move(r));
    }
    FeatureSets part = build_feature_sets(cut, build_parcel_graph(cut, 500.0, 500.0));
    auto year_rows = [t](const FeatureMatrix& m) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < m.rows(); ++r)
        if (m.keys()[r].year == t) rows.push_back(r);
      return rows;
    };
    for (auto [a, b] : {std::pair{&full.base, &part.base}, std::pair{&full.zone, &part.zone},
                        std::pair{&full.spatial, &part.spatial}}) {
      auto ra = year_rows(*a), rb = year_rows(*b);
      if (a->select_rows(ra).fingerprint() != b->select_rows(rb).fingerprint()) {
        return {false, "year " + std::to_string(t) + " " + to_string(a->kind()) + " features changed"};
      }
      ++checked;
    }
  }
  return {true, std::to_string(checked) + " (year, feature set) hashes identical"};
}

// --------------------------------------------------------------- criterion 12
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Drops every key that records elapsed time or the run's own output location.
void mask_timings(nlohmann::json& j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end();) {
      const std::string& k = it.key();
      if (k.find("seconds") != std::string::npos || k == "timings" || k == "runtime" || k == "output_dir") {
        it = j.erase(it);
      } else {
        mask_timings(*it);
        ++it;
      }
    }
  } else if (j.is_array()) {
    for (auto& v : j) mask_timings(v);
  }
}

Outcome end_to_end_determinism(const std::string& cli, const fs::path& config) {
  const fs::path root = fs::temp_directory_path() / "splag_acceptance_determinism";
  fs::remove_all(root);
  std::vector<fs::path> runs{root / "run_a", root / "run_b"};
  for (const auto& dir : runs) {
    if (!cli.empty()) {
      const std::string cmd = "\"" + cli + "\" pipeline --config \"" + config.string() + "\" --output-dir \"" +
                              dir.string() + "\" > \"" + (root / "log.txt").string() + "\" 2>&1";
      fs::create_directories(root);
      if (std::system(cmd.c_str()) != 0) return {false, "pipeline run failed: " + cmd};
    } else {
      PipelineConfig cfg = load_pipeline_config(config);
      cfg.output_dir = dir;
      if (run_pipeline(cfg).exit_code != 0) return {false, "pipeline run failed"};
    }
  }
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(runs[0])) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), runs[0]);
    if (rel.filename() == "timings.json") continue;  // wall-clock only
    const fs::path other = runs[1] / rel;
    if (!fs::exists(other)) {
      differing.push_back(rel.string() + " (missing)");
      continue;
    }
    std::string a = slurp(entry.path()), b = slurp(other);
    if (rel.extension() == ".json") {
      nlohmann::json ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
      mask_timings(ja);
      mask_timings(jb);
      a = ja.dump();
      b = jb.dump();
    }
    ++compared;
    if (a != b) differing.push_back(rel.string());
  }
  const bool reports = fs::exists(runs[0] / "stage1" / "report.json") && fs::exists(runs[0] / "stage2" / "report.json");
  if (!differing.empty()) return {false, std::to_string(differing.size()) + " files differ, first: " + differing.front()};
  return {reports && compared > 0, std::to_string(compared) + " artifacts byte-identical across two runs" +
                                       (cli.empty() ? " (library)" : " (cli)")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const fs::path config = argc > 2 ? fs::path(argv[2]) : fs::path(SPLAG_SOURCE_DIR) / "configs" / "smoke.json";

  int failures = 0;
  auto report = [&](int id, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  };

  report(1, grid_equals_brute);
  report(2, grid_faster_than_brute);
  report(3, auc_agreement);
  report(4, regression_metric_values);
  report(5, ann_gradient);
  report(6, boosting_and_forest);
  report(7, glm_recovery);
  Study study;
  std::string study_error;
  try {
    study = run_study();
  } catch (const std::exception& e) {
    study_error = e.what();
  }
  auto guarded = [&](Outcome (*f)(const Study&)) {
    return [&, f] {
      if (!study_error.empty()) return Outcome{false, "study failed: " + study_error};
      return f(study);
    };
  };
  report(8, guarded(regression_direction));
  report(9, guarded(classification_direction));
  report(10, guarded(importance_ranking));
  report(11, leakage_guard);
  report(12, [&] { return end_to_end_determinism(cli, config); });

  std::cout << (failures == 0 ? "all 12 criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
