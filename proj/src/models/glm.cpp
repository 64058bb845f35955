#include "splag/models/glm.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

namespace {

constexpr double kWeightFloor = 1e-10;
constexpr double kProbClamp = 1e-15;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

ColumnViews views_of(const FeatureMatrix& X) {
  ColumnViews cols;
  for (std::size_t c = 0; c < X.cols(); ++c) cols.push_back(X.column(c));
  return cols;
}

/// Solves (A' W A + ridge * D) x = A' W z, D = I without the intercept entry.
Eigen::VectorXd weighted_normal_equations(const Eigen::MatrixXd& A, const Eigen::VectorXd& w,
                                          const Eigen::VectorXd& z, double ridge) {
  const Eigen::Index k = A.cols();
  Eigen::MatrixXd B = A.array().colwise() * w.array().sqrt();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k, k);
  M.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
  M = M.selfadjointView<Eigen::Lower>();
  for (Eigen::Index j = 1; j < k; ++j) M(j, j) += ridge;
  Eigen::VectorXd rhs = A.transpose() * (w.array() * z.array()).matrix();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  Eigen::VectorXd x = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite()) throw Error("glm: normal equations could not be solved");
  return x;
}

}  // namespace

double binomial_deviance(std::span<const double> y, std::span<const double> p) {
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    dev += -2.0 * (y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q));
  }
  return dev;
}

Glm::Glm(Task task, std::uint64_t seed, std::vector<std::string> manifest, Preprocessor pre, double intercept,
         Eigen::VectorXd beta, FitInfo info)
    : Model(LearnerKind::glm, task, seed, std::move(manifest)),
      pre_(std::move(pre)),
      intercept_(intercept),
      beta_(std::move(beta)),
      info_(info) {}

std::pair<double, std::vector<double>> Glm::original_scale() const {
  double b0 = intercept_;
  std::vector<double> coef(pre_.outputs().size());
  for (std::size_t j = 0; j < coef.size(); ++j) {
    const auto& o = pre_.outputs()[j];
    coef[j] = beta_(static_cast<Eigen::Index>(j)) / o.scale;
    b0 -= coef[j] * o.mean;
  }
  return {b0, coef};
}

std::vector<double> Glm::linear_predictor(const ColumnViews& cols, std::size_t rows) const {
  Eigen::VectorXd eta = (pre_.transform(cols, rows) * beta_).array() + intercept_;
  return {eta.data(), eta.data() + eta.size()};
}

std::vector<double> Glm::predict_columns(const ColumnViews& cols, std::size_t rows) const {
  auto eta = linear_predictor(cols, rows);
  if (task() == Task::classification) {
    for (double& v : eta) v = sigmoid(v);
  }
  return eta;
}

std::vector<double> Glm::raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const {
  if (!X_val) throw Error("glm importance needs validation data");
  const ColumnViews cols = align(*X_val);
  const bool logistic = task() == Task::classification;
  auto head = [logistic](const Eigen::MatrixXd& Z) -> Eigen::VectorXd {
    Eigen::VectorXd out = Z.row(0).transpose();
    if (logistic) out = out.unaryExpr([](double z) { return sigmoid(z); });
    return out;
  };
  Eigen::VectorXd b = Eigen::VectorXd::Constant(1, intercept_);
  return affine_permutation_importance(pre_, beta_.transpose(), b, head, cols, X_val->rows(), y_val, seed());
}

nlohmann::json Glm::parameters() const {
  return {{"preprocessor", pre_.to_json()},
          {"intercept", intercept_},
          {"beta", std::vector<double>(beta_.data(), beta_.data() + beta_.size())},
          {"iterations", info_.iterations},
          {"converged", info_.converged},
          {"separated", info_.separated},
          {"deviance", info_.deviance}};
}

TrainedModel Glm::from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                  const nlohmann::json& params) {
  auto beta = params.at("beta").get<std::vector<double>>();
  FitInfo info{params.at("iterations").get<int>(), params.at("converged").get<bool>(),
               params.at("separated").get<bool>(), params.at("deviance").get<double>()};
  Preprocessor pre = Preprocessor::from_json(params.at("preprocessor"));
  if (beta.size() != pre.outputs().size()) throw Error("corrupt glm: coefficient count mismatch");
  return std::make_shared<Glm>(task, seed, std::move(manifest), std::move(pre), params.at("intercept").get<double>(),
                               Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size())), info);
}

TrainedModel fit_glm(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg) {
  const std::size_t n = X.rows();
  if (n == 0) throw Error("glm: no training rows");
  const ColumnViews cols = views_of(X);
  Preprocessor pre = Preprocessor::fit(cols, n);
  const Eigen::Index q = static_cast<Eigen::Index>(pre.outputs().size());
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), q + 1);
  A.col(0).setOnes();
  A.rightCols(q) = pre.transform(cols, n);
  Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(n));
  const double ridge = cfg.glm.ridge;

  Glm::FitInfo info;
  Eigen::VectorXd coef;
  if (cfg.task == Task::regression) {
    coef = weighted_normal_equations(A, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)), target, ridge);
    info.iterations = 1;
    info.deviance = (A * coef - target).squaredNorm();
  } else {
    const double mean = std::clamp(target.mean(), 1e-6, 1.0 - 1e-6);
    coef = Eigen::VectorXd::Zero(q + 1);
    coef(0) = std::log(mean / (1.0 - mean));
    std::vector<double> p(n);
    auto deviance_of = [&](const Eigen::VectorXd& c) {
      Eigen::VectorXd eta = A * c;
      for (std::size_t i = 0; i < n; ++i) p[i] = sigmoid(eta(static_cast<Eigen::Index>(i)));
      return binomial_deviance(y, p);
    };
    double dev = deviance_of(coef);
    Eigen::VectorXd best = coef;
    double best_dev = dev;
    info.converged = false;
    for (int it = 1; it <= cfg.glm.max_iterations; ++it) {
      Eigen::VectorXd eta = A * coef;
      Eigen::VectorXd w(static_cast<Eigen::Index>(n)), z(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        double pi = sigmoid(eta(i));
        w(i) = std::max(pi * (1.0 - pi), kWeightFloor);
        z(i) = eta(i) + (target(i) - pi) / w(i);
      }
      coef = weighted_normal_equations(A, w, z, ridge);
      double next = deviance_of(coef);
      info.iterations = it;
      if (!std::isfinite(next)) break;
      if (next < best_dev) {
        best_dev = next;
        best = coef;
      }
      bool done = std::abs(next - dev) <= cfg.glm.tolerance * (std::abs(next) + 0.1);
      dev = next;
      if (done) {
        info.converged = true;
        break;
      }
    }
    coef = best;
    info.deviance = deviance_of(coef);
    double max_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::abs(y[i] - p[i]));
    info.separated = max_err < 1e-6;
  }
  return std::make_shared<Glm>(cfg.task, cfg.seed, X.names(), std::move(pre), coef(0), coef.tail(q), info);
}

}  // namespace splag
