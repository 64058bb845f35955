#include "splag/models/ann.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

namespace {

constexpr int kMaxRestarts = 3;

Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

ColumnViews views_of(const FeatureMatrix& X) {
  ColumnViews cols;
  for (std::size_t c = 0; c < X.cols(); ++c) cols.push_back(X.column(c));
  return cols;
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, bool logistic_output) : sizes_(std::move(layer_sizes)), logistic_(logistic_output) {
  if (sizes_.size() < 2) throw Error("network needs an input and an output layer");
  for (int s : sizes_)
    if (s < 1) throw Error("layer sizes must be >= 1");
  if (sizes_.back() != 1) throw Error("network output must have one unit");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
  }
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t layer) const {
  return {theta_.data() + weight_offset(layer), sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  return {theta_.data() + bias_offset(layer), sizes_[layer + 1]};
}

void Mlp::initialize(std::mt19937_64& rng) {
  theta_.setZero();
  for (std::size_t l = 0; l < layers(); ++l) {
    const double limit = std::sqrt(6.0 / sizes_[l]);
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = theta_.data() + weight_offset(l);
    const std::size_t count = static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l]);
    for (std::size_t i = 0; i < count; ++i) w[i] = dist(rng);
  }
}

Eigen::VectorXd Mlp::forward_from_first(const Eigen::MatrixXd& Z1) const {
  Eigen::MatrixXd z = Z1;
  for (std::size_t l = 1; l < layers(); ++l) {
    Eigen::MatrixXd a = z.cwiseMax(0.0);
    z = (weight(l) * a).colwise() + bias(l);
  }
  if (logistic_) z = logistic(z);
  return z.row(0).transpose();
}

Eigen::VectorXd Mlp::forward(const Eigen::MatrixXd& XT) const {
  Eigen::MatrixXd z1 = (weight(0) * XT).colwise() + bias(0);
  return forward_from_first(z1);
}

double Mlp::objective(const Eigen::MatrixXd& XT, const Eigen::VectorXd& y, double l1, Eigen::VectorXd* grad,
                      double scale) const {
  const std::size_t L = layers();
  std::vector<Eigen::MatrixXd> Z(L), A(L);  // A[l] is the input of layer l for l >= 1
  for (std::size_t l = 0; l < L; ++l) {
    const Eigen::MatrixXd& in = l == 0 ? XT : A[l];
    Z[l] = (weight(l) * in).colwise() + bias(l);
    if (l + 1 < L) A[l + 1] = Z[l].cwiseMax(0.0);
  }
  Eigen::RowVectorXd f = logistic_ ? Eigen::RowVectorXd(logistic(Z[L - 1])) : Eigen::RowVectorXd(Z[L - 1]);
  Eigen::RowVectorXd resid = y.transpose() - f;
  double penalty = 0.0;
  for (std::size_t l = 0; l < L; ++l) penalty += weight(l).cwiseAbs().sum();
  const double loss = scale * resid.squaredNorm() + l1 * penalty;
  if (!grad) return loss;

  grad->setZero(theta_.size());
  Eigen::MatrixXd delta = -2.0 * scale * resid;
  if (logistic_) delta = delta.cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
  for (std::size_t l = L; l-- > 0;) {
    const Eigen::MatrixXd& in = l == 0 ? XT : A[l];
    Eigen::Map<Eigen::MatrixXd> gW(grad->data() + weight_offset(l), sizes_[l + 1], sizes_[l]);
    Eigen::Map<Eigen::VectorXd> gb(grad->data() + bias_offset(l), sizes_[l + 1]);
    gW.noalias() = delta * in.transpose();
    if (l1 > 0.0) gW += l1 * weight(l).unaryExpr([](double w) { return double((w > 0.0) - (w < 0.0)); });
    gb = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weight(l).transpose() * delta;
      delta = back.cwiseProduct((Z[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

Ann::Ann(Task task, std::uint64_t seed, std::vector<std::string> manifest, Preprocessor pre, Mlp net, double y_mean,
         double y_scale, FitInfo info)
    : Model(LearnerKind::ann, task, seed, std::move(manifest)),
      pre_(std::move(pre)),
      net_(std::move(net)),
      y_mean_(y_mean),
      y_scale_(y_scale),
      info_(std::move(info)) {}

std::vector<double> Ann::predict_columns(const ColumnViews& cols, std::size_t rows) const {
  Eigen::MatrixXd XT = pre_.transform(cols, rows).transpose();
  if (XT.rows() == 0) XT = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(rows));
  Eigen::VectorXd f = net_.forward(XT);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double v = f(static_cast<Eigen::Index>(r));
    out[r] = task() == Task::regression ? y_mean_ + y_scale_ * v : v;
  }
  return out;
}

std::vector<double> Ann::raw_importance(const FeatureMatrix* X_val, std::span<const double> y_val) const {
  if (!X_val) throw Error("ann importance needs validation data");
  const ColumnViews cols = align(*X_val);
  if (pre_.outputs().empty()) return std::vector<double>(manifest().size(), 0.0);
  const bool regression = task() == Task::regression;
  auto head = [&](const Eigen::MatrixXd& Z1) -> Eigen::VectorXd {
    Eigen::VectorXd f = net_.forward_from_first(Z1);
    if (regression) f = (f.array() * y_scale_ + y_mean_).matrix();
    return f;
  };
  return affine_permutation_importance(pre_, net_.weight(0), net_.bias(0), head, cols, X_val->rows(), y_val,
                                       seed());
}

nlohmann::json Ann::parameters() const {
  const auto& theta = net_.parameters();
  return {{"preprocessor", pre_.to_json()},
          {"layer_sizes", net_.layer_sizes()},
          {"logistic_output", net_.logistic_output()},
          {"theta", std::vector<double>(theta.data(), theta.data() + theta.size())},
          {"y_mean", y_mean_},
          {"y_scale", y_scale_},
          {"epochs_run", info_.epochs_run},
          {"best_epoch", info_.best_epoch},
          {"restarts", info_.restarts},
          {"learning_rate", info_.learning_rate}};
}

TrainedModel Ann::from_parameters(Task task, std::uint64_t seed, std::vector<std::string> manifest,
                                  const nlohmann::json& params) {
  Mlp net(params.at("layer_sizes").get<std::vector<int>>(), params.at("logistic_output").get<bool>());
  auto theta = params.at("theta").get<std::vector<double>>();
  if (theta.size() != net.parameter_count()) throw Error("corrupt ann: parameter count mismatch");
  net.parameters() = Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  Preprocessor pre = Preprocessor::from_json(params.at("preprocessor"));
  if (static_cast<int>(std::max<std::size_t>(pre.outputs().size(), 1)) != net.layer_sizes().front())
    throw Error("corrupt ann: input width differs from preprocessor");
  FitInfo info;
  info.epochs_run = params.at("epochs_run").get<int>();
  info.best_epoch = params.at("best_epoch").get<int>();
  info.restarts = params.at("restarts").get<int>();
  info.learning_rate = params.at("learning_rate").get<double>();
  return std::make_shared<Ann>(task, seed, std::move(manifest), std::move(pre), std::move(net),
                               params.at("y_mean").get<double>(), params.at("y_scale").get<double>(), std::move(info));
}

TrainedModel fit_ann(const FeatureMatrix& X, std::span<const double> y, const LearnerConfig& cfg,
                     const ValidationData& validation) {
  const std::size_t n = X.rows();
  if (n == 0) throw Error("ann: no training rows");
  const AnnConfig& a = cfg.ann;
  const ColumnViews cols = views_of(X);
  Preprocessor pre = Preprocessor::fit(cols, n);
  const Eigen::MatrixXd XT = pre.transform(cols, n).transpose();
  const bool regression = cfg.task == Task::regression;

  double y_mean = 0.0, y_scale = 1.0;
  if (regression) {
    y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - y_mean) * (v - y_mean);
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0.0) y_scale = sd;
  }
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) target(static_cast<Eigen::Index>(i)) = (y[i] - y_mean) / y_scale;

  const bool use_validation = a.keep_best_epoch && validation.X && validation.X->rows() > 0;
  Eigen::MatrixXd VT;
  if (use_validation) {
    if (validation.y.size() != validation.X->rows()) throw Error("ann: validation target length mismatch");
    ColumnViews vcols;
    for (const auto& name : X.names()) {
      auto c = validation.X->find(name);
      if (!c) throw Error("ann: validation data lacks column '" + name + "'");
      vcols.push_back(validation.X->column(*c));
    }
    VT = pre.transform(vcols, validation.X->rows()).transpose();
  }

  std::vector<int> sizes{static_cast<int>(pre.outputs().size())};
  if (sizes.front() == 0) sizes.front() = 1;  // every input constant: one zero column keeps shapes valid
  Eigen::MatrixXd XTw = XT.rows() ? XT : Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd VTw = (use_validation && VT.rows() == 0) ? Eigen::MatrixXd::Zero(1, VT.cols()) : VT;
  for (int h : a.hidden) sizes.push_back(h);
  sizes.push_back(1);

  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(a.batch_size), n);
  Ann::FitInfo info;
  Mlp net(sizes, !regression);
  for (int attempt = 0;; ++attempt) {
    const double lr = a.learning_rate / std::pow(2.0, attempt);
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));
    net.initialize(rng);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(net.parameters().size());
    Eigen::VectorXd v = m, grad = m;
    Eigen::VectorXd best_theta = net.parameters();
    double best_val = std::numeric_limits<double>::infinity();
    info = Ann::FitInfo{};
    info.learning_rate = lr;
    info.restarts = attempt;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd XB(XTw.rows(), static_cast<Eigen::Index>(batch));
    Eigen::VectorXd yB(static_cast<Eigen::Index>(batch));
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double b1t = 1.0, b2t = 1.0;
    bool diverged = false;

    for (int epoch = 1; epoch <= a.epochs && !diverged; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t len = std::min(batch, n - start);
        XB.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(len));
        yB.conservativeResize(static_cast<Eigen::Index>(len));
        for (std::size_t k = 0; k < len; ++k) {
          XB.col(static_cast<Eigen::Index>(k)) = XTw.col(static_cast<Eigen::Index>(order[start + k]));
          yB(static_cast<Eigen::Index>(k)) = target(static_cast<Eigen::Index>(order[start + k]));
        }
        double loss = net.objective(XB, yB, a.l1, &grad, static_cast<double>(n) / static_cast<double>(len));
        if (!std::isfinite(loss) || !grad.allFinite()) {
          diverged = true;
          break;
        }
        b1t *= beta1;
        b2t *= beta2;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
        net.parameters().array() -=
            lr * (m.array() / (1.0 - b1t)) / ((v.array() / (1.0 - b2t)).sqrt() + eps);
      }
      if (diverged) break;
      double train_loss = net.objective(XTw, target, a.l1, nullptr) / static_cast<double>(n);
      if (!std::isfinite(train_loss)) {
        diverged = true;
        break;
      }
      info.train_loss.push_back(train_loss);
      info.epochs_run = epoch;
      if (use_validation) {
        Eigen::VectorXd f = net.forward(VTw);
        double mse = 0.0;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
          double pred = regression ? y_mean + y_scale * f(i) : f(i);
          double d = pred - validation.y[static_cast<std::size_t>(i)];
          mse += d * d;
        }
        mse /= static_cast<double>(f.size());
        info.validation_loss.push_back(mse);
        if (mse < best_val) {
          best_val = mse;
          best_theta = net.parameters();
          info.best_epoch = epoch;
        }
      }
    }
    if (!diverged) {
      if (use_validation && info.best_epoch > 0) net.parameters() = best_theta;
      if (!use_validation) info.best_epoch = info.epochs_run;
      break;
    }
    if (attempt == kMaxRestarts) {
      throw Error("ann: training loss became non-finite after " + std::to_string(kMaxRestarts) +
                  " learning-rate halvings");
    }
  }
  return std::make_shared<Ann>(cfg.task, cfg.seed, X.names(), std::move(pre), std::move(net), y_mean, y_scale,
                               std::move(info));
}

}  // namespace splag
