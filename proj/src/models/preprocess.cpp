#include "splag/models/preprocess.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : v[mid - 1] + (v[mid] - v[mid - 1]) / 2.0;
}

}  // namespace

Preprocessor Preprocessor::fit(const ColumnViews& cols, std::size_t rows) {
  Preprocessor pre;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::vector<double> present;
    present.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r)
      if (!is_missing(cols[c][r])) present.push_back(cols[c][r]);
    const bool any_missing = present.size() < rows;
    pre.medians_.push_back(median(present));

    for (bool indicator : {false, true}) {
      if (indicator && !any_missing) continue;
      Output o;
      o.source = static_cast<std::uint32_t>(c);
      o.indicator = indicator;
      pre.outputs_.push_back(o);
      const std::size_t j = pre.outputs_.size() - 1;
      if (!indicator && !present.empty()) {
        auto [lo, hi] = std::minmax_element(present.begin(), present.end());
        pre.outputs_.back().lo = *lo;
        pre.outputs_.back().hi = *hi;
      }
      double sum = 0.0;
      for (std::size_t r = 0; r < rows; ++r) sum += pre.raw_value(j, cols[c][r]);
      const double mean = rows ? sum / static_cast<double>(rows) : 0.0;
      double ss = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        double d = pre.raw_value(j, cols[c][r]) - mean;
        ss += d * d;
      }
      const double sd = rows ? std::sqrt(ss / static_cast<double>(rows)) : 0.0;
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        pre.outputs_.pop_back();
        continue;
      }
      pre.outputs_.back().mean = mean;
      pre.outputs_.back().scale = sd;
    }
  }
  return pre;
}

Eigen::MatrixXd Preprocessor::transform(const ColumnViews& cols, std::size_t rows) const {
  if (cols.size() != medians_.size()) throw Error("preprocessor: column count differs from training");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(outputs_.size()));
  for (std::size_t j = 0; j < outputs_.size(); ++j) {
    auto src = cols[outputs_[j].source];
    for (std::size_t r = 0; r < rows; ++r) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = value(j, src[r]);
  }
  return X;
}

nlohmann::json Preprocessor::to_json() const {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : outputs_) {
    outs.push_back({o.source, o.indicator ? 1 : 0, std::isfinite(o.lo) ? nlohmann::json(o.lo) : nlohmann::json(),
                    std::isfinite(o.hi) ? nlohmann::json(o.hi) : nlohmann::json(), o.mean, o.scale});
  }
  return {{"medians", medians_}, {"outputs", outs}};
}

Preprocessor Preprocessor::from_json(const nlohmann::json& j) {
  Preprocessor pre;
  pre.medians_ = j.at("medians").get<std::vector<double>>();
  for (const auto& o : j.at("outputs")) {
    Output out;
    out.source = o.at(0).get<std::uint32_t>();
    out.indicator = o.at(1).get<int>() != 0;
    if (!o.at(2).is_null()) out.lo = o.at(2).get<double>();
    if (!o.at(3).is_null()) out.hi = o.at(3).get<double>();
    out.mean = o.at(4).get<double>();
    out.scale = o.at(5).get<double>();
    if (out.source >= pre.medians_.size()) throw Error("corrupt preprocessor: source index out of range");
    pre.outputs_.push_back(out);
  }
  return pre;
}

std::vector<double> affine_permutation_importance(const Preprocessor& pre, const Eigen::MatrixXd& W,
                                                  const Eigen::VectorXd& b,
                                                  const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& head,
                                                  const ColumnViews& cols, std::size_t rows,
                                                  std::span<const double> y, std::uint64_t seed, int repeats) {
  if (y.size() != rows) throw Error("permutation importance: target length differs from row count");
  std::vector<double> importance(pre.sources(), 0.0);
  if (rows == 0) return importance;
  const Eigen::MatrixXd X = pre.transform(cols, rows);
  const Eigen::MatrixXd Z = (W * X.transpose()).colwise() + b;
  Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(rows));
  const double base_mse = (head(Z) - target).squaredNorm() / static_cast<double>(rows);

  std::vector<std::vector<std::size_t>> outputs_of(pre.sources());
  for (std::size_t j = 0; j < pre.outputs().size(); ++j) outputs_of[pre.outputs()[j].source].push_back(j);

  std::vector<std::size_t> perm(rows);
  Eigen::RowVectorXd delta(static_cast<Eigen::Index>(rows));
  for (std::size_t c = 0; c < pre.sources(); ++c) {
    if (outputs_of[c].empty()) continue;  // column carries no signal into the model
    double total = 0.0;
    for (int k = 0; k < repeats; ++k) {
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 rng(mix_seed(seed, c * static_cast<std::uint64_t>(repeats) + static_cast<std::uint64_t>(k)));
      std::shuffle(perm.begin(), perm.end(), rng);
      Eigen::MatrixXd Zp = Z;
      for (std::size_t j : outputs_of[c]) {
        const auto jj = static_cast<Eigen::Index>(j);
        for (std::size_t r = 0; r < rows; ++r) {
          delta(static_cast<Eigen::Index>(r)) = X(static_cast<Eigen::Index>(perm[r]), jj) - X(static_cast<Eigen::Index>(r), jj);
        }
        Zp.noalias() += W.col(jj) * delta;
      }
      total += (head(Zp) - target).squaredNorm() / static_cast<double>(rows) - base_mse;
    }
    importance[c] = std::max(0.0, total / repeats);
  }
  return importance;
}

}  // namespace splag
