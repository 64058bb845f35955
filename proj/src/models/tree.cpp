#include "splag/models/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"

namespace splag {

namespace {

double midpoint(double a, double b) { return a + (b - a) / 2.0; }

std::vector<double> column_edges(std::span<const double> values, std::size_t max_bins) {
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values)
    if (!is_missing(v)) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> unique = sorted;
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<double> edges;
  if (unique.size() <= max_bins) {
    for (std::size_t i = 1; i < unique.size(); ++i) edges.push_back(midpoint(unique[i - 1], unique[i]));
    return edges;
  }
  for (std::size_t k = 1; k < max_bins; ++k) {
    double v = sorted[k * sorted.size() / max_bins];
    auto next = std::upper_bound(unique.begin(), unique.end(), v);
    if (next == unique.end()) break;
    double e = midpoint(v, *next);
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

struct BinStat {
  std::uint16_t code;
  std::uint32_t count;
  double sum;
};

struct Split {
  double gain = 0.0;
  std::int32_t feature = -1;
  std::uint16_t bin = 0;
  double threshold = 0.0;
  bool missing_left = false;
};

}  // namespace

BinnedMatrix::BinnedMatrix(const ColumnViews& cols, std::size_t rows, std::size_t max_bins) : rows_(rows) {
  if (max_bins < 2 || max_bins > kMaxBins) throw Error("max_bins must be in [2, 256]");
  edges_.reserve(cols.size());
  codes_.resize(cols.size() * rows);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].size() != rows) throw Error("column length differs from row count");
    edges_.push_back(column_edges(cols[c], max_bins));
    const auto& e = edges_.back();
    auto missing = missing_code(c);
    std::uint16_t* out = codes_.data() + c * rows;
    for (std::size_t r = 0; r < rows; ++r) {
      double v = cols[c][r];
      out[r] = is_missing(v) ? missing
                             : static_cast<std::uint16_t>(std::lower_bound(e.begin(), e.end(), v) - e.begin());
    }
  }
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

std::int32_t RegressionTree::leaf(const ColumnViews& cols, std::size_t row) const {
  std::int32_t i = 0;
  while (nodes_[i].feature >= 0) {
    const TreeNode& n = nodes_[i];
    double x = cols[n.feature][row];
    bool left = is_missing(x) ? n.missing_left : x <= n.threshold;
    i = left ? n.left : n.right;
  }
  return i;
}

std::int32_t RegressionTree::leaf(const BinnedMatrix& X, std::size_t row) const {
  std::int32_t i = 0;
  while (nodes_[i].feature >= 0) {
    const TreeNode& n = nodes_[i];
    std::uint16_t code = X.bin(row, n.feature);
    bool left = code == X.missing_code(n.feature) ? n.missing_left : code <= n.split_bin;
    i = left ? n.left : n.right;
  }
  return i;
}

void RegressionTree::accumulate_gain(std::span<double> importance) const {
  for (const auto& n : nodes_)
    if (n.feature >= 0) importance[n.feature] += n.gain;
}

nlohmann::json RegressionTree::to_json() const {
  nlohmann::json f = nlohmann::json::array(), t = nlohmann::json::array(), ml = nlohmann::json::array(),
                 l = nlohmann::json::array(), r = nlohmann::json::array(), v = nlohmann::json::array(),
                 g = nlohmann::json::array(), c = nlohmann::json::array();
  for (const auto& n : nodes_) {
    f.push_back(n.feature);
    t.push_back(n.threshold);
    ml.push_back(n.missing_left ? 1 : 0);
    l.push_back(n.left);
    r.push_back(n.right);
    v.push_back(n.value);
    g.push_back(n.gain);
    c.push_back(n.count);
  }
  return {{"feature", f}, {"threshold", t}, {"missing_left", ml}, {"left", l},
          {"right", r},   {"value", v},     {"gain", g},          {"count", c}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  const auto& f = j.at("feature");
  std::vector<TreeNode> nodes(f.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& n = nodes[i];
    n.feature = f[i].get<std::int32_t>();
    n.threshold = j.at("threshold")[i].get<double>();
    n.missing_left = j.at("missing_left")[i].get<int>() != 0;
    n.left = j.at("left")[i].get<std::int32_t>();
    n.right = j.at("right")[i].get<std::int32_t>();
    n.value = j.at("value")[i].get<double>();
    n.gain = j.at("gain")[i].get<double>();
    n.count = j.at("count")[i].get<std::uint32_t>();
    if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= nodes.size() ||
                           static_cast<std::size_t>(n.right) >= nodes.size())) {
      throw Error("corrupt tree: child index out of range");
    }
  }
  if (nodes.empty()) throw Error("corrupt tree: no nodes");
  return RegressionTree(std::move(nodes));
}

RegressionTree fit_regression_tree(const BinnedMatrix& X, std::span<const double> targets,
                                   std::span<const std::uint32_t> rows, const TreeParams& params,
                                   std::mt19937_64& rng) {
  const std::size_t min_node = std::max<std::size_t>(1, params.min_node);
  if (rows.size() < min_node) throw Error("fewer rows than the minimum node size");
  if (rows.empty()) throw Error("cannot fit a tree on zero rows");
  const std::size_t p = X.cols();
  const std::size_t m = (params.m_try == 0 || params.m_try >= p) ? p : params.m_try;

  std::vector<std::uint32_t> work(rows.begin(), rows.end());
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> col_order(p);
  std::iota(col_order.begin(), col_order.end(), 0);
  std::vector<std::uint32_t> hist_count(BinnedMatrix::kMaxBins + 1);
  std::vector<double> hist_sum(BinnedMatrix::kMaxBins + 1);
  std::vector<BinStat> stats;
  std::vector<std::pair<std::uint16_t, double>> pairs;

  struct Task {
    std::int32_t node;
    std::size_t begin, end, depth;
  };
  std::vector<Task> stack;
  nodes.emplace_back();
  stack.push_back({0, 0, work.size(), 0});

  while (!stack.empty()) {
    Task task = stack.back();
    stack.pop_back();
    const std::size_t n = task.end - task.begin;
    double sum = 0.0;
    bool constant = true;
    const double first = targets[work[task.begin]];
    for (std::size_t i = task.begin; i < task.end; ++i) {
      double y = targets[work[i]];
      sum += y;
      constant = constant && y == first;
    }
    const double mean = sum / static_cast<double>(n);
    {
      TreeNode& node = nodes[task.node];
      node.value = mean;
      node.count = static_cast<std::uint32_t>(n);
    }
    if (constant || n < 2 * min_node || (params.max_depth && task.depth >= params.max_depth)) continue;
    double sse = 0.0;
    for (std::size_t i = task.begin; i < task.end; ++i) {
      double d = targets[work[i]] - mean;
      sse += d * d;
    }

    if (m < p) {
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, p - 1);
        std::swap(col_order[i], col_order[pick(rng)]);
      }
    }

    Split best;
    best.gain = 1e-12 * sse;
    const double parent_term = sum * sum / static_cast<double>(n);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t c = col_order[k];
      const std::uint16_t* codes = X.column(c);
      const std::uint16_t mcode = X.missing_code(c);
      stats.clear();
      std::uint32_t miss_n = 0;
      double miss_sum = 0.0;
      if (n * 4 < X.regular_bins(c)) {
        pairs.clear();
        for (std::size_t i = task.begin; i < task.end; ++i) pairs.emplace_back(codes[work[i]], targets[work[i]]);
        std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [code, y] : pairs) {
          if (code == mcode) {
            ++miss_n;
            miss_sum += y;
          } else if (!stats.empty() && stats.back().code == code) {
            ++stats.back().count;
            stats.back().sum += y;
          } else {
            stats.push_back({code, 1, y});
          }
        }
      } else {
        const std::size_t nb = X.regular_bins(c) + 1;
        std::fill_n(hist_count.begin(), nb, 0u);
        std::fill_n(hist_sum.begin(), nb, 0.0);
        for (std::size_t i = task.begin; i < task.end; ++i) {
          std::uint32_t r = work[i];
          ++hist_count[codes[r]];
          hist_sum[codes[r]] += targets[r];
        }
        miss_n = hist_count[mcode];
        miss_sum = hist_sum[mcode];
        for (std::uint16_t b = 0; b < mcode; ++b)
          if (hist_count[b]) stats.push_back({b, hist_count[b], hist_sum[b]});
      }

      const std::uint32_t regular_n = static_cast<std::uint32_t>(n) - miss_n;
      const double regular_sum = sum - miss_sum;
      auto consider = [&](std::uint32_t ln, double ls, std::uint16_t bin, double threshold, bool miss_left) {
        std::uint32_t rn = static_cast<std::uint32_t>(n) - ln;
        if (ln < min_node || rn < min_node) return;
        double rs = sum - ls;
        double gain = ls * ls / ln + rs * rs / rn - parent_term;
        if (gain > best.gain) best = {gain, static_cast<std::int32_t>(c), bin, threshold, miss_left};
      };

      std::uint32_t cl = 0;
      double sl = 0.0;
      for (std::size_t s = 0; s + 1 < stats.size(); ++s) {
        cl += stats[s].count;
        sl += stats[s].sum;
        const std::uint16_t bin = stats[s].code;
        const double threshold = X.edges(c)[bin];
        if (miss_n) {
          consider(cl + miss_n, sl + miss_sum, bin, threshold, true);
          consider(cl, sl, bin, threshold, false);
        } else {
          consider(cl, sl, bin, threshold, cl >= regular_n - cl);
        }
      }
      // Missingness alone as the split.
      if (miss_n && regular_n) {
        consider(regular_n, regular_sum, static_cast<std::uint16_t>(mcode - 1), std::numeric_limits<double>::max(),
                 false);
      }
    }
    if (best.feature < 0) continue;

    const std::uint16_t* codes = X.column(best.feature);
    const std::uint16_t mcode = X.missing_code(best.feature);
    auto mid = std::stable_partition(work.begin() + task.begin, work.begin() + task.end, [&](std::uint32_t r) {
      std::uint16_t code = codes[r];
      return code == mcode ? best.missing_left : code <= best.bin;
    });
    const std::size_t split = static_cast<std::size_t>(mid - work.begin());

    const auto left = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes.emplace_back();
    TreeNode& node = nodes[task.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.split_bin = best.bin;
    node.missing_left = best.missing_left;
    node.gain = best.gain;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, split, task.end, task.depth + 1});
    stack.push_back({left, task.begin, split, task.depth + 1});
  }
  return RegressionTree(std::move(nodes));
}

}  // namespace splag
