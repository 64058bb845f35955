#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "splag/models/learner.hpp"

namespace splag {

/// Per-column quantization used for split search. Bin b of column c holds
/// values x with edges[b-1] < x <= edges[b]; the last regular bin holds values
/// above every edge, and code `missing_code(c)` holds missing cells.
class BinnedMatrix {
 public:
  static constexpr std::size_t kMaxBins = 256;

  BinnedMatrix(const ColumnViews& cols, std::size_t rows, std::size_t max_bins = kMaxBins);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return edges_.size(); }
  std::uint16_t bin(std::size_t row, std::size_t col) const { return codes_[col * rows_ + row]; }
  const std::uint16_t* column(std::size_t col) const { return codes_.data() + col * rows_; }
  std::size_t regular_bins(std::size_t col) const { return edges_[col].size() + 1; }
  std::uint16_t missing_code(std::size_t col) const { return static_cast<std::uint16_t>(edges_[col].size() + 1); }
  const std::vector<double>& edges(std::size_t col) const { return edges_[col]; }

 private:
  std::size_t rows_;
  std::vector<std::vector<double>> edges_;
  std::vector<std::uint16_t> codes_;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 for a leaf
  double threshold = 0.0;     // left when x <= threshold
  std::uint16_t split_bin = 0;
  bool missing_left = false;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output
  double gain = 0.0;   // squared-error reduction of the split
  std::uint32_t count = 0;
};

struct TreeParams {
  std::size_t min_node = 1;   // minimum rows in each child
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t m_try = 0;      // 0 = all columns
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& mutable_nodes() { return nodes_; }
  std::size_t leaf_count() const;

  /// Index of the leaf reached by a raw row.
  std::int32_t leaf(const ColumnViews& cols, std::size_t row) const;
  /// Index of the leaf reached by a training row through its bin codes.
  std::int32_t leaf(const BinnedMatrix& X, std::size_t row) const;
  double predict(const ColumnViews& cols, std::size_t row) const { return nodes_[leaf(cols, row)].value; }

  /// Adds each split's gain to importance[feature].
  void accumulate_gain(std::span<double> importance) const;

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
};

/// Greedy least-squares tree on the multiset of `rows` (duplicates allowed,
/// as in a bootstrap sample). Leaves hold the mean target of their rows.
RegressionTree fit_regression_tree(const BinnedMatrix& X, std::span<const double> targets,
                                   std::span<const std::uint32_t> rows, const TreeParams& params,
                                   std::mt19937_64& rng);

}  // namespace splag
