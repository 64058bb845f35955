#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splag/bbl.hpp"

namespace splag {

enum class FeatureSetKind { base, zone, spatial };

std::string to_string(FeatureSetKind kind);
FeatureSetKind parse_feature_set_kind(std::string_view text);

struct RowKey {
  BblKey bbl;
  int year = 0;
  auto operator<=>(const RowKey&) const = default;
};

struct ColumnInfo {
  std::string name;
  FeatureSetKind origin = FeatureSetKind::base;  // feature family that introduced the column
  std::string formula;                           // stable formula id for the manifest
};

/// Column-major numeric matrix over parcel-year rows. Missing cells are NaN.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(FeatureSetKind kind, std::vector<RowKey> keys);

  FeatureSetKind kind() const { return kind_; }
  void set_kind(FeatureSetKind kind) { kind_ = kind; }
  std::size_t rows() const { return keys_.size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<RowKey>& keys() const { return keys_; }
  const std::vector<ColumnInfo>& column_info() const { return info_; }
  std::vector<std::string> names() const;

  /// Throws on duplicate name or length mismatch.
  void add_column(std::string name, std::vector<double> values, FeatureSetKind origin, std::string formula);

  std::span<const double> column(std::size_t c) const { return columns_[c]; }
  std::span<const double> column(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  double at(std::size_t row, std::size_t col) const { return columns_[col][row]; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
  /// Keeps only the named columns, in the given order.
  FeatureMatrix select_columns(std::span<const std::string> names) const;

  /// Order-sensitive fingerprint of keys, names and cell bit patterns.
  std::uint64_t fingerprint() const;

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b);

 private:
  FeatureSetKind kind_ = FeatureSetKind::base;
  std::vector<RowKey> keys_;
  std::vector<ColumnInfo> info_;
  std::vector<std::vector<double>> columns_;
};

/// CSV with leading bbl,year columns (missing cells empty) plus a JSON
/// manifest "<path>.manifest.json" listing name, origin kind and formula id.
void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m,
                          const std::string& config_hash = {}, std::uint64_t seed = 0);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

}  // namespace splag
