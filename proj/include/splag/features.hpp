#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "splag/feature_matrix.hpp"
#include "splag/records.hpp"
#include "splag/spatial_index.hpp"

namespace splag {

/// Mean of the last min(n, size) values; missing for an empty history.
double sma(std::span<const double> values, int n);

/// EMA_t = a * x_t + (1 - a) * EMA_{t-1} with a = 2 / (n + 1), seeded with the
/// first observation; missing for an empty history.
double ema(std::span<const double> values, int n);

/// (current - previous) / previous; missing when previous is 0 or either side
/// is missing.
double percent_change(double current, double previous);

/// IDW weights are computed with distances clamped from below to this value.
inline constexpr double kMinWeightDistanceM = 1.0;

struct BaseFeatureOptions {
  std::size_t zip_level_cap = 50;  // most common zips get indicator columns, the rest share Zip_other
};

/// Sale-history columns carried into the zone and spatial aggregates.
const std::vector<std::string>& sale_history_columns();
/// Building-usage share columns (Percent_Com ... Percent_Other).
const std::vector<std::string>& usage_share_columns();

/// Raw attributes, usage shares and sale-history features. Every history
/// feature for year t uses only sales strictly before t. Panel must be sorted
/// by (bbl, year) with unique keys.
FeatureMatrix base_features(std::span<const PropertyYearRecord> panel, const BaseFeatureOptions& options = {});

/// Base columns plus per-(zip, year) means of the history features, the same
/// restricted to the row's building category ("_bt_only"), and the zip's sale
/// count in the previous panel year.
FeatureMatrix zone_features(const FeatureMatrix& base, std::span<const PropertyYearRecord> panel);

/// Base columns plus fixed-radius lags over the neighbor graph. Sale counts
/// come from the previous panel year; attribute lags use the neighbors'
/// current-year rows, whose history features already exclude year t.
FeatureMatrix spatial_lag_features(const FeatureMatrix& base, std::span<const PropertyYearRecord> panel,
                                   const NeighborGraph& graph);

/// Neighbor graph over the distinct located parcels of a panel. A parcel's
/// location is taken from its earliest row.
NeighborGraph build_parcel_graph(std::span<const PropertyYearRecord> panel, double radius_m, double cell_size_m,
                                 unsigned threads = 0);

struct Labels {
  std::vector<double> sold;      // 0/1 for every row
  std::vector<double> sale_psf;  // target on regression rows, missing elsewhere

  bool is_regression_row(std::size_t r) const { return !std::isnan(sale_psf[r]); }
};

Labels make_labels(std::span<const PropertyYearRecord> panel);

}  // namespace splag
