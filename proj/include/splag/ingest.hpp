#pragma once

#include <set>
#include <span>
#include <vector>

#include "splag/records.hpp"

namespace splag {

/// Replaces each sale's reported key by its canonical key when the alias
/// table has one; other records pass through unchanged.
std::vector<SaleRecord> resolve_sales(std::span<const SaleRecord> sales, const AliasTable& aliases);

struct JoinResult {
  std::vector<PropertyYearRecord> panel;  // sorted by (bbl, year)
  std::size_t parcel_years = 0;
  std::size_t multi_sale_groups = 0;  // (bbl, year) groups dropped for having >= 2 sales
  std::size_t total_sales = 0;
  std::size_t unmatched_sales = 0;  // sales with no parcel-year to join to
  std::size_t missing_location_rows = 0;

  double unmatched_rate() const {
    return total_sales == 0 ? 0.0 : static_cast<double>(unmatched_sales) / total_sales;
  }
};

/// Left join of parcel-years with (already resolved) sales on (bbl, year).
/// Parcel-years with two or more sales are dropped. Throws on duplicate
/// parcel-year input rows.
JoinResult join_panel(std::span<const ParcelRecord> parcels, std::span<const SaleRecord> sales);

/// Building categories that pass the global filter.
inline const std::set<char>& included_categories() {
  static const std::set<char> cats{'A', 'B', 'C', 'D', 'F', 'G', 'L', 'O'};
  return cats;
}

inline constexpr int kMaxBuildingsPerLot = 2;

struct FilterResult {
  std::vector<PropertyYearRecord> panel;
  double retention = 1.0;  // kept / input; 1 for empty input
};

FilterResult apply_global_filters(std::span<const PropertyYearRecord> panel);

/// Stage-2 subset rule. Borough codes: 1 Manhattan, 2 Bronx, 3 Brooklyn,
/// 4 Queens, 5 Staten Island.
struct Stage2Rule {
  std::set<char> categories{'C', 'D'};
  std::set<int> boroughs{1, 2, 3};

  bool matches(const PropertyYearRecord& r) const {
    return categories.count(r.parcel.category()) && boroughs.count(r.parcel.borough);
  }
};

std::vector<PropertyYearRecord> subset_stage2(std::span<const PropertyYearRecord> panel,
                                              const Stage2Rule& rule = {});

}  // namespace splag
