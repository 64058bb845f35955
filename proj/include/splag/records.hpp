#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splag/bbl.hpp"

namespace splag {

/// Floor area breakdown in square feet. Components are each >= 0.
struct BuildingAreas {
  double total = 0.0;
  double commercial = 0.0;
  double residential = 0.0;
  double office = 0.0;
  double retail = 0.0;
  double garage = 0.0;
  double storage = 0.0;
  double factory = 0.0;
  double other = 0.0;
};

/// One tax lot in one assessment year.
struct ParcelRecord {
  BblKey bbl;
  int year = 0;
  std::optional<double> lat;
  std::optional<double> lon;
  std::string building_class;  // category letter + subclass, e.g. "C4"
  int borough = 0;
  std::string zip;
  int num_bldgs = 0;
  BuildingAreas area;
  double assessed_total = 0.0;
  int year_built = 0;
  double floors = 0.0;
  double units_res = 0.0;
  double units_total = 0.0;

  char category() const { return building_class.empty() ? '?' : building_class.front(); }
  bool has_location() const { return lat.has_value() && lon.has_value(); }
};

/// Throws Error when an area component is negative or coordinates are out of range.
void validate(const ParcelRecord& p);

struct SaleRecord {
  BblKey bbl;  // as reported until resolve_sales() canonicalizes it
  int sale_year = 0;
  double sale_price_total = 0.0;
  double gross_square_feet = 0.0;
};

/// Reported key -> canonical key. The mapping is functional: re-adding a key
/// with a different target throws.
class AliasTable {
 public:
  void add(const BblKey& reported, const BblKey& canonical);
  const BblKey* find(const BblKey& reported) const;
  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }
  const std::map<BblKey, BblKey>& entries() const { return map_; }

 private:
  std::map<BblKey, BblKey> map_;
};

/// Parcel-year row of the modeling panel with its sale outcome.
struct PropertyYearRecord {
  ParcelRecord parcel;
  bool sold = false;
  std::optional<double> sale_price_total;
  std::optional<double> sale_psf;

  const BblKey& bbl() const { return parcel.bbl; }
  int year() const { return parcel.year; }
  /// Regression rows need a positive price per square foot.
  bool is_regression_row() const { return sold && sale_psf && *sale_psf > 0.0; }
};

}  // namespace splag
