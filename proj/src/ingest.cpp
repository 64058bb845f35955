#include "splag/ingest.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "splag/common.hpp"

namespace splag {

void validate(const ParcelRecord& p) {
  const auto& a = p.area;
  for (double v : {a.total, a.commercial, a.residential, a.office, a.retail, a.garage, a.storage,
                   a.factory, a.other}) {
    if (v < 0.0) throw Error("negative building area for " + p.bbl.str());
  }
  if (p.lat && (*p.lat < -90.0 || *p.lat > 90.0)) throw Error("latitude out of range for " + p.bbl.str());
  if (p.lon && (*p.lon < -180.0 || *p.lon > 180.0)) throw Error("longitude out of range for " + p.bbl.str());
}

void AliasTable::add(const BblKey& reported, const BblKey& canonical) {
  auto [it, inserted] = map_.emplace(reported, canonical);
  if (!inserted && it->second != canonical) {
    throw Error("alias " + reported.str() + " maps to both " + it->second.str() + " and " +
                canonical.str());
  }
}

const BblKey* AliasTable::find(const BblKey& reported) const {
  auto it = map_.find(reported);
  return it == map_.end() ? nullptr : &it->second;
}

std::vector<SaleRecord> resolve_sales(std::span<const SaleRecord> sales, const AliasTable& aliases) {
  std::vector<SaleRecord> out(sales.begin(), sales.end());
  if (aliases.empty()) return out;
  for (auto& s : out) {
    if (const BblKey* canonical = aliases.find(s.bbl)) s.bbl = *canonical;
  }
  return out;
}

JoinResult join_panel(std::span<const ParcelRecord> parcels, std::span<const SaleRecord> sales) {
  using Key = std::pair<BblKey, int>;
  JoinResult result;
  result.total_sales = sales.size();

  std::vector<const ParcelRecord*> ordered;
  ordered.reserve(parcels.size());
  for (const auto& p : parcels) {
    validate(p);
    ordered.push_back(&p);
  }
  std::sort(ordered.begin(), ordered.end(), [](const ParcelRecord* a, const ParcelRecord* b) {
    return std::tie(a->bbl, a->year) < std::tie(b->bbl, b->year);
  });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->bbl == ordered[i - 1]->bbl && ordered[i]->year == ordered[i - 1]->year) {
      throw Error("duplicate parcel-year " + ordered[i]->bbl.str() + " " +
                  std::to_string(ordered[i]->year));
    }
  }
  result.parcel_years = ordered.size();

  std::map<Key, std::vector<const SaleRecord*>> by_key;
  for (const auto& s : sales) {
    if (s.sale_price_total < 0.0) throw Error("negative sale price for " + s.bbl.str());
    by_key[{s.bbl, s.sale_year}].push_back(&s);
  }
  std::size_t matched = 0;

  result.panel.reserve(ordered.size());
  for (const ParcelRecord* p : ordered) {
    PropertyYearRecord row;
    row.parcel = *p;
    if (!p->has_location()) ++result.missing_location_rows;
    auto it = by_key.find({p->bbl, p->year});
    if (it != by_key.end()) {
      matched += it->second.size();
      if (it->second.size() >= 2) {
        ++result.multi_sale_groups;
        continue;
      }
      const SaleRecord& s = *it->second.front();
      row.sold = true;
      row.sale_price_total = s.sale_price_total;
      if (s.gross_square_feet > 0.0) row.sale_psf = s.sale_price_total / s.gross_square_feet;
    }
    result.panel.push_back(std::move(row));
  }
  result.unmatched_sales = sales.size() - matched;
  return result;
}

FilterResult apply_global_filters(std::span<const PropertyYearRecord> panel) {
  FilterResult result;
  const auto& cats = included_categories();
  for (const auto& r : panel) {
    if (cats.count(r.parcel.category()) && r.parcel.num_bldgs <= kMaxBuildingsPerLot) {
      result.panel.push_back(r);
    }
  }
  result.retention =
      panel.empty() ? 1.0 : static_cast<double>(result.panel.size()) / static_cast<double>(panel.size());
  return result;
}

std::vector<PropertyYearRecord> subset_stage2(std::span<const PropertyYearRecord> panel,
                                              const Stage2Rule& rule) {
  std::vector<PropertyYearRecord> out;
  for (const auto& r : panel) {
    if (rule.matches(r)) out.push_back(r);
  }
  return out;
}

}  // namespace splag
