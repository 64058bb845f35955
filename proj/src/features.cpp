#include "splag/features.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <tuple>

#include "splag/common.hpp"

namespace splag {

double sma(std::span<const double> values, int n) {
  if (n < 1) throw Error("moving-average window must be >= 1");
  if (values.empty()) return kMissing;
  std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n), values.size());
  double sum = 0.0;
  for (std::size_t i = values.size() - take; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(take);
}

double ema(std::span<const double> values, int n) {
  if (n < 1) throw Error("moving-average window must be >= 1");
  if (values.empty()) return kMissing;
  const double alpha = 2.0 / (n + 1.0);
  double e = values[0];
  for (std::size_t i = 1; i < values.size(); ++i) e = alpha * values[i] + (1.0 - alpha) * e;
  return e;
}

double percent_change(double current, double previous) {
  if (is_missing(current) || is_missing(previous) || previous == 0.0) return kMissing;
  return (current - previous) / previous;
}

const std::vector<std::string>& sale_history_columns() {
  static const std::vector<std::string> cols{
      "Last_Sale_Price",      "Last_Sale_Price_Total", "Last_Sale_Year",       "Years_Since_Last_Sale",
      "SMA_Price_2_year",     "SMA_Price_3_year",      "SMA_Price_5_year",     "Percent_Change_SMA_2",
      "Percent_Change_SMA_5", "EMA_Price_2_year",      "EMA_Price_3_year",     "EMA_Price_5_year",
      "Percent_Change_EMA_2", "Percent_Change_EMA_5"};
  return cols;
}

const std::vector<std::string>& usage_share_columns() {
  static const std::vector<std::string> cols{"Percent_Com",    "Percent_Res",    "Percent_Office",
                                             "Percent_Retail", "Percent_Garage", "Percent_Storage",
                                             "Percent_Factory", "Percent_Other"};
  return cols;
}

namespace {

void check_sorted(std::span<const PropertyYearRecord> panel) {
  for (std::size_t i = 1; i < panel.size(); ++i) {
    auto a = std::tie(panel[i - 1].parcel.bbl, panel[i - 1].parcel.year);
    auto b = std::tie(panel[i].parcel.bbl, panel[i].parcel.year);
    if (!(a < b)) throw Error("panel must be sorted by (bbl, year) with unique keys");
  }
}

std::vector<RowKey> keys_of(std::span<const PropertyYearRecord> panel) {
  std::vector<RowKey> keys;
  keys.reserve(panel.size());
  for (const auto& r : panel) keys.push_back({r.bbl(), r.year()});
  return keys;
}

/// Distinct panel years ascending, with previous-year lookup that skips gaps.
class YearIndex {
 public:
  explicit YearIndex(std::span<const PropertyYearRecord> panel) {
    for (const auto& r : panel) years_.push_back(r.year());
    std::sort(years_.begin(), years_.end());
    years_.erase(std::unique(years_.begin(), years_.end()), years_.end());
  }
  std::size_t size() const { return years_.size(); }
  int year(std::size_t i) const { return years_[i]; }
  std::size_t index(int year) const {
    return static_cast<std::size_t>(std::lower_bound(years_.begin(), years_.end(), year) - years_.begin());
  }
  /// Index of the previous panel year, or npos for the first.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t prev(std::size_t i) const { return (i == npos || i == 0) ? npos : i - 1; }
  std::optional<int> prev_year(int year) const {
    std::size_t i = index(year);
    if (i == 0 || i == npos) return std::nullopt;
    return years_[i - 1];
  }

 private:
  std::vector<int> years_;
};

double share(double part, double total) { return total > 0.0 ? part / total : kMissing; }

}  // namespace

FeatureMatrix base_features(std::span<const PropertyYearRecord> panel, const BaseFeatureOptions& options) {
  check_sorted(panel);
  const std::size_t n = panel.size();
  FeatureMatrix m(FeatureSetKind::base, keys_of(panel));

  auto add = [&](const std::string& name, const std::string& formula, auto&& f) {
    std::vector<double> v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = f(panel[r]);
    m.add_column(name, std::move(v), FeatureSetKind::base, formula);
  };
  using R = const PropertyYearRecord&;

  add("lat", "raw.lat", [](R r) { return r.parcel.lat.value_or(kMissing); });
  add("lon", "raw.lon", [](R r) { return r.parcel.lon.value_or(kMissing); });
  add("NumBldgs", "raw.num_bldgs", [](R r) { return double(r.parcel.num_bldgs); });
  add("BldgArea", "raw.bldg_area", [](R r) { return r.parcel.area.total; });
  add("ComArea", "raw.com_area", [](R r) { return r.parcel.area.commercial; });
  add("ResArea", "raw.res_area", [](R r) { return r.parcel.area.residential; });
  add("OfficeArea", "raw.office_area", [](R r) { return r.parcel.area.office; });
  add("RetailArea", "raw.retail_area", [](R r) { return r.parcel.area.retail; });
  add("GarageArea", "raw.garage_area", [](R r) { return r.parcel.area.garage; });
  add("StrgeArea", "raw.storage_area", [](R r) { return r.parcel.area.storage; });
  add("FactryArea", "raw.factory_area", [](R r) { return r.parcel.area.factory; });
  add("OtherArea", "raw.other_area", [](R r) { return r.parcel.area.other; });
  add("AssessTot", "raw.assess_total", [](R r) { return r.parcel.assessed_total; });
  add("YearBuilt", "raw.year_built",
      [](R r) { return r.parcel.year_built > 0 ? double(r.parcel.year_built) : kMissing; });
  add("Building_Age", "year - year_built",
      [](R r) { return r.parcel.year_built > 0 ? double(r.year() - r.parcel.year_built) : kMissing; });
  add("NumFloors", "raw.num_floors", [](R r) { return r.parcel.floors; });
  add("UnitsRes", "raw.units_res", [](R r) { return r.parcel.units_res; });
  add("UnitsTotal", "raw.units_total", [](R r) { return r.parcel.units_total; });

  for (char cat : {'A', 'B', 'C', 'D', 'F', 'G', 'L', 'O'}) {
    add(std::string("BldgCat_") + cat, "onehot.category",
        [cat](R r) { return r.parcel.category() == cat ? 1.0 : 0.0; });
  }
  for (int b = 1; b <= 5; ++b) {
    add("Borough_" + std::to_string(b), "onehot.borough", [b](R r) { return r.parcel.borough == b ? 1.0 : 0.0; });
  }
  {
    // Zip levels ranked by distinct parcel count, ties by name.
    std::map<std::string, std::size_t> parcels_per_zip;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == 0 || panel[r].bbl() != panel[r - 1].bbl()) ++parcels_per_zip[panel[r].parcel.zip];
    }
    std::vector<std::pair<std::string, std::size_t>> levels(parcels_per_zip.begin(), parcels_per_zip.end());
    std::stable_sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    bool overflow = levels.size() > options.zip_level_cap;
    if (overflow) levels.resize(options.zip_level_cap);
    std::sort(levels.begin(), levels.end());
    for (const auto& [zip, count] : levels) {
      add("Zip_" + zip, "onehot.zip", [&zip](R r) { return r.parcel.zip == zip ? 1.0 : 0.0; });
    }
    if (overflow) {
      add("Zip_other", "onehot.zip_other", [&levels](R r) {
        return std::none_of(levels.begin(), levels.end(), [&](const auto& l) { return l.first == r.parcel.zip; })
                   ? 1.0
                   : 0.0;
      });
    }
  }

  add("has_building_area", "1{bldg_area > 0}", [](R r) { return r.parcel.area.total > 0.0 ? 1.0 : 0.0; });
  add("Percent_Com", "com_area / bldg_area", [](R r) { return share(r.parcel.area.commercial, r.parcel.area.total); });
  add("Percent_Res", "res_area / bldg_area", [](R r) { return share(r.parcel.area.residential, r.parcel.area.total); });
  add("Percent_Office", "office_area / bldg_area", [](R r) { return share(r.parcel.area.office, r.parcel.area.total); });
  add("Percent_Retail", "retail_area / bldg_area", [](R r) { return share(r.parcel.area.retail, r.parcel.area.total); });
  add("Percent_Garage", "garage_area / bldg_area", [](R r) { return share(r.parcel.area.garage, r.parcel.area.total); });
  add("Percent_Storage", "storage_area / bldg_area",
      [](R r) { return share(r.parcel.area.storage, r.parcel.area.total); });
  add("Percent_Factory", "factory_area / bldg_area",
      [](R r) { return share(r.parcel.area.factory, r.parcel.area.total); });
  add("Percent_Other", "other_area / bldg_area", [](R r) { return share(r.parcel.area.other, r.parcel.area.total); });

  // Sale history: one sequential pass per parcel in year order.
  const auto& hist_names = sale_history_columns();
  std::vector<std::vector<double>> hist(hist_names.size(), std::vector<double>(n, kMissing));
  enum { kLast, kLastTotal, kLastYear, kYearsSince, kSma2, kSma3, kSma5, kPcSma2, kPcSma5, kEma2, kEma3, kEma5,
         kPcEma2, kPcEma5 };

  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && panel[end].bbl() == panel[begin].bbl()) ++end;

    std::vector<double> psf_history;
    double last_total = kMissing;
    double last_sale_year = kMissing;
    for (std::size_t r = begin; r < end; ++r) {
      const auto& row = panel[r];
      hist[kLast][r] = psf_history.empty() ? kMissing : psf_history.back();
      hist[kLastTotal][r] = last_total;
      hist[kLastYear][r] = last_sale_year;
      hist[kYearsSince][r] = is_missing(last_sale_year) ? kMissing : row.year() - last_sale_year;
      hist[kSma2][r] = sma(psf_history, 2);
      hist[kSma3][r] = sma(psf_history, 3);
      hist[kSma5][r] = sma(psf_history, 5);
      hist[kEma2][r] = ema(psf_history, 2);
      hist[kEma3][r] = ema(psf_history, 3);
      hist[kEma5][r] = ema(psf_history, 5);
      if (r > begin) {
        hist[kPcSma2][r] = percent_change(hist[kSma2][r], hist[kSma2][r - 1]);
        hist[kPcSma5][r] = percent_change(hist[kSma5][r], hist[kSma5][r - 1]);
        hist[kPcEma2][r] = percent_change(hist[kEma2][r], hist[kEma2][r - 1]);
        hist[kPcEma5][r] = percent_change(hist[kEma5][r], hist[kEma5][r - 1]);
      }
      if (row.sold) {
        last_sale_year = row.year();
        if (row.sale_price_total && *row.sale_price_total > 0.0) last_total = *row.sale_price_total;
        if (row.sale_psf && *row.sale_psf > 0.0) psf_history.push_back(*row.sale_psf);
      }
    }
    begin = end;
  }
  static const std::array<const char*, 14> formulas{
      "last psf before t",     "last total before t",   "year of last sale before t", "t - last sale year",
      "sma(psf<t, 2)",         "sma(psf<t, 3)",         "sma(psf<t, 5)",             "pct_change(sma2, prev row)",
      "pct_change(sma5, prev row)", "ema(psf<t, 2)",    "ema(psf<t, 3)",             "ema(psf<t, 5)",
      "pct_change(ema2, prev row)", "pct_change(ema5, prev row)"};
  for (std::size_t k = 0; k < hist_names.size(); ++k) {
    m.add_column(hist_names[k], std::move(hist[k]), FeatureSetKind::base, formulas[k]);
  }
  return m;
}

FeatureMatrix zone_features(const FeatureMatrix& base, std::span<const PropertyYearRecord> panel) {
  if (base.rows() != panel.size()) throw Error("base matrix and panel row counts differ");
  const std::size_t n = panel.size();
  FeatureMatrix m = base;
  m.set_kind(FeatureSetKind::zone);
  YearIndex years(panel);

  std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_zip;
  std::map<std::tuple<std::string, int, char>, std::vector<std::size_t>> by_zip_type;
  std::map<std::pair<std::string, int>, double> sold_count;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& p = panel[r].parcel;
    by_zip[{p.zip, p.year}].push_back(r);
    by_zip_type[{p.zip, p.year, p.category()}].push_back(r);
    if (panel[r].sold) sold_count[{p.zip, p.year}] += 1.0;
  }

  auto group_mean = [n](std::span<const double> values, const auto& groups) {
    std::vector<double> out(n, kMissing);
    for (const auto& [key, rows] : groups) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r : rows) {
        if (!is_missing(values[r])) {
          sum += values[r];
          ++count;
        }
      }
      double mean = count ? sum / static_cast<double>(count) : kMissing;
      for (std::size_t r : rows) out[r] = mean;
    }
    return out;
  };

  for (const auto& name : sale_history_columns()) {
    auto values = base.column(name);
    m.add_column(name + "_zip_average", group_mean(values, by_zip), FeatureSetKind::zone,
                 "mean over (zip, year) of " + name);
  }
  for (const auto& name : sale_history_columns()) {
    auto values = base.column(name);
    m.add_column(name + "_bt_only", group_mean(values, by_zip_type), FeatureSetKind::zone,
                 "mean over (zip, year, category) of " + name);
  }

  auto count_at = [&](const std::string& zip, int year) {
    auto it = sold_count.find({zip, year});
    return it == sold_count.end() ? 0.0 : it->second;
  };
  std::vector<double> last_year(n, kMissing), last_year_pc(n, kMissing);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& p = panel[r].parcel;
    auto prev = years.prev_year(p.year);
    if (!prev) continue;
    last_year[r] = count_at(p.zip, *prev);
    if (auto prev2 = years.prev_year(*prev)) last_year_pc[r] = percent_change(last_year[r], count_at(p.zip, *prev2));
  }
  m.add_column("Last_Year_Zip_Sold", std::move(last_year), FeatureSetKind::zone, "sales in zip in previous year");
  m.add_column("Last_Year_Zip_Sold_Percent_Change", std::move(last_year_pc), FeatureSetKind::zone,
               "pct_change(Last_Year_Zip_Sold, year before)");
  return m;
}

namespace {

const std::vector<std::string>& spatial_attribute_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> v = usage_share_columns();
    for (const char* c : {"SMA_Price_2_year", "SMA_Price_3_year", "SMA_Price_5_year", "Percent_Change_SMA_2",
                          "Percent_Change_SMA_5", "EMA_Price_2_year", "EMA_Price_3_year", "EMA_Price_5_year",
                          "Percent_Change_EMA_2", "Percent_Change_EMA_5"}) {
      v.emplace_back(c);
    }
    return v;
  }();
  return cols;
}

constexpr std::size_t kCountLags = 5;  // total sold, res units, all units, sf, avg years since last sale

struct SaleLags {
  std::array<double, 4> sums{kMissing, kMissing, kMissing, kMissing};
  double percent_sold = kMissing;
};

struct AttributeLags {
  double avg_years_since = kMissing;
  std::vector<double> dist;
  std::vector<double> basic;
};

class SpatialLagBuilder {
 public:
  SpatialLagBuilder(const FeatureMatrix& base, std::span<const PropertyYearRecord> panel, const NeighborGraph& graph)
      : panel_(panel), graph_(graph), years_(panel) {
    const std::size_t ny = years_.size();
    row_at_.assign(graph.size() * ny, -1);
    row_node_.assign(panel.size(), -1);
    for (std::size_t r = 0; r < panel.size(); ++r) {
      if (!panel[r].parcel.has_location()) continue;
      if (auto node = graph.index_of(panel[r].bbl())) {
        row_node_[r] = static_cast<std::ptrdiff_t>(*node);
        row_at_[*node * ny + years_.index(panel[r].year())] = static_cast<std::ptrdiff_t>(r);
      }
    }
    years_since_ = base.column("Years_Since_Last_Sale");
    for (const auto& name : spatial_attribute_columns()) attrs_.push_back(base.column(name));
  }

  std::ptrdiff_t node_of_row(std::size_t r) const { return row_node_[r]; }
  std::size_t year_index(std::size_t r) const { return years_.index(panel_[r].year()); }
  std::size_t prev(std::size_t yi) const { return years_.prev(yi); }

  /// Neighbor sales in the panel year before yi.
  SaleLags sales(std::size_t node, std::size_t yi) const {
    SaleLags out;
    std::size_t py = years_.prev(yi);
    if (py == YearIndex::npos) return out;
    auto nbrs = graph_.neighbors(node);
    double count = 0, res = 0, all = 0, sf = 0;
    for (const auto& nb : nbrs) {
      std::ptrdiff_t r = row_at_[nb.index * years_.size() + py];
      if (r < 0 || !panel_[r].sold) continue;
      const auto& p = panel_[r].parcel;
      count += 1.0;
      res += p.units_res;
      all += p.units_total;
      sf += p.area.total;
    }
    out.sums = {count, res, all, sf};
    out.percent_sold = nbrs.empty() ? kMissing : count / static_cast<double>(nbrs.size());
    return out;
  }

  AttributeLags attributes(std::size_t node, std::size_t yi) const {
    AttributeLags out;
    const std::size_t k = attrs_.size();
    out.dist.assign(k, kMissing);
    out.basic.assign(k, kMissing);
    if (yi == YearIndex::npos) return out;
    std::vector<double> sum(k, 0.0), wsum(k, 0.0), wtot(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    double ys_sum = 0.0;
    std::size_t ys_count = 0;
    for (const auto& nb : graph_.neighbors(node)) {
      std::ptrdiff_t r = row_at_[nb.index * years_.size() + yi];
      if (r < 0) continue;
      double w = 1.0 / std::max(nb.distance, kMinWeightDistanceM);
      double ys = years_since_[r];
      if (!is_missing(ys)) {
        ys_sum += ys;
        ++ys_count;
      }
      for (std::size_t a = 0; a < k; ++a) {
        double v = attrs_[a][r];
        if (is_missing(v)) continue;
        sum[a] += v;
        ++count[a];
        wsum[a] += w * v;
        wtot[a] += w;
      }
    }
    if (ys_count) out.avg_years_since = ys_sum / static_cast<double>(ys_count);
    for (std::size_t a = 0; a < k; ++a) {
      if (!count[a]) continue;
      out.basic[a] = sum[a] / static_cast<double>(count[a]);
      out.dist[a] = wsum[a] / wtot[a];
    }
    return out;
  }

 private:
  std::span<const PropertyYearRecord> panel_;
  const NeighborGraph& graph_;
  YearIndex years_;
  std::vector<std::ptrdiff_t> row_at_;
  std::vector<std::ptrdiff_t> row_node_;
  std::span<const double> years_since_;
  std::vector<std::span<const double>> attrs_;
};

double add_or_missing(double a, double b) { return (is_missing(a) || is_missing(b)) ? kMissing : a + b; }

}  // namespace

FeatureMatrix spatial_lag_features(const FeatureMatrix& base, std::span<const PropertyYearRecord> panel,
                                   const NeighborGraph& graph) {
  if (base.rows() != panel.size()) throw Error("base matrix and panel row counts differ");
  check_sorted(panel);
  const std::size_t n = panel.size();
  SpatialLagBuilder builder(base, panel, graph);

  static const std::array<const char*, kCountLags> count_names{
      "Radius_Total_Sold_In_Year", "Radius_Res_Units_Sold_In_Year", "Radius_All_Units_Sold_In_Year",
      "Radius_SF_Sold_In_Year", "Radius_Average_Years_Since_Last_Sale"};
  const auto& attr_names = spatial_attribute_columns();
  const std::size_t na = attr_names.size();

  // [lag][variant] with variants: value, sum_over_2_years, percent_change, sum_over_2_years_percent_change
  std::vector<std::array<std::vector<double>, 4>> counts(kCountLags);
  for (auto& c : counts)
    for (auto& v : c) v.assign(n, kMissing);
  std::vector<double> percent_sold(n, kMissing), neighbor_count(n, kMissing);
  // [attr][variant] with variants: dist, basic_mean, dist_perc_change, basic_mean_perc_change
  std::vector<std::array<std::vector<double>, 4>> attrs(na);
  for (auto& a : attrs)
    for (auto& v : a) v.assign(n, kMissing);

  for (std::size_t r = 0; r < n; ++r) {
    std::ptrdiff_t node = builder.node_of_row(r);
    if (node < 0 || graph.neighbors(node).empty()) continue;
    std::size_t y0 = builder.year_index(r);
    std::size_t y1 = builder.prev(y0);
    std::size_t y2 = builder.prev(y1);

    SaleLags s0 = builder.sales(node, y0), s1, s2;
    AttributeLags a0 = builder.attributes(node, y0);
    AttributeLags a1 = builder.attributes(node, y1);
    AttributeLags a2 = builder.attributes(node, y2);
    if (y1 != YearIndex::npos) s1 = builder.sales(node, y1);
    if (y2 != YearIndex::npos) s2 = builder.sales(node, y2);

    auto lag_value = [&](std::size_t k, const SaleLags& s, const AttributeLags& a) {
      return k < 4 ? s.sums[k] : a.avg_years_since;
    };
    for (std::size_t k = 0; k < kCountLags; ++k) {
      double v0 = lag_value(k, s0, a0), v1 = lag_value(k, s1, a1), v2 = lag_value(k, s2, a2);
      double sum0 = add_or_missing(v0, v1), sum1 = add_or_missing(v1, v2);
      counts[k][0][r] = v0;
      counts[k][1][r] = sum0;
      counts[k][2][r] = percent_change(v0, v1);
      counts[k][3][r] = percent_change(sum0, sum1);
    }
    percent_sold[r] = s0.percent_sold;
    neighbor_count[r] = static_cast<double>(graph.neighbors(node).size());
    for (std::size_t a = 0; a < na; ++a) {
      attrs[a][0][r] = a0.dist[a];
      attrs[a][1][r] = a0.basic[a];
      attrs[a][2][r] = percent_change(a0.dist[a], a1.dist[a]);
      attrs[a][3][r] = percent_change(a0.basic[a], a1.basic[a]);
    }
  }

  FeatureMatrix m = base;
  m.set_kind(FeatureSetKind::spatial);
  constexpr auto S = FeatureSetKind::spatial;
  for (std::size_t k = 0; k < kCountLags; ++k) {
    std::string name = count_names[k];
    m.add_column(name, std::move(counts[k][0]), S, k < 4 ? "neighbor sales in previous year" : "neighbor mean");
    m.add_column(name + "_sum_over_2_years", std::move(counts[k][1]), S, "lag(t) + lag(t-1)");
    m.add_column(name + "_percent_change", std::move(counts[k][2]), S, "pct_change(lag(t), lag(t-1))");
    m.add_column(name + "_sum_over_2_years_percent_change", std::move(counts[k][3]), S,
                 "pct_change(sum2(t), sum2(t-1))");
  }
  m.add_column("Percent_Neighbors_Sold", std::move(percent_sold), S, "neighbors sold in previous year / |N|");
  m.add_column("Radius_Neighbor_Count", std::move(neighbor_count), S, "|N|");
  for (std::size_t a = 0; a < na; ++a) {
    const std::string& name = attr_names[a];
    m.add_column(name + "_dist", std::move(attrs[a][0]), S, "idw mean over neighbors");
    m.add_column(name + "_basic_mean", std::move(attrs[a][1]), S, "mean over neighbors");
    m.add_column(name + "_dist_perc_change", std::move(attrs[a][2]), S, "pct_change(idw(t), idw(t-1))");
    m.add_column(name + "_basic_mean_perc_change", std::move(attrs[a][3]), S, "pct_change(mean(t), mean(t-1))");
  }
  return m;
}

NeighborGraph build_parcel_graph(std::span<const PropertyYearRecord> panel, double radius_m, double cell_size_m,
                                 unsigned threads) {
  check_sorted(panel);
  std::vector<GeoPoint> points;
  for (std::size_t r = 0; r < panel.size(); ++r) {
    const auto& p = panel[r].parcel;
    if (!p.has_location()) continue;
    if (!points.empty() && points.back().id == p.bbl) continue;
    points.push_back({p.bbl, *p.lat, *p.lon});
  }
  Projection proj = project(points);
  return neighbors_grid(proj.points, radius_m, cell_size_m, nullptr, threads);
}

Labels make_labels(std::span<const PropertyYearRecord> panel) {
  Labels labels;
  labels.sold.reserve(panel.size());
  labels.sale_psf.reserve(panel.size());
  for (const auto& r : panel) {
    labels.sold.push_back(r.sold ? 1.0 : 0.0);
    labels.sale_psf.push_back(r.is_regression_row() ? *r.sale_psf : kMissing);
  }
  return labels;
}

}  // namespace splag
