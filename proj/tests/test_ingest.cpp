#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "splag/bbl.hpp"
#include "splag/common.hpp"
#include "splag/csv_io.hpp"
#include "splag/ingest.hpp"
#include "splag/spatial_index.hpp"
#include "splag/synth.hpp"
#include "test_support.hpp"

using namespace splag;
namespace fs = std::filesystem;

namespace {

ParcelRecord parcel(const BblKey& bbl, int year, std::string cls = "A1", int num_bldgs = 1) {
  ParcelRecord p = test::row(bbl, year, std::move(cls)).parcel;
  p.num_bldgs = num_bldgs;
  return p;
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("splag_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("bbl canonical form and validation") {
  CHECK(make_bbl(1, 829, 16).str() == "1_829_16");
  CHECK(make_bbl(5, 0, 0).str() == "5_0_0");
  CHECK_THROWS_AS(make_bbl(6, 1, 1), InvalidKeyError);
  CHECK_THROWS_AS(make_bbl(0, 1, 1), InvalidKeyError);
  CHECK_THROWS_AS(make_bbl(1, -1, 1), InvalidKeyError);
  for (const char* text : {"1_829_16", "3_12345_7501", "5_0_0"}) CHECK(BblKey::parse(text).str() == text);
  CHECK_THROWS_AS(BblKey::parse("1-829-16"), InvalidKeyError);
  CHECK_THROWS_AS(BblKey::parse("1_829"), InvalidKeyError);
  CHECK_THROWS_AS(BblKey::parse("1_x_16"), InvalidKeyError);
}

TEST_CASE("alias resolution") {
  AliasTable aliases;
  aliases.add(make_bbl(1, 829, 7501), make_bbl(1, 829, 16));
  std::vector<SaleRecord> sales{{make_bbl(1, 829, 7501), 2010, 1e6, 2000}, {make_bbl(1, 5, 5), 2010, 2e6, 1000}};
  auto resolved = resolve_sales(sales, aliases);
  CHECK(resolved[0].bbl.str() == "1_829_16");
  CHECK(resolved[1].bbl.str() == "1_5_5");

  auto identity = resolve_sales(sales, AliasTable{});
  REQUIRE(identity.size() == 2);
  CHECK(identity[0].bbl == sales[0].bbl);
  CHECK(identity[1].bbl == sales[1].bbl);

  CHECK_NOTHROW(aliases.add(make_bbl(1, 829, 7501), make_bbl(1, 829, 16)));
  CHECK_THROWS_AS(aliases.add(make_bbl(1, 829, 7501), make_bbl(1, 829, 17)), Error);
}

TEST_CASE("join keeps one row per parcel-year and drops multi-sale groups") {
  const BblKey a = make_bbl(1, 1, 1), b = make_bbl(1, 1, 2), c = make_bbl(1, 1, 3);
  std::vector<ParcelRecord> parcels{parcel(c, 2010), parcel(a, 2010), parcel(b, 2010), parcel(a, 2011)};
  std::vector<SaleRecord> sales{{b, 2010, 500000, 2000}, {c, 2010, 1, 10}, {c, 2010, 2, 10},
                                {a, 2012, 9, 9},         {a, 2011, 0, 0}};
  JoinResult j = join_panel(parcels, sales);
  CHECK(j.parcel_years == 4);
  CHECK(j.multi_sale_groups == 1);
  CHECK(j.unmatched_sales == 1);
  CHECK(j.panel.size() == j.parcel_years - j.multi_sale_groups);
  REQUIRE(j.panel.size() == 3);
  // sorted by (bbl, year)
  CHECK(j.panel[0].bbl() == a);
  CHECK(j.panel[0].year() == 2010);
  CHECK_FALSE(j.panel[0].sold);
  CHECK_FALSE(j.panel[0].sale_psf.has_value());
  CHECK(j.panel[1].bbl() == a);
  CHECK(j.panel[1].sold);  // zero-price deed still counts as a sale
  CHECK_FALSE(j.panel[1].sale_psf.has_value());
  CHECK_FALSE(j.panel[1].is_regression_row());
  CHECK(j.panel[2].bbl() == b);
  CHECK(j.panel[2].sold);
  CHECK(*j.panel[2].sale_psf == 250.0);
  CHECK(j.panel[2].is_regression_row());

  parcels.push_back(parcel(a, 2010));
  CHECK_THROWS_AS(join_panel(parcels, sales), Error);
}

TEST_CASE("parcel validation rejects impossible values") {
  std::vector<ParcelRecord> parcels{parcel(make_bbl(1, 1, 1), 2010)};
  parcels[0].area.garage = -1.0;
  CHECK_THROWS_AS(join_panel(parcels, {}), Error);
  parcels[0].area.garage = 0.0;
  parcels[0].lat = 91.0;
  CHECK_THROWS_AS(join_panel(parcels, {}), Error);
  std::vector<SaleRecord> negative{{make_bbl(1, 1, 1), 2010, -5.0, 100}};
  parcels[0].lat = 40.0;
  CHECK_THROWS_AS(join_panel(parcels, negative), Error);
}

TEST_CASE("global filters") {
  std::vector<PropertyYearRecord> panel;
  const char* classes[] = {"A1", "B2", "C4", "D1", "F5", "G2", "L1", "O6", "H1", "K4", "R4", "A5"};
  std::int64_t lot = 1;
  for (const char* cls : classes) {
    for (int bldgs : {1, 2, 3}) {
      auto r = test::row(make_bbl(1, 1, lot++), 2010, cls);
      r.parcel.num_bldgs = bldgs;
      panel.push_back(r);
    }
  }
  FilterResult f = apply_global_filters(panel);
  // Included categories: 9 classes of 12 (A twice); 2 of 3 building counts each.
  CHECK(f.panel.size() == 9 * 2);
  CHECK(f.retention == doctest::Approx(18.0 / 36.0).epsilon(1e-15));
  for (const auto& r : f.panel) {
    CHECK(included_categories().count(r.parcel.category()));
    CHECK(r.parcel.num_bldgs <= 2);
  }
  FilterResult again = apply_global_filters(f.panel);
  CHECK(again.panel.size() == f.panel.size());
  CHECK(again.retention == 1.0);
  CHECK(apply_global_filters({}).retention == 1.0);
}

TEST_CASE("stage-2 subset rule") {
  std::vector<PropertyYearRecord> panel{test::row(make_bbl(3, 1, 1), 2010, "C1", 3),
                                        test::row(make_bbl(3, 1, 2), 2010, "A1", 3),
                                        test::row(make_bbl(4, 1, 3), 2010, "C1", 4),
                                        test::row(make_bbl(2, 1, 4), 2010, "D4", 2),
                                        test::row(make_bbl(1, 1, 5), 2010, "D4", 1)};
  auto sub = subset_stage2(panel);
  REQUIRE(sub.size() == 3);
  CHECK(sub[0].bbl().str() == "3_1_1");
  CHECK(sub[1].bbl().str() == "2_1_4");
  CHECK(sub[2].bbl().str() == "1_1_5");
  Stage2Rule queens{{'C'}, {4}};
  CHECK(subset_stage2(panel, queens).size() == 1);
}

TEST_CASE("csv reader handles quoting and custom delimiters") {
  std::istringstream in("a,b,c\n1,\"x, y\",\"he said \"\"hi\"\"\"\n2,,z\n");
  CsvTable t = parse_csv(in);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x, y");
  CHECK(t.rows[0][2] == "he said \"hi\"");
  CHECK(t.rows[1][1].empty());
  CHECK(t.column("c") == 2);
  CHECK_THROWS_AS(t.column("missing"), Error);

  std::istringstream tsv("a\tb\n1\t2\n");
  CHECK(parse_csv(tsv, '\t').rows[0][1] == "2");
}

TEST_CASE("record files round-trip") {
  fs::path dir = temp_dir("records");
  SynthConfig cfg;
  cfg.parcels = 80;
  cfg.first_year = 2010;
  cfg.last_year = 2013;
  SynthCity city = generate_city(cfg);
  write_parcels(dir / "parcels.csv", city.parcels);
  write_sales(dir / "sales.csv", city.sales);
  write_aliases(dir / "aliases.csv", city.aliases);
  auto parcels = read_parcels(dir / "parcels.csv");
  auto sales = read_sales(dir / "sales.csv");
  auto aliases = read_aliases(dir / "aliases.csv");
  REQUIRE(parcels.size() == city.parcels.size());
  REQUIRE(sales.size() == city.sales.size());
  CHECK(aliases.entries() == city.aliases.entries());
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    CHECK(parcels[i].bbl == city.parcels[i].bbl);
    CHECK(parcels[i].lat == city.parcels[i].lat);
    CHECK(parcels[i].area.total == city.parcels[i].area.total);
    CHECK(parcels[i].zip == city.parcels[i].zip);
  }
  for (std::size_t i = 0; i < sales.size(); ++i) CHECK(sales[i].sale_price_total == city.sales[i].sale_price_total);

  auto panel = apply_global_filters(join_panel(parcels, resolve_sales(sales, aliases)).panel).panel;
  write_panel(dir / "panel.csv", panel);
  auto back = read_panel(dir / "panel.csv");
  REQUIRE(back.size() == panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    CHECK(back[i].bbl() == panel[i].bbl());
    CHECK(back[i].sold == panel[i].sold);
    CHECK(back[i].sale_psf == panel[i].sale_psf);
    CHECK(back[i].parcel.has_location() == panel[i].parcel.has_location());
  }
}

TEST_CASE("column mapping renames source headers") {
  fs::path dir = temp_dir("mapping");
  {
    std::ofstream out(dir / "sales.tsv");
    out << "BBL\tSALE_YEAR\tSALE PRICE\tGROSS SQUARE FEET\n1_829_16\t2012\t500000\t2000\n";
  }
  ColumnMapping m;
  m.tables["sales"] = {{"bbl", "BBL"},
                       {"sale_year", "SALE_YEAR"},
                       {"sale_price", "SALE PRICE"},
                       {"gross_square_feet", "GROSS SQUARE FEET"}};
  m.save(dir / "mapping.json");
  auto sales = read_sales(dir / "sales.tsv", ColumnMapping::load(dir / "mapping.json"));
  REQUIRE(sales.size() == 1);
  CHECK(sales[0].bbl.str() == "1_829_16");
  CHECK(sales[0].sale_year == 2012);
  CHECK(sales[0].sale_price_total == 500000.0);
  CHECK(sales[0].gross_square_feet == 2000.0);
}

TEST_CASE("synthetic city is deterministic and exercises every data quirk") {
  SynthConfig cfg;
  cfg.parcels = 400;
  SynthCity a = generate_city(cfg);
  SynthCity b = generate_city(cfg);
  REQUIRE(a.parcels.size() == b.parcels.size());
  REQUIRE(a.sales.size() == b.sales.size());
  for (std::size_t i = 0; i < a.sales.size(); ++i) {
    CHECK(a.sales[i].bbl == b.sales[i].bbl);
    CHECK(a.sales[i].sale_price_total == b.sales[i].sale_price_total);
  }
  CHECK(a.truth.sale_probability == b.truth.sale_probability);

  const int years = cfg.last_year - cfg.first_year + 1;
  CHECK(a.parcels.size() == static_cast<std::size_t>(cfg.parcels * years));
  std::size_t zero = 0, unlocated = 0, excluded = 0, many = 0;
  for (const auto& s : a.sales) zero += s.sale_price_total == 0.0;
  for (const auto& p : a.parcels) {
    unlocated += !p.has_location();
    excluded += !included_categories().count(p.category());
    many += p.num_bldgs > 2;
  }
  CHECK(zero > 0);
  CHECK(excluded > 0);
  CHECK(many > 0);
  CHECK(!a.aliases.empty());
  JoinResult j = join_panel(a.parcels, resolve_sales(a.sales, a.aliases));
  CHECK(j.multi_sale_groups > 0);
  cfg.missing_location_fraction = 0.05;
  SynthCity c = generate_city(cfg);
  for (const auto& p : c.parcels) unlocated += !p.has_location();
  CHECK(unlocated > 0);

  SynthConfig empty;
  empty.parcels = 0;
  CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("alias table repairs exactly the sales reported under unit lots") {
  SynthConfig cfg;
  cfg.parcels = 600;
  cfg.alias_fraction = 0.6;
  cfg.multi_sale_fraction = 0.0;
  SynthCity city = generate_city(cfg);
  std::size_t aliased = 0;
  for (const auto& s : city.sales) aliased += city.aliases.find(s.bbl) != nullptr;
  REQUIRE(aliased > 0);

  JoinResult raw = join_panel(city.parcels, city.sales);
  CHECK(raw.unmatched_sales == aliased);
  CHECK(raw.unmatched_rate() == doctest::Approx(static_cast<double>(aliased) / city.sales.size()));
  JoinResult fixed = join_panel(city.parcels, resolve_sales(city.sales, city.aliases));
  CHECK(fixed.unmatched_sales == 0);
}

namespace {

struct ContagionStats {
  double rate_given_neighbor_sold = 0.0;  // empirical
  double model_given_neighbor_sold = 0.0; // mean generator probability on the same rows
  double standard_error = 0.0;
  double base_rate = 0.0;
  double correlation = 0.0;  // own sale vs share of neighbors sold last year
};

ContagionStats contagion_stats(const SynthConfig& cfg) {
  SynthCity city = generate_city(cfg);
  auto sales = resolve_sales(city.sales, city.aliases);
  std::set<std::pair<BblKey, int>> sold;
  for (const auto& s : sales) sold.insert({s.bbl, s.sale_year});
  const int years = cfg.last_year - cfg.first_year + 1;
  const std::size_t P = city.parcels.size() / static_cast<std::size_t>(years);

  // Oracle neighborhoods from the generator's planar coordinates.
  std::vector<ProjectedPoint> pts;
  std::vector<std::size_t> parcel_of;
  for (std::size_t i = 0; i < P; ++i) {
    std::size_t r = i * static_cast<std::size_t>(years);
    if (!city.parcels[r].has_location()) continue;
    pts.push_back({city.parcels[r].bbl, city.truth.x_m[r], city.truth.y_m[r]});
    parcel_of.push_back(i);
  }
  auto is_sold = [&](std::size_t i, int t) {
    return sold.count({city.parcels[i * years].bbl, cfg.first_year + t}) > 0;
  };
  ContagionStats out;
  double n1 = 0, k1 = 0, p1 = 0, var1 = 0, n_all = 0, k_all = 0;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, n = 0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    std::vector<std::size_t> nbrs;
    for (std::size_t b = 0; b < pts.size(); ++b) {
      if (a == b) continue;
      double dx = pts[a].x - pts[b].x, dy = pts[a].y - pts[b].y;
      if (dx * dx + dy * dy <= cfg.contagion_radius_m * cfg.contagion_radius_m) nbrs.push_back(parcel_of[b]);
    }
    if (nbrs.empty()) continue;
    const std::size_t i = parcel_of[a];
    for (int t = 1; t < years; ++t) {
      double share = 0;
      for (std::size_t j : nbrs) share += is_sold(j, t - 1);
      share /= static_cast<double>(nbrs.size());
      const double y = is_sold(i, t);
      const double p = city.truth.sale_probability[i * years + t];
      n_all += 1;
      k_all += y;
      if (share > 0) {
        n1 += 1;
        k1 += y;
        p1 += p;
        var1 += p * (1 - p);
      }
      sx += share;
      sy += y;
      sxx += share * share;
      syy += y * y;
      sxy += share * y;
      n += 1;
    }
  }
  out.rate_given_neighbor_sold = k1 / n1;
  out.model_given_neighbor_sold = p1 / n1;
  out.standard_error = std::sqrt(var1) / n1;
  out.base_rate = k_all / n_all;
  double cov = sxy / n - (sx / n) * (sy / n);
  out.correlation = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  return out;
}

}  // namespace

TEST_CASE("planted contagion raises the sale rate after neighbor sales by the generator's own amount") {
  SynthConfig cfg;
  cfg.parcels = 1500;
  cfg.multi_sale_fraction = 0.0;
  ContagionStats s = contagion_stats(cfg);
  CHECK(std::abs(s.rate_given_neighbor_sold - s.model_given_neighbor_sold) < 4.0 * s.standard_error);
  CHECK(s.rate_given_neighbor_sold > s.base_rate);

  cfg.contagion = 0.0;
  cfg.hotspot_strength = 0.0;
  ContagionStats null = contagion_stats(cfg);
  CHECK(std::abs(null.correlation) < 0.02);
}
