#include "splag/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/spatial_index.hpp"

namespace splag {

namespace {

template <class F>
void for_each_field(SynthConfig& c, F&& f) {
  f("seed", c.seed);
  f("parcels", c.parcels);
  f("first_year", c.first_year);
  f("last_year", c.last_year);
  f("extent_m", c.extent_m);
  f("origin_lat", c.origin_lat);
  f("origin_lon", c.origin_lon);
  f("clusters", c.clusters);
  f("clustered_fraction", c.clustered_fraction);
  f("cluster_sd_min_m", c.cluster_sd_min_m);
  f("cluster_sd_max_m", c.cluster_sd_max_m);
  f("contagion_radius_m", c.contagion_radius_m);
  f("base_sale_rate", c.base_sale_rate);
  f("contagion", c.contagion);
  f("hotspot_strength", c.hotspot_strength);
  f("hotspots", c.hotspots);
  f("hotspot_sigma_m", c.hotspot_sigma_m);
  f("hotspot_speed_m", c.hotspot_speed_m);
  f("base_psf", c.base_psf);
  f("global_growth", c.global_growth);
  f("price_bumps", c.price_bumps);
  f("bump_sigma_min_m", c.bump_sigma_min_m);
  f("bump_sigma_max_m", c.bump_sigma_max_m);
  f("bump_growth_sd", c.bump_growth_sd);
  f("size_curvature", c.size_curvature);
  f("parcel_effect_sd", c.parcel_effect_sd);
  f("noise_sd", c.noise_sd);
  f("assessment_noise_sd", c.assessment_noise_sd);
  f("zero_price_fraction", c.zero_price_fraction);
  f("multi_sale_fraction", c.multi_sale_fraction);
  f("alias_fraction", c.alias_fraction);
  f("missing_location_fraction", c.missing_location_fraction);
  f("excluded_category_fraction", c.excluded_category_fraction);
  f("many_buildings_fraction", c.many_buildings_fraction);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

/// Position reflected back into [0, extent].
double reflect(double v, double extent) {
  double period = 2.0 * extent;
  v = std::fmod(v, period);
  if (v < 0) v += period;
  return v > extent ? period - v : v;
}

struct CategoryProfile {
  char category;
  double weight;
  double median_area;
  double price_effect;
  double residential_share;  // expected
  double floors;
};

// Included categories first; H and K are generated only to exercise the filter.
constexpr std::array<CategoryProfile, 10> kProfiles{{
    {'A', 0.26, 1800, 0.10, 0.97, 2},
    {'B', 0.16, 2800, 0.00, 0.95, 3},
    {'C', 0.20, 5500, -0.05, 0.90, 4},
    {'D', 0.14, 45000, -0.10, 0.92, 12},
    {'F', 0.03, 15000, -0.50, 0.05, 2},
    {'G', 0.05, 6000, -0.40, 0.05, 1},
    {'L', 0.03, 20000, -0.20, 0.30, 5},
    {'O', 0.07, 25000, 0.15, 0.05, 8},
    {'H', 0.00, 60000, 0.00, 0.02, 10},
    {'K', 0.00, 8000, 0.10, 0.10, 2},
}};

struct Parcel {
  BblKey bbl;
  double x = 0, y = 0;
  bool located = true;
  const CategoryProfile* profile = nullptr;
  int subclass = 1;
  int borough = 1;
  std::string zip;
  int num_bldgs = 1;
  BuildingAreas area;
  double floors = 1;
  double units_res = 0, units_total = 0;
  int year_built = 0;
  double size_effect = 0.0;
  double parcel_effect = 0.0;
  double assessed_base = 0.0;
  std::int64_t alias_lot = 0;  // 0 = sales reported under the canonical key
};

}  // namespace

void SynthConfig::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string("synth.") + field, what);
  };
  require(parcels >= 1, "parcels", "must be >= 1");
  require(last_year >= first_year, "last_year", "must be >= first_year");
  require(extent_m > 0, "extent_m", "must be > 0");
  require(clusters >= 1, "clusters", "must be >= 1");
  require(clustered_fraction >= 0 && clustered_fraction <= 1, "clustered_fraction", "must be in [0, 1]");
  require(cluster_sd_min_m > 0 && cluster_sd_max_m >= cluster_sd_min_m, "cluster_sd_max_m",
          "needs 0 < cluster_sd_min_m <= cluster_sd_max_m");
  require(contagion_radius_m > 0, "contagion_radius_m", "must be > 0");
  require(base_sale_rate > 0 && base_sale_rate < 1, "base_sale_rate", "must be in (0, 1)");
  require(contagion >= 0 && contagion <= 1, "contagion", "must be in [0, 1]");
  require(hotspots >= 0, "hotspots", "must be >= 0");
  require(hotspot_sigma_m > 0, "hotspot_sigma_m", "must be > 0");
  require(base_psf > 0, "base_psf", "must be > 0");
  require(price_bumps >= 0, "price_bumps", "must be >= 0");
  require(bump_sigma_min_m > 0 && bump_sigma_max_m >= bump_sigma_min_m, "bump_sigma_max_m",
          "needs 0 < bump_sigma_min_m <= bump_sigma_max_m");
  require(noise_sd >= 0 && parcel_effect_sd >= 0 && bump_growth_sd >= 0 && assessment_noise_sd >= 0,
          "noise_sd", "spreads must be >= 0");
  for (auto [v, name] : {std::pair{zero_price_fraction, "zero_price_fraction"},
                         std::pair{multi_sale_fraction, "multi_sale_fraction"},
                         std::pair{alias_fraction, "alias_fraction"},
                         std::pair{missing_location_fraction, "missing_location_fraction"},
                         std::pair{excluded_category_fraction, "excluded_category_fraction"},
                         std::pair{many_buildings_fraction, "many_buildings_fraction"}}) {
    require(v >= 0 && v <= 1, name, "must be in [0, 1]");
  }
}

nlohmann::json to_json(const SynthConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  SynthConfig copy = cfg;
  for_each_field(copy, [&](const char* name, auto& v) { j[name] = v; });
  return j;
}

SynthConfig synth_config_from_json(const nlohmann::json& j, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix, "must be an object");
  SynthConfig cfg;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for_each_field(cfg, [&](const char* name, auto& field) {
      if (key != name) return;
      known = true;
      try {
        field = value.get<std::remove_reference_t<decltype(field)>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(prefix + "." + key, "has the wrong type");
      }
    });
    if (!known) throw ConfigError(prefix + "." + key, "unknown key");
  }
  cfg.validate();
  return cfg;
}

SynthCity generate_city(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng_loc(mix_seed(cfg.seed, 1));
  std::mt19937_64 rng_attr(mix_seed(cfg.seed, 2));
  std::mt19937_64 rng_price(mix_seed(cfg.seed, 3));
  std::mt19937_64 rng_sale(mix_seed(cfg.seed, 4));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double E = cfg.extent_m;
  const std::size_t P = static_cast<std::size_t>(cfg.parcels);

  // Locations.
  struct Cluster {
    double x, y, sd;
  };
  std::vector<Cluster> clusters;
  for (int k = 0; k < cfg.clusters; ++k) {
    clusters.push_back({E * (0.1 + 0.8 * unit(rng_loc)), E * (0.1 + 0.8 * unit(rng_loc)),
                        cfg.cluster_sd_min_m + (cfg.cluster_sd_max_m - cfg.cluster_sd_min_m) * unit(rng_loc)});
  }
  std::vector<Parcel> parcels(P);
  for (auto& p : parcels) {
    if (unit(rng_loc) < cfg.clustered_fraction) {
      const Cluster& c = clusters[static_cast<std::size_t>(unit(rng_loc) * clusters.size()) % clusters.size()];
      p.x = std::clamp(c.x + c.sd * normal(rng_loc), 0.0, E);
      p.y = std::clamp(c.y + c.sd * normal(rng_loc), 0.0, E);
    } else {
      p.x = E * unit(rng_loc);
      p.y = E * unit(rng_loc);
    }
  }

  // Keys and static attributes.
  const double strip = E / 5.0;
  const double block_m = 200.0, zip_m = 2000.0;
  std::map<std::pair<int, std::int64_t>, std::int64_t> next_lot;
  double included_weight = 0.0;
  for (const auto& prof : kProfiles) included_weight += prof.weight;
  for (auto& p : parcels) {
    p.borough = 1 + std::min(4, static_cast<int>(p.x / strip));
    auto row = static_cast<std::int64_t>(p.y / block_m), col = static_cast<std::int64_t>((p.x - (p.borough - 1) * strip) / block_m);
    std::int64_t block = 1 + row * 100 + std::max<std::int64_t>(col, 0);
    std::int64_t lot = ++next_lot[{p.borough, block}];
    p.bbl = make_bbl(p.borough, block, lot);
    auto zr = static_cast<int>(p.y / zip_m), zc = static_cast<int>(p.x / zip_m);
    p.zip = std::to_string(11000 + zr * 10 + zc);
    p.located = unit(rng_attr) >= cfg.missing_location_fraction;

    if (unit(rng_attr) < cfg.excluded_category_fraction) {
      p.profile = &kProfiles[unit(rng_attr) < 0.5 ? 8 : 9];
    } else {
      double u = unit(rng_attr) * included_weight;
      p.profile = &kProfiles[0];
      for (const auto& prof : kProfiles) {
        if (u < prof.weight) {
          p.profile = &prof;
          break;
        }
        u -= prof.weight;
      }
    }
    p.subclass = 1 + static_cast<int>(unit(rng_attr) * 9) % 9;
    if (unit(rng_attr) < cfg.many_buildings_fraction) {
      p.num_bldgs = 3 + static_cast<int>(unit(rng_attr) * 3);
    } else {
      p.num_bldgs = unit(rng_attr) < 0.9 ? 1 : 2;
    }

    const double total = std::round(p.profile->median_area * std::exp(0.5 * normal(rng_attr)));
    const double res_share = std::clamp(p.profile->residential_share + 0.05 * normal(rng_attr), 0.0, 1.0);
    p.area.total = total;
    p.area.residential = std::round(total * res_share);
    p.area.commercial = total - p.area.residential;
    // Split commercial space; the category decides the dominant use.
    std::array<double, 6> w{};
    for (auto& v : w) v = 0.2 + unit(rng_attr);
    switch (p.profile->category) {
      case 'O': w[0] += 4; break;
      case 'K': w[1] += 4; break;
      case 'G': w[2] += 4; break;
      case 'F': w[4] += 4; break;
      default: w[1] += 1; w[5] += 1; break;
    }
    double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    double* parts[6] = {&p.area.office, &p.area.retail, &p.area.garage, &p.area.storage, &p.area.factory, &p.area.other};
    double assigned = 0.0;
    for (int k = 0; k < 5; ++k) {
      *parts[k] = std::floor(p.area.commercial * w[k] / wsum);
      assigned += *parts[k];
    }
    *parts[5] = p.area.commercial - assigned;

    p.floors = std::max(1.0, std::round(p.profile->floors * std::exp(0.3 * normal(rng_attr))));
    p.units_res = std::round(p.area.residential / 900.0);
    if (p.profile->category == 'A' && p.area.residential > 0) p.units_res = std::max(1.0, p.units_res);
    p.units_total = p.units_res + std::round(p.area.commercial / 2500.0);
    p.year_built = unit(rng_attr) < 0.03 ? 0 : 1890 + static_cast<int>(unit(rng_attr) * 116);

    const double log_area = std::log(std::max(total, 100.0)) - std::log(4000.0);
    p.size_effect = p.profile->price_effect - cfg.size_curvature * log_area * log_area;
    p.parcel_effect = cfg.parcel_effect_sd * normal(rng_attr);
  }

  // Price surface.
  struct Bump {
    double x, y, sigma, amplitude, growth;
  };
  std::vector<Bump> bumps;
  for (int k = 0; k < cfg.price_bumps; ++k) {
    bumps.push_back({E * unit(rng_price), E * unit(rng_price),
                     cfg.bump_sigma_min_m + (cfg.bump_sigma_max_m - cfg.bump_sigma_min_m) * unit(rng_price),
                     -0.4 + 1.2 * unit(rng_price), cfg.bump_growth_sd * normal(rng_price)});
  }
  auto log_level = [&](const Parcel& p, int year) {
    const double tau = year - cfg.first_year;
    double l = std::log(cfg.base_psf) + cfg.global_growth * tau + p.size_effect + p.parcel_effect;
    for (const auto& b : bumps) {
      double d2 = (p.x - b.x) * (p.x - b.x) + (p.y - b.y) * (p.y - b.y);
      l += std::exp(-d2 / (2.0 * b.sigma * b.sigma)) * (b.amplitude + b.growth * tau);
    }
    return l;
  };
  for (auto& p : parcels) {
    // Assessments follow the initial market level and drift slowly.
    p.assessed_base =
        0.45 * std::exp(log_level(p, cfg.first_year) + cfg.assessment_noise_sd * normal(rng_price)) * p.area.total;
  }

  // Aliases: a few condo-like lots report their sales under a unit lot number.
  AliasTable aliases;
  std::map<std::pair<int, std::int64_t>, std::int64_t> next_unit;
  for (auto& p : parcels) {
    char cat = p.profile->category;
    if ((cat == 'C' || cat == 'D') && unit(rng_attr) < cfg.alias_fraction) {
      p.alias_lot = 7501 + next_unit[{p.bbl.borough, p.bbl.block}]++;
      aliases.add(make_bbl(p.bbl.borough, p.bbl.block, p.alias_lot), p.bbl);
    }
  }

  // Hotspots.
  struct Hotspot {
    double x, y, vx, vy;
  };
  std::vector<Hotspot> hotspots;
  for (int h = 0; h < cfg.hotspots; ++h) {
    double angle = 2.0 * std::numbers::pi * unit(rng_sale);
    hotspots.push_back({E * unit(rng_sale), E * unit(rng_sale), cfg.hotspot_speed_m * std::cos(angle),
                        cfg.hotspot_speed_m * std::sin(angle)});
  }
  auto hotspot_intensity = [&](const Parcel& p, int year) {
    const double tau = year - cfg.first_year;
    double h = 0.0;
    for (const auto& s : hotspots) {
      double hx = reflect(s.x + s.vx * tau, E), hy = reflect(s.y + s.vy * tau, E);
      double d2 = (p.x - hx) * (p.x - hx) + (p.y - hy) * (p.y - hy);
      h = std::max(h, std::exp(-d2 / (2.0 * cfg.hotspot_sigma_m * cfg.hotspot_sigma_m)));
    }
    return h;
  };

  // Contagion neighborhoods over located parcels.
  std::vector<ProjectedPoint> pts;
  std::vector<std::size_t> parcel_of_point;
  for (std::size_t i = 0; i < P; ++i) {
    if (!parcels[i].located) continue;
    pts.push_back({parcels[i].bbl, parcels[i].x, parcels[i].y});
    parcel_of_point.push_back(i);
  }
  NeighborGraph graph = neighbors_grid(pts, cfg.contagion_radius_m, cfg.contagion_radius_m, nullptr, 1);
  std::vector<std::ptrdiff_t> point_of_parcel(P, -1);
  for (std::size_t k = 0; k < parcel_of_point.size(); ++k) point_of_parcel[parcel_of_point[k]] = static_cast<std::ptrdiff_t>(k);

  const int years = cfg.last_year - cfg.first_year + 1;
  std::vector<double> prob(P * static_cast<std::size_t>(years)), level(P * static_cast<std::size_t>(years));
  std::vector<char> sold_prev(P, 0), sold_now(P, 0);
  SynthCity city;
  const double base_logit = logit(cfg.base_sale_rate);
  for (int t = 0; t < years; ++t) {
    const int year = cfg.first_year + t;
    for (std::size_t i = 0; i < P; ++i) {
      const Parcel& p = parcels[i];
      double q = sigmoid(base_logit + cfg.hotspot_strength * hotspot_intensity(p, year));
      double pr = q;
      std::ptrdiff_t k = point_of_parcel[i];
      if (t > 0 && k >= 0 && !graph.neighbors(static_cast<std::size_t>(k)).empty()) {
        auto nb = graph.neighbors(static_cast<std::size_t>(k));
        double share = 0.0;
        for (const auto& n : nb) share += sold_prev[parcel_of_point[n.index]];
        share /= static_cast<double>(nb.size());
        pr = (1.0 - cfg.contagion) * q + cfg.contagion * share;
      }
      const std::size_t slot = i * static_cast<std::size_t>(years) + static_cast<std::size_t>(t);
      prob[slot] = pr;
      level[slot] = log_level(p, year);
      sold_now[i] = unit(rng_sale) < pr;
      if (!sold_now[i]) continue;

      BblKey reported = p.alias_lot ? make_bbl(p.bbl.borough, p.bbl.block, p.alias_lot) : p.bbl;
      const double gsf = p.area.total;
      auto draw_price = [&] {
        if (unit(rng_sale) < cfg.zero_price_fraction) return 0.0;
        return std::round(std::exp(level[slot] + cfg.noise_sd * normal(rng_sale)) * gsf);
      };
      city.sales.push_back({reported, year, draw_price(), gsf});
      if (unit(rng_sale) < cfg.multi_sale_fraction) city.sales.push_back({reported, year, draw_price(), gsf});
    }
    std::swap(sold_prev, sold_now);
  }

  // Emit parcel-years sorted by key.
  std::vector<std::size_t> order(P);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return parcels[a].bbl < parcels[b].bbl; });
  const double lat_scale = 180.0 / std::numbers::pi / LocalProjection::kEarthRadiusM;
  const double lon_scale = lat_scale / std::cos(cfg.origin_lat * std::numbers::pi / 180.0);
  for (std::size_t i : order) {
    const Parcel& p = parcels[i];
    for (int t = 0; t < years; ++t) {
      ParcelRecord r;
      r.bbl = p.bbl;
      r.year = cfg.first_year + t;
      if (p.located) {
        r.lat = cfg.origin_lat + p.y * lat_scale;
        r.lon = cfg.origin_lon + p.x * lon_scale;
      }
      r.building_class = std::string(1, p.profile->category) + std::to_string(p.subclass);
      r.borough = p.borough;
      r.zip = p.zip;
      r.num_bldgs = p.num_bldgs;
      r.area = p.area;
      r.assessed_total = std::round(p.assessed_base * std::pow(1.02, t));
      r.year_built = p.year_built;
      r.floors = p.floors;
      r.units_res = p.units_res;
      r.units_total = p.units_total;
      city.parcels.push_back(std::move(r));
      const std::size_t slot = i * static_cast<std::size_t>(years) + static_cast<std::size_t>(t);
      city.truth.sale_probability.push_back(prob[slot]);
      city.truth.log_price_level.push_back(level[slot]);
      city.truth.x_m.push_back(p.x);
      city.truth.y_m.push_back(p.y);
    }
  }
  city.aliases = std::move(aliases);
  std::stable_sort(city.sales.begin(), city.sales.end(), [](const SaleRecord& a, const SaleRecord& b) {
    return std::tie(a.bbl, a.sale_year) < std::tie(b.bbl, b.sale_year);
  });
  return city;
}

}  // namespace splag
