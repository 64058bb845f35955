#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "splag/records.hpp"

namespace splag {

/// Synthetic city generator. Parcels sit in Gaussian clusters plus a uniform
/// background; the log price per square foot follows a smooth surface whose
/// bumps grow at different rates, and the yearly sale probability mixes a
/// moving-hotspot intensity with the share of neighbors that sold last year.
struct SynthConfig {
  std::uint64_t seed = 7;
  int parcels = 3000;
  int first_year = 2003;
  int last_year = 2017;
  double extent_m = 8000.0;
  double origin_lat = 40.70;
  double origin_lon = -73.95;

  int clusters = 8;
  double clustered_fraction = 0.6;
  double cluster_sd_min_m = 300.0;
  double cluster_sd_max_m = 900.0;

  // Sales: p = (1 - contagion) * q + contagion * share of neighbors sold in t - 1,
  // logit q = logit(base_sale_rate) + hotspot_strength * hotspot(x, t).
  double contagion_radius_m = 500.0;
  double base_sale_rate = 0.04;
  double contagion = 0.5;
  double hotspot_strength = 4.0;
  int hotspots = 4;
  double hotspot_sigma_m = 900.0;
  double hotspot_speed_m = 350.0;  // per year

  // Prices.
  double base_psf = 300.0;
  double global_growth = 0.04;  // log points per year
  int price_bumps = 25;
  double bump_sigma_min_m = 300.0;
  double bump_sigma_max_m = 800.0;
  double bump_growth_sd = 0.05;  // per-bump log growth per year
  double size_curvature = 0.3;  // quadratic penalty in log area
  double parcel_effect_sd = 0.05;
  double noise_sd = 0.12;
  double assessment_noise_sd = 0.3;  // log-scale error of assessed values

  // Data quirks.
  double zero_price_fraction = 0.05;
  double multi_sale_fraction = 0.02;
  double alias_fraction = 0.03;
  double missing_location_fraction = 0.005;
  double excluded_category_fraction = 0.06;
  double many_buildings_fraction = 0.04;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Unknown keys are rejected; absent keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j, const std::string& prefix = "synth");

/// Generator internals kept for tests, aligned with `parcels`.
struct SynthTruth {
  std::vector<double> sale_probability;  // p used for the parcel-year draw
  std::vector<double> log_price_level;   // expected log psf before noise
  std::vector<double> x_m;
  std::vector<double> y_m;
};

struct SynthCity {
  std::vector<ParcelRecord> parcels;  // sorted by (bbl, year)
  std::vector<SaleRecord> sales;      // keys as reported (aliases unresolved)
  AliasTable aliases;
  SynthTruth truth;
};

SynthCity generate_city(const SynthConfig& cfg);

}  // namespace splag
