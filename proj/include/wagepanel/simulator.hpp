#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "wagepanel/core_data.hpp"
#include "wagepanel/health.hpp"

namespace wagepanel::sim {

/// Data-generating process for a synthetic matched employer-employee panel.
///
/// Log monthly earnings are theta_i + psi_J(i,t) + x_it'b + g * h * PGI_i * 1[tertiary] + e_it
/// with x_it'b = education-specific linear calendar-year trend plus a
/// quadratic/cubic in (age - 40) / 10; h is years since graduation.
struct SimConfig {
  int n_workers = 1000;
  int n_firms = 50;
  int n_years = 15;
  int start_year = 1987;

  double theta_sd = 0.3;
  double psi_sd = 0.3;
  double noise_sd = 0.1;
  double base_log_monthly = 7.8;   ///< mean theta of secondary-educated workers
  double tertiary_premium = 0.3;   ///< added to theta of tertiary-educated workers

  /// Correlation of theta with the EA-PGI among tertiary-educated workers.
  double pgi_effect_on_theta = 0.0;
  /// Same correlation among secondary-educated workers.
  double pgi_effect_on_theta_secondary = 0.0;
  /// Tertiary movers: rate = base_mobility_rate * (1 + effect * PGI), clamped to [0, 1].
  double pgi_effect_on_mobility = 0.0;
  /// g above: the tertiary PGI coefficient at horizon h is g * h.
  double pgi_horizon_slope = 0.0;
  /// Share of years-of-education variance explained by the EA-PGI.
  double pgi_education_r2 = 0.0;

  double base_mobility_rate = 0.1;
  double nonemployment_rate = 0.05;
  double tertiary_share = 0.5;
  double year_trend_secondary = 0.01;
  double year_trend_tertiary = 0.015;
  double age_quadratic = -0.05;
  double age_cubic = 0.01;
  int n_pcs = 10;
  double annual_inflation = 0.02; ///< deflator = (1 + inflation)^(year - 2010)

  std::uint64_t seed = 1;
  /// Firm effects come from this seed when set, so repeated worker draws can
  /// share one firm population.
  std::optional<std::uint64_t> firm_seed;
  double discount_rate = 0.03;

  /// Annual first-occurrence hazard per Charlson category (empty = none).
  std::vector<double> diagnosis_hazards;
  /// Hazards are multiplied by exp(tilt * PGI).
  double diagnosis_pgi_tilt = 0.0;
  int icd10_start_year = 1996;

  void validate() const;
  int last_year() const { return start_year + n_years - 1; }
};

struct GroundTruth {
  std::map<std::int64_t, double> theta;
  std::map<std::int64_t, double> psi;
  /// Tertiary EA-PGI coefficient on log earnings by horizon.
  std::map<int, double> beta_t;
};

struct Simulation {
  Panel panel;
  GroundTruth truth;
};

/// Deterministic given `cfg.seed`; person p (1-based id) draws from
/// substream p - 1, firm effects from a separate substream family.
Simulation simulate_panel(const SimConfig &cfg);

/// First-occurrence diagnosis events per person and Charlson category, coded
/// with a prefix drawn from the category's ICD-10 list (ICD-9 list before
/// `icd10_start_year`). Sorted by (person_id, event_year, code).
std::vector<health::DiagnosisRecord> simulate_diagnoses(const SimConfig &cfg, const Panel &panel,
                                                        const health::CharlsonTable &table);

} // namespace wagepanel::sim
