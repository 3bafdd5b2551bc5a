#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wagepanel/akm.hpp"
#include "wagepanel/core_data.hpp"
#include "wagepanel/health.hpp"
#include "wagepanel/regression.hpp"

namespace wagepanel::trajectory {

enum class Outcome { annual_income, log_income, firm_quality, job_count, cci };
enum class Subsample { pooled, secondary, tertiary };

std::string_view to_string(Outcome o);
std::string_view to_string(Subsample s);
Outcome parse_outcome(std::string_view s);
Subsample parse_subsample(std::string_view s);

/// Person-level controls. Indicator sets drop their first level.
struct ControlSet {
  std::vector<std::string> pcs;
  bool gender = true;
  bool birth_year = true;
  bool gender_x_birth_year = false;
  bool biobank = true;

  static std::vector<std::string> default_pcs(int n = 10);
};

struct TrajectorySpec {
  Outcome outcome = Outcome::annual_income;
  std::vector<std::string> indices{"EA_PGI"};
  int max_horizon = 25;
  ControlSet controls{ControlSet::default_pcs(), true, true, false, true};
  bool calendar_year = true;
  Subsample subsample = Subsample::pooled;
  /// "weight" = the record weight field; any other name = an index column.
  std::optional<std::string> weights;

  void validate() const;
};

/// Outcome per panel row; NaN marks rows that do not enter the fit.
/// annual_income and log_income read the panel, the rest use the helpers below.
std::vector<double> outcome_column(const Panel &panel, Outcome outcome);
/// Standardized firm effect of the main employer, taken from the fit whose
/// period covers the row's year.
std::vector<double> firm_quality_column(const Panel &panel, std::span<const akm::AkmFit> fits);
/// Number of employer spells started up to and including the row's year.
std::vector<double> job_count_column(const Panel &panel);
/// CCI at the age attained in the row's year.
std::vector<double> cci_column(const Panel &panel, std::span<const health::CciSeries> series);

/// Rescales the listed index columns to mean 0, sd 1 over persons (one value
/// per person, taken from the first record).
Panel standardize_index_columns(const Panel &panel, std::span<const std::string> names);

struct TrajectoryFit {
  TrajectorySpec spec;
  regression::LsFit ls;
  std::vector<int> horizons;
  std::vector<std::size_t> obs_per_horizon;
  std::vector<int> empty_horizons;
  std::size_t n_persons = 0;
  /// Person-level values of each index over the estimation sample.
  std::vector<std::vector<double>> index_samples;
  regression::WaldTest interactions_test;

  std::size_t horizon_column(int h) const { return static_cast<std::size_t>(h); }
  std::size_t interaction_column(std::size_t index, int h) const;
  /// NaN when the column was dropped or the horizon is empty.
  double beta(std::size_t index, int h) const;
  double beta_se(std::size_t index, int h) const;
  std::size_t index_position(std::string_view name) const;
};

/// Outcome on horizon indicators, index x horizon interactions and controls,
/// clustered by person.
TrajectoryFit fit_trajectory(const Panel &panel, const TrajectorySpec &spec, std::span<const double> outcome,
                             std::span<const double> row_weights = {}, int threads = 1);
/// Reads the outcome from the panel (annual_income / log_income only).
TrajectoryFit fit_trajectory(const Panel &panel, const TrajectorySpec &spec, int threads = 1);

struct MarginPoint {
  int horizon = 0;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct MarginCurve {
  std::string index;
  double quantile = 0.0;
  double index_value = 0.0;
  std::vector<MarginPoint> points; ///< one per non-empty horizon
};

std::vector<MarginCurve> margins(const TrajectoryFit &fit, std::span<const double> quantiles, std::string_view index);

struct PresentValue {
  std::int64_t person_id = 0;
  double pv = 0.0;
};

/// Discounted real annual income per person over horizons 0..horizon_cap;
/// horizon 0 is undiscounted and nonemployed years count as zero.
std::vector<PresentValue> lifetime_income(const Panel &panel, double rate, int horizon_cap = 25);

struct PersonRegression {
  regression::LsFit ls;
  std::vector<std::string> indices;
  std::vector<std::vector<double>> index_samples;
};

/// Person-level regression of `y` (one value per person block of `panel`) on
/// an intercept, the indices and controls; HC1 covariance.
PersonRegression fit_person_level(const Panel &panel, std::span<const double> y, std::span<const std::string> indices,
                                  const ControlSet &controls, std::span<const double> person_weights = {});

struct AdjustedMean {
  std::string index;
  double quantile = 0.0;
  double index_value = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

std::vector<AdjustedMean> adjusted_means(const PersonRegression &fit, std::span<const double> quantiles,
                                         std::string_view index);

/// Person-level control design (intercept first) built from each person's
/// first record.
regression::SparseDesign person_controls(const Panel &panel, const ControlSet &controls);

struct Binscatter {
  std::vector<std::pair<double, double>> bins; ///< (mean x, mean y), standardized units
  double slope = 0.0;
  double slope_se = 0.0;
  std::size_t n_bins_used = 0;
  std::size_t n = 0;
};

/// Residualizes x and y on `controls` (or demeans when null), standardizes
/// both, bins x into equal-count groups and fits y on x with HC1 errors.
Binscatter binscatter(std::span<const double> x, std::span<const double> y,
                      const regression::SparseDesign *controls = nullptr, std::size_t n_bins = 20);

/// R2(controls + index) - R2(controls). `controls` should carry an intercept;
/// when null an intercept alone is used.
double incremental_r2(std::span<const double> outcome, std::span<const double> index,
                      const regression::SparseDesign *controls = nullptr);

/// Controls for the education outcome: gender x birth-year indicators,
/// biobank and PCs.
ControlSet education_controls(int n_pcs = 10);

} // namespace wagepanel::trajectory
