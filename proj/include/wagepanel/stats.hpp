#pragma once

#include <span>
#include <vector>

namespace wagepanel::stats {

double mean(std::span<const double> x);

/// Sample variance with divisor n - 1 (0 for n < 2).
double variance(std::span<const double> x);

/// Population variance with divisor n. Used where exact accounting
/// identities are required.
double population_variance(std::span<const double> x);
double population_covariance(std::span<const double> x, std::span<const double> y);

double sd(std::span<const double> x);
double correlation(std::span<const double> x, std::span<const double> y);

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `x` need not be sorted.
double quantile(std::span<const double> x, double p);
double quantile_sorted(std::span<const double> sorted, double p);

double normal_cdf(double z);
double normal_quantile(double p);
/// Two-sided p-value of a standard-normal statistic.
double normal_two_sided_p(double z);
/// Upper-tail probability of a chi-squared variate.
double chi_squared_sf(double stat, double dof);

} // namespace wagepanel::stats
