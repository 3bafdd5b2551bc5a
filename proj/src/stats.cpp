#include "wagepanel/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace wagepanel::stats {

double mean(std::span<const double> x) {
  if (x.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double s = 0.0;
  for (double v : x) {
    s += v;
  }
  return s / static_cast<double>(x.size());
}

double population_covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("covariance: length mismatch");
  }
  if (x.empty()) {
    return 0.0;
  }
  const double mx = mean(x), my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += (x[i] - mx) * (y[i] - my);
  }
  return s / static_cast<double>(x.size());
}

double population_variance(std::span<const double> x) { return population_covariance(x, x); }

double variance(std::span<const double> x) {
  const auto n = x.size();
  if (n < 2) {
    return 0.0;
  }
  return population_variance(x) * static_cast<double>(n) / static_cast<double>(n - 1);
}

double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

double correlation(std::span<const double> x, std::span<const double> y) {
  const double vx = population_variance(x), vy = population_variance(y);
  if (vx <= 0.0 || vy <= 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return population_covariance(x, y) / std::sqrt(vx * vy);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) {
    throw std::invalid_argument("quantile of empty sample");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("quantile probability outside [0, 1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> x, double p) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

double chi_squared_sf(double stat, double dof) {
  if (stat <= 0.0) {
    return 1.0;
  }
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(dof), stat));
}

} // namespace wagepanel::stats
