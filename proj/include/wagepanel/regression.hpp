#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wagepanel::regression {

/// Row-compressed design matrix. Build with add_column(), then per row
/// set() entries and end_row().
struct SparseDesign {
  std::vector<std::string> names;
  std::vector<std::size_t> row_start{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  std::size_t add_column(std::string name) {
    names.push_back(std::move(name));
    return names.size() - 1;
  }
  void set(std::size_t col, double value) {
    if (value != 0.0) {
      cols.push_back(static_cast<std::uint32_t>(col));
      vals.push_back(value);
    }
  }
  void end_row() { row_start.push_back(cols.size()); }
  std::size_t n_rows() const { return row_start.size() - 1; }
  std::size_t n_cols() const { return names.size(); }
  double value(std::size_t row, std::size_t col) const;
};

struct LsFit {
  std::vector<std::string> names;
  std::vector<bool> kept;
  Eigen::VectorXd coef;  ///< 0 for dropped columns
  Eigen::MatrixXd cov;   ///< robust covariance; zero rows/columns for dropped columns
  Eigen::VectorXd means; ///< weighted column means over the estimation rows
  std::vector<double> residuals;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0; ///< 0 = heteroskedasticity-robust (HC1)
  double ssr = 0.0;
  double sst = 0.0; ///< weighted, about the weighted mean of y
  double r2 = 0.0;
  double resid_var = 0.0; ///< ssr / (sum w - k)

  std::vector<std::string> dropped_names() const;
  std::size_t n_kept() const;
};

/// Weighted least squares with collinear columns dropped in column order.
/// `weights` empty = unit weights. `clusters` empty = HC1 covariance;
/// otherwise CR1 clustered on the given ids.
LsFit fit_least_squares(const SparseDesign &x, std::span<const double> y, std::span<const double> weights = {},
                        std::span<const std::int64_t> clusters = {}, int threads = 1);

struct WaldTest {
  double statistic = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
};

/// Joint test that the listed coefficients are zero (dropped ones are skipped).
WaldTest wald_test(const LsFit &fit, std::span<const std::size_t> columns);

} // namespace wagepanel::regression
