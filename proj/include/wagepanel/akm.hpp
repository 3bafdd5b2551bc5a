#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wagepanel/connectivity.hpp"
#include "wagepanel/core_data.hpp"

namespace wagepanel::akm {

struct Period {
  int first_year;
  int last_year;
  bool contains(int year) const { return year >= first_year && year <= last_year; }
};

/// Estimation settings for log monthly earnings on worker effects, firm
/// effects and covariates (education x calendar year, education x cubic in
/// age centred at 40).
struct AkmSpec {
  std::vector<Period> periods; ///< empty = one period spanning the panel
  double solver_tol = 1e-8;    ///< relative residual of the normal equations
  int max_iter = 5000;         ///< per conjugate-gradient solve
  bool include_covariates = true;
  int threads = 1;

  static std::vector<Period> default_periods() { return {{1987, 2003}, {2004, 2019}}; }
  void validate() const;
};

/// Column of the covariate design. kind = "year" (dummy for `value`) or
/// "age" (power `value` of (age - 40) / 10), interacted with `education`.
struct Covariate {
  std::string kind;
  Education education;
  int value;
  std::string name() const;
  double evaluate(const PersonYearRecord &r) const;
};

struct ComponentNormalization {
  int component;
  std::size_t n_obs;
  double psi_shift; ///< observation-weighted mean of psi removed from the component
};

struct Standardization {
  double theta_mean = 0.0, theta_sd = 1.0;
  double psi_mean = 0.0, psi_sd = 1.0;
};

struct AkmFit {
  Period period{0, 0};
  std::vector<std::int64_t> person_ids; ///< sorted
  std::vector<double> theta;
  std::vector<std::int64_t> firm_ids; ///< sorted
  std::vector<double> psi;
  std::vector<int> firm_component;

  std::vector<Covariate> covariates;      ///< kept columns, aligned with beta
  std::vector<std::string> dropped_columns;
  Eigen::VectorXd beta;
  Eigen::VectorXd covariate_means; ///< Xb is reported on demeaned covariates

  std::size_t n_obs = 0;
  double resid_sd = 0.0;
  double r2 = 0.0;
  int iterations = 0;
  std::vector<double> residual_history; ///< relative residuals of the final solve
  std::vector<ComponentNormalization> normalization;
  connectivity::ConnectedSetReport connected_set;

  std::optional<Standardization> standardization;

  std::optional<double> theta_of(std::int64_t person_id) const;
  std::optional<double> psi_of(std::int64_t firm_id) const;
  std::optional<double> theta_std_of(std::int64_t person_id) const;
  std::optional<double> psi_std_of(std::int64_t firm_id) const;
  /// (x - mean)' beta for one record.
  double xb(const PersonYearRecord &r) const;
};

/// Preconditioned conjugate gradient on the normal equations of the two-way
/// fixed-effect design, Jacobi (degree) preconditioner. Row-space and
/// parameter-space reductions use fixed partitions so results do not depend
/// on the thread count.
class TwoWaySolver {
public:
  /// `worker` and `firm` are dense indices per observation; observations of
  /// one worker must be contiguous.
  TwoWaySolver(std::vector<std::size_t> worker, std::vector<std::size_t> firm, std::size_t n_workers,
               std::size_t n_firms, int threads = 1);

  struct Result {
    Eigen::VectorXd theta;
    Eigen::VectorXd psi;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
  };

  /// Least-squares fit of `y` on worker and firm dummies.
  Result solve(std::span<const double> y, double tol, int max_iter, const Eigen::VectorXd *warm_theta = nullptr,
               const Eigen::VectorXd *warm_psi = nullptr) const;

  /// theta[worker] + psi[firm] per observation.
  Eigen::VectorXd fitted(const Eigen::VectorXd &theta, const Eigen::VectorXd &psi) const;

  std::size_t n_obs() const { return worker_.size(); }

private:
  void apply_normal(const Eigen::VectorXd &x, Eigen::VectorXd &out, Eigen::VectorXd &rowbuf) const;
  void transpose_apply(const Eigen::VectorXd &v, Eigen::VectorXd &out) const;
  double dot(const Eigen::VectorXd &a, const Eigen::VectorXd &b) const;

  std::vector<std::size_t> worker_, firm_;
  std::size_t n_workers_, n_firms_;
  int threads_;
  std::vector<std::size_t> worker_start_; ///< CSR offsets of rows per worker
  std::vector<std::size_t> firm_start_;   ///< CSR offsets into firm_rows_
  std::vector<std::size_t> firm_rows_;
  Eigen::VectorXd inv_degree_;
};

/// Covariate columns for a sample (before collinearity screening).
std::vector<Covariate> build_covariates(const Panel &panel);

/// Fits one period: splits by period, restricts to the largest connected
/// set of that period, then estimates. Throws ConvergenceError on
/// non-convergence (message carries the residual history tail).
std::vector<AkmFit> fit_akm(const Panel &panel, const AkmSpec &spec);

/// Estimates on `panel` exactly as given (any number of components, each
/// normalised separately). Every record must be employed.
AkmFit fit_akm_sample(const Panel &panel, const AkmSpec &spec, const AkmFit *warm_start = nullptr);

/// Log monthly earnings of an employed record.
double log_monthly_earnings(const PersonYearRecord &r);

/// Rescales theta (over persons) and psi (over distinct firm-years) of the
/// reference panel to mean 0, sample sd 1.
AkmFit standardize_indices(const AkmFit &fit, const Panel &reference_panel);

struct VarianceDecomposition {
  std::size_t n_obs = 0;
  double var_y = 0.0;
  double var_theta = 0.0, var_psi = 0.0, var_xb = 0.0, var_resid = 0.0;
  double cov_theta_psi = 0.0, cov_theta_xb = 0.0, cov_psi_xb = 0.0;
  double cov_theta_resid = 0.0, cov_psi_resid = 0.0, cov_xb_resid = 0.0;

  /// (name, value) pairs; covariance entries are already doubled. Their sum
  /// equals var_y.
  std::vector<std::pair<std::string, double>> components() const;
  double component_sum() const;
};

/// Plug-in decomposition over the person-year observations of `panel`
/// (population moments, divisor n).
VarianceDecomposition variance_decomposition(const AkmFit &fit, const Panel &panel);

struct CrossPeriodAgreement {
  double corr_theta = 0.0;
  double corr_psi = 0.0;
  std::size_t n_persons = 0;
  std::size_t n_firms = 0;
  std::vector<std::pair<double, double>> theta_bins; ///< (mean in a, mean in b) per bin
  std::vector<std::pair<double, double>> psi_bins;
};

CrossPeriodAgreement cross_period_agreement(const AkmFit &a, const AkmFit &b, std::size_t n_bins = 20);

/// Mean of `y` within `n_bins` equal-count bins of `x` (sorted by x, ties by position).
std::vector<std::pair<double, double>> binned_means(std::span<const double> x, std::span<const double> y,
                                                    std::size_t n_bins);

} // namespace wagepanel::akm
