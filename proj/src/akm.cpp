#include "wagepanel/akm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "wagepanel/error.hpp"
#include "wagepanel/linalg.hpp"
#include "wagepanel/parallel.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel::akm {

namespace {

constexpr std::size_t kReductionChunks = 64;

template <class T> std::optional<std::size_t> sorted_position(const std::vector<T> &v, T key) {
  const auto it = std::lower_bound(v.begin(), v.end(), key);
  if (it == v.end() || *it != key) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(it - v.begin());
}

} // namespace

void AkmSpec::validate() const {
  if (!(solver_tol > 0.0)) {
    throw ValidationError("invalid-config", "solver tolerance must be positive");
  }
  if (max_iter <= 0) {
    throw ValidationError("invalid-config", "max_iter must be positive");
  }
  for (std::size_t i = 0; i < periods.size(); ++i) {
    if (periods[i].first_year > periods[i].last_year) {
      throw ValidationError("invalid-config",
                            fmt::format("period {}-{} is empty", periods[i].first_year, periods[i].last_year));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (periods[i].first_year <= periods[j].last_year && periods[j].first_year <= periods[i].last_year) {
        throw ValidationError("invalid-config", "estimation periods overlap");
      }
    }
  }
}

std::string Covariate::name() const {
  if (kind == "year") {
    return fmt::format("{}_x_year{}", to_string(education), value);
  }
  return fmt::format("{}_x_age{}", to_string(education), value);
}

double Covariate::evaluate(const PersonYearRecord &r) const {
  if (r.education_level != education) {
    return 0.0;
  }
  if (kind == "year") {
    return r.year == value ? 1.0 : 0.0;
  }
  return std::pow((r.age() - 40) / 10.0, value);
}

double log_monthly_earnings(const PersonYearRecord &r) {
  const auto m = monthly_earnings(r);
  if (!m || !(*m > 0.0)) {
    throw ValidationError("invalid-value", fmt::format("person {} year {}: log monthly earnings undefined",
                                                       r.person_id, r.year));
  }
  return std::log(*m);
}

// ---------------------------------------------------------------------------
// TwoWaySolver

TwoWaySolver::TwoWaySolver(std::vector<std::size_t> worker, std::vector<std::size_t> firm, std::size_t n_workers,
                           std::size_t n_firms, int threads)
    : worker_(std::move(worker)), firm_(std::move(firm)), n_workers_(n_workers), n_firms_(n_firms),
      threads_(threads) {
  const std::size_t n = worker_.size();
  worker_start_.assign(n_workers_ + 1, 0);
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && worker_[r] < worker_[r - 1]) {
      throw std::invalid_argument("TwoWaySolver: observations must be grouped by ascending worker index");
    }
    ++worker_start_[worker_[r] + 1];
  }
  std::partial_sum(worker_start_.begin(), worker_start_.end(), worker_start_.begin());

  firm_start_.assign(n_firms_ + 1, 0);
  for (std::size_t r = 0; r < n; ++r) {
    ++firm_start_[firm_[r] + 1];
  }
  std::partial_sum(firm_start_.begin(), firm_start_.end(), firm_start_.begin());
  firm_rows_.resize(n);
  std::vector<std::size_t> fill(firm_start_.begin(), firm_start_.end() - 1);
  for (std::size_t r = 0; r < n; ++r) {
    firm_rows_[fill[firm_[r]]++] = r;
  }

  inv_degree_.resize(static_cast<Eigen::Index>(n_workers_ + n_firms_));
  for (std::size_t w = 0; w < n_workers_; ++w) {
    const auto d = worker_start_[w + 1] - worker_start_[w];
    inv_degree_(static_cast<Eigen::Index>(w)) = d > 0 ? 1.0 / static_cast<double>(d) : 0.0;
  }
  for (std::size_t f = 0; f < n_firms_; ++f) {
    const auto d = firm_start_[f + 1] - firm_start_[f];
    inv_degree_(static_cast<Eigen::Index>(n_workers_ + f)) = d > 0 ? 1.0 / static_cast<double>(d) : 0.0;
  }
}

void TwoWaySolver::transpose_apply(const Eigen::VectorXd &v, Eigen::VectorXd &out) const {
  parallel_for(n_workers_, threads_, [&](std::size_t b, std::size_t e) {
    for (std::size_t w = b; w < e; ++w) {
      double s = 0.0;
      for (std::size_t r = worker_start_[w]; r < worker_start_[w + 1]; ++r) {
        s += v(static_cast<Eigen::Index>(r));
      }
      out(static_cast<Eigen::Index>(w)) = s;
    }
  });
  parallel_for(n_firms_, threads_, [&](std::size_t b, std::size_t e) {
    for (std::size_t f = b; f < e; ++f) {
      double s = 0.0;
      for (std::size_t k = firm_start_[f]; k < firm_start_[f + 1]; ++k) {
        s += v(static_cast<Eigen::Index>(firm_rows_[k]));
      }
      out(static_cast<Eigen::Index>(n_workers_ + f)) = s;
    }
  });
}

void TwoWaySolver::apply_normal(const Eigen::VectorXd &x, Eigen::VectorXd &out, Eigen::VectorXd &rowbuf) const {
  parallel_for(worker_.size(), threads_, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) {
      rowbuf(static_cast<Eigen::Index>(r)) =
          x(static_cast<Eigen::Index>(worker_[r])) + x(static_cast<Eigen::Index>(n_workers_ + firm_[r]));
    }
  });
  transpose_apply(rowbuf, out);
}

double TwoWaySolver::dot(const Eigen::VectorXd &a, const Eigen::VectorXd &b) const {
  const auto n = static_cast<std::size_t>(a.size());
  std::array<double, kReductionChunks> partial{};
  const std::size_t chunk = (n + kReductionChunks - 1) / kReductionChunks;
  parallel_for(kReductionChunks, threads_, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t lo = std::min(n, c * chunk), hi = std::min(n, lo + chunk);
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        s += a(static_cast<Eigen::Index>(i)) * b(static_cast<Eigen::Index>(i));
      }
      partial[c] = s;
    }
  });
  double s = 0.0;
  for (double v : partial) {
    s += v;
  }
  return s;
}

Eigen::VectorXd TwoWaySolver::fitted(const Eigen::VectorXd &theta, const Eigen::VectorXd &psi) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(worker_.size()));
  for (std::size_t r = 0; r < worker_.size(); ++r) {
    out(static_cast<Eigen::Index>(r)) =
        theta(static_cast<Eigen::Index>(worker_[r])) + psi(static_cast<Eigen::Index>(firm_[r]));
  }
  return out;
}

TwoWaySolver::Result TwoWaySolver::solve(std::span<const double> y, double tol, int max_iter,
                                         const Eigen::VectorXd *warm_theta, const Eigen::VectorXd *warm_psi) const {
  const auto n = static_cast<Eigen::Index>(worker_.size());
  const auto nw = static_cast<Eigen::Index>(n_workers_);
  const auto p = static_cast<Eigen::Index>(n_workers_ + n_firms_);
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::VectorXd rhs(p), x = Eigen::VectorXd::Zero(p), r(p), z(p), dir(p), Ad(p), rowbuf(n);
  transpose_apply(yv, rhs);
  if (warm_theta != nullptr && warm_psi != nullptr) {
    x.head(nw) = *warm_theta;
    x.tail(p - nw) = *warm_psi;
  }
  apply_normal(x, Ad, rowbuf);
  r = rhs - Ad;

  Result res;
  const double bnorm = std::sqrt(dot(rhs, rhs));
  auto finish = [&] {
    res.theta = x.head(nw);
    res.psi = x.tail(p - nw);
    return res;
  };
  if (bnorm == 0.0) {
    x.setZero();
    res.converged = true;
    res.history.push_back(0.0);
    return finish();
  }
  double rel = std::sqrt(dot(r, r)) / bnorm;
  res.history.push_back(rel);
  if (rel < tol) {
    res.converged = true;
    return finish();
  }
  z = inv_degree_.cwiseProduct(r);
  dir = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    apply_normal(dir, Ad, rowbuf);
    const double denom = dot(dir, Ad);
    if (!(denom > 0.0)) {
      break;
    }
    const double alpha = rz / denom;
    x += alpha * dir;
    r -= alpha * Ad;
    rel = std::sqrt(dot(r, r)) / bnorm;
    res.history.push_back(rel);
    res.iterations = it;
    if (rel < tol) {
      res.converged = true;
      break;
    }
    z = inv_degree_.cwiseProduct(r);
    const double rz_new = dot(r, z);
    dir = z + (rz_new / rz) * dir;
    rz = rz_new;
  }
  return finish();
}

// ---------------------------------------------------------------------------
// Estimation

std::vector<Covariate> build_covariates(const Panel &panel) {
  std::set<int> years;
  std::set<Education> levels;
  for (const auto &r : panel.records()) {
    years.insert(r.year);
    levels.insert(r.education_level);
  }
  std::vector<Covariate> cols;
  if (years.empty()) {
    return cols;
  }
  const int base = *years.begin();
  for (Education e : levels) {
    for (int y : years) {
      if (y != base) {
        cols.push_back({"year", e, y});
      }
    }
  }
  for (Education e : levels) {
    for (int power = 1; power <= 3; ++power) {
      cols.push_back({"age", e, power});
    }
  }
  return cols;
}

std::optional<double> AkmFit::theta_of(std::int64_t person_id) const {
  if (auto i = sorted_position(person_ids, person_id)) {
    return theta[*i];
  }
  return std::nullopt;
}

std::optional<double> AkmFit::psi_of(std::int64_t firm_id) const {
  if (auto i = sorted_position(firm_ids, firm_id)) {
    return psi[*i];
  }
  return std::nullopt;
}

std::optional<double> AkmFit::theta_std_of(std::int64_t person_id) const {
  auto t = theta_of(person_id);
  if (!t || !standardization) {
    return std::nullopt;
  }
  return (*t - standardization->theta_mean) / standardization->theta_sd;
}

std::optional<double> AkmFit::psi_std_of(std::int64_t firm_id) const {
  auto p = psi_of(firm_id);
  if (!p || !standardization) {
    return std::nullopt;
  }
  return (*p - standardization->psi_mean) / standardization->psi_sd;
}

double AkmFit::xb(const PersonYearRecord &r) const {
  double s = 0.0;
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    s += (covariates[k].evaluate(r) - covariate_means(static_cast<Eigen::Index>(k))) *
         beta(static_cast<Eigen::Index>(k));
  }
  return s;
}

AkmFit fit_akm_sample(const Panel &panel, const AkmSpec &spec, const AkmFit *warm_start) {
  spec.validate();
  if (panel.empty()) {
    throw ValidationError("empty-panel", "AKM estimation sample is empty");
  }
  const std::size_t n = panel.size();
  const auto ni = static_cast<Eigen::Index>(n);

  AkmFit fit;
  fit.n_obs = n;
  std::vector<std::size_t> worker(n), firm(n);
  for (const auto &r : panel.records()) {
    if (!r.employed()) {
      throw ValidationError("invalid-value",
                            fmt::format("person {} year {}: AKM sample rows must be employed", r.person_id, r.year));
    }
    fit.firm_ids.push_back(*r.firm_id);
  }
  std::sort(fit.firm_ids.begin(), fit.firm_ids.end());
  fit.firm_ids.erase(std::unique(fit.firm_ids.begin(), fit.firm_ids.end()), fit.firm_ids.end());
  for (std::size_t i = 0; i < n; ++i) {
    const auto &r = panel[i];
    if (i == 0 || r.person_id != panel[i - 1].person_id) {
      fit.person_ids.push_back(r.person_id);
    }
    worker[i] = fit.person_ids.size() - 1;
    firm[i] = *sorted_position(fit.firm_ids, *r.firm_id);
  }
  const std::size_t nw = fit.person_ids.size(), nf = fit.firm_ids.size();

  // Outcome and covariates are centred; the constant returns through theta.
  Eigen::VectorXd y(ni);
  for (std::size_t i = 0; i < n; ++i) {
    y(static_cast<Eigen::Index>(i)) = log_monthly_earnings(panel[i]);
  }
  const double y_mean = y.mean();
  Eigen::VectorXd yc = y.array() - y_mean;

  TwoWaySolver solver(worker, firm, nw, nf, spec.threads);
  int total_iterations = 0;
  auto checked_solve = [&](const Eigen::VectorXd &v, const std::string &what, const Eigen::VectorXd *wt,
                           const Eigen::VectorXd *wp) {
    auto res = solver.solve(std::span<const double>(v.data(), n), spec.solver_tol, spec.max_iter, wt, wp);
    total_iterations += res.iterations;
    if (!res.converged) {
      std::string tail;
      const std::size_t from = res.history.size() > 5 ? res.history.size() - 5 : 0;
      for (std::size_t k = from; k < res.history.size(); ++k) {
        tail += fmt::format("{}{:.3e}", k == from ? "" : ", ", res.history[k]);
      }
      throw ConvergenceError(fmt::format("AKM solve for {} did not converge in {} iterations; last relative "
                                         "residuals: [{}]",
                                         what, spec.max_iter, tail));
    }
    return res;
  };

  std::vector<Covariate> candidates = spec.include_covariates ? build_covariates(panel) : std::vector<Covariate>{};
  const auto k = static_cast<Eigen::Index>(candidates.size());
  Eigen::VectorXd beta_full = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd X(ni, k);
  Eigen::VectorXd means_full = Eigen::VectorXd::Zero(k);
  std::vector<std::size_t> kept;
  if (k > 0) {
    for (Eigen::Index c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), c) = candidates[static_cast<std::size_t>(c)].evaluate(panel[i]);
      }
      means_full(c) = X.col(c).mean();
      X.col(c).array() -= means_full(c);
    }
    // Frisch-Waugh-Lovell: sweep the fixed effects out of every column.
    Eigen::MatrixXd Xt(ni, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::VectorXd col = X.col(c);
      auto res = checked_solve(col, candidates[static_cast<std::size_t>(c)].name(), nullptr, nullptr);
      Xt.col(c) = col - solver.fitted(res.theta, res.psi);
    }
    auto ry = checked_solve(yc, "outcome", nullptr, nullptr);
    Eigen::VectorXd yt = yc - solver.fitted(ry.theta, ry.psi);
    const Eigen::MatrixXd gram = Xt.transpose() * Xt;
    const Eigen::VectorXd rhs = Xt.transpose() * yt;
    auto ns = linalg::solve_normal_equations(gram, rhs, 1e-9);
    beta_full = ns.coef;
    kept = ns.kept;
    for (std::size_t d : ns.dropped) {
      fit.dropped_columns.push_back(candidates[d].name());
    }
  }

  Eigen::VectorXd target = yc;
  if (k > 0) {
    target -= X * beta_full;
  }
  Eigen::VectorXd warm_theta, warm_psi;
  const Eigen::VectorXd *wt = nullptr, *wp = nullptr;
  if (warm_start != nullptr) {
    warm_theta.resize(static_cast<Eigen::Index>(nw));
    warm_psi.resize(static_cast<Eigen::Index>(nf));
    for (std::size_t w = 0; w < nw; ++w) {
      warm_theta(static_cast<Eigen::Index>(w)) = warm_start->theta_of(fit.person_ids[w]).value_or(0.0) - y_mean;
    }
    for (std::size_t f = 0; f < nf; ++f) {
      warm_psi(static_cast<Eigen::Index>(f)) = warm_start->psi_of(fit.firm_ids[f]).value_or(0.0);
    }
    wt = &warm_theta;
    wp = &warm_psi;
  }
  auto fe = checked_solve(target, "fixed effects", wt, wp);
  fit.residual_history = fe.history;
  fit.iterations = total_iterations;

  fit.theta.assign(fe.theta.data(), fe.theta.data() + fe.theta.size());
  fit.psi.assign(fe.psi.data(), fe.psi.data() + fe.psi.size());

  // Normalisation: observation-weighted mean of psi is zero in each component.
  const auto graph = connectivity::build_graph(panel);
  fit.firm_component = graph.component_of_firm;
  std::vector<double> psi_sum(graph.n_components(), 0.0);
  std::vector<std::size_t> obs(graph.n_components(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = fit.firm_component[firm[i]];
    psi_sum[static_cast<std::size_t>(c)] += fit.psi[firm[i]];
    ++obs[static_cast<std::size_t>(c)];
  }
  std::vector<double> shift(graph.n_components(), 0.0);
  for (std::size_t c = 0; c < shift.size(); ++c) {
    shift[c] = obs[c] ? psi_sum[c] / static_cast<double>(obs[c]) : 0.0;
    fit.normalization.push_back({static_cast<int>(c), obs[c], shift[c]});
  }
  for (std::size_t f = 0; f < nf; ++f) {
    fit.psi[f] -= shift[static_cast<std::size_t>(fit.firm_component[f])];
  }
  for (std::size_t w = 0; w < nw; ++w) {
    fit.theta[w] += y_mean;
  }
  for (std::size_t i = 0; i < n; ++i) {
    // Each worker sits in exactly one component; apply its shift once.
    if (i == 0 || worker[i] != worker[i - 1]) {
      fit.theta[worker[i]] += shift[static_cast<std::size_t>(fit.firm_component[firm[i]])];
    }
  }

  const auto kk = static_cast<Eigen::Index>(kept.size());
  fit.beta.resize(kk);
  fit.covariate_means.resize(kk);
  for (Eigen::Index a = 0; a < kk; ++a) {
    const auto c = static_cast<Eigen::Index>(kept[static_cast<std::size_t>(a)]);
    fit.covariates.push_back(candidates[static_cast<std::size_t>(c)]);
    fit.beta(a) = beta_full(c);
    fit.covariate_means(a) = means_full(c);
  }

  double ssr = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double xb = k > 0 ? X.row(ii).dot(beta_full) : 0.0;
    const double e = y(ii) - fit.theta[worker[i]] - fit.psi[firm[i]] - xb;
    ssr += e * e;
    sst += yc(ii) * yc(ii);
  }
  fit.resid_sd = std::sqrt(ssr / static_cast<double>(n));
  fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
  return fit;
}

std::vector<AkmFit> fit_akm(const Panel &panel, const AkmSpec &spec) {
  spec.validate();
  std::vector<Period> periods = spec.periods;
  if (periods.empty()) {
    int lo = INT32_MAX, hi = INT32_MIN;
    for (const auto &r : panel.records()) {
      lo = std::min(lo, r.year);
      hi = std::max(hi, r.year);
    }
    if (panel.empty()) {
      throw ValidationError("empty-panel", "AKM input panel is empty");
    }
    periods.push_back({lo, hi});
  }
  std::vector<AkmFit> fits;
  for (const auto &period : periods) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (period.contains(panel[i].year) && panel[i].employed()) {
        rows.push_back(i);
      }
    }
    const Panel in_period = panel.subset(rows);
    connectivity::ConnectedSetReport report;
    const Panel connected = connectivity::largest_connected_set(in_period, connectivity::build_graph(in_period),
                                                                &report);
    if (connected.empty()) {
      throw ValidationError("empty-panel",
                            fmt::format("no observations in period {}-{}", period.first_year, period.last_year));
    }
    AkmFit fit = fit_akm_sample(connected, spec);
    fit.period = period;
    fit.connected_set = report;
    fits.push_back(std::move(fit));
  }
  return fits;
}

AkmFit standardize_indices(const AkmFit &fit, const Panel &reference_panel) {
  std::vector<double> theta_vals, psi_vals;
  std::set<std::pair<std::int64_t, int>> firm_years;
  for (std::size_t i = 0; i < reference_panel.size(); ++i) {
    const auto &r = reference_panel[i];
    if (i == 0 || r.person_id != reference_panel[i - 1].person_id) {
      if (auto t = fit.theta_of(r.person_id)) {
        theta_vals.push_back(*t);
      }
    }
    if (r.firm_id && fit.psi_of(*r.firm_id)) {
      firm_years.insert({*r.firm_id, r.year});
    }
  }
  for (const auto &[f, _] : firm_years) {
    psi_vals.push_back(*fit.psi_of(f));
  }
  Standardization s;
  s.theta_mean = stats::mean(theta_vals);
  s.theta_sd = stats::sd(theta_vals);
  s.psi_mean = stats::mean(psi_vals);
  s.psi_sd = stats::sd(psi_vals);
  if (!(s.theta_sd > 0.0) || !(s.psi_sd > 0.0)) {
    throw ValidationError("zero-variance", "cannot standardize indices with zero variance over the reference panel");
  }
  AkmFit out = fit;
  out.standardization = s;
  return out;
}

std::vector<std::pair<std::string, double>> VarianceDecomposition::components() const {
  return {{"var_theta", var_theta},
          {"var_psi", var_psi},
          {"var_xb", var_xb},
          {"2cov_theta_psi", 2.0 * cov_theta_psi},
          {"2cov_theta_xb", 2.0 * cov_theta_xb},
          {"2cov_psi_xb", 2.0 * cov_psi_xb},
          {"var_resid", var_resid},
          {"2cov_theta_resid", 2.0 * cov_theta_resid},
          {"2cov_psi_resid", 2.0 * cov_psi_resid},
          {"2cov_xb_resid", 2.0 * cov_xb_resid}};
}

double VarianceDecomposition::component_sum() const {
  double s = 0.0;
  for (const auto &[_, v] : components()) {
    s += v;
  }
  return s;
}

VarianceDecomposition variance_decomposition(const AkmFit &fit, const Panel &panel) {
  std::vector<double> y, th, ps, xb, e;
  for (const auto &r : panel.records()) {
    if (!r.employed()) {
      continue;
    }
    const auto t = fit.theta_of(r.person_id);
    const auto p = fit.psi_of(*r.firm_id);
    if (!t || !p) {
      continue;
    }
    const double yy = log_monthly_earnings(r);
    const double x = fit.xb(r);
    y.push_back(yy);
    th.push_back(*t);
    ps.push_back(*p);
    xb.push_back(x);
    e.push_back(yy - *t - *p - x);
  }
  VarianceDecomposition d;
  d.n_obs = y.size();
  if (y.empty()) {
    return d;
  }
  using stats::population_covariance;
  d.var_y = stats::population_variance(y);
  d.var_theta = stats::population_variance(th);
  d.var_psi = stats::population_variance(ps);
  d.var_xb = stats::population_variance(xb);
  d.var_resid = stats::population_variance(e);
  d.cov_theta_psi = population_covariance(th, ps);
  d.cov_theta_xb = population_covariance(th, xb);
  d.cov_psi_xb = population_covariance(ps, xb);
  d.cov_theta_resid = population_covariance(th, e);
  d.cov_psi_resid = population_covariance(ps, e);
  d.cov_xb_resid = population_covariance(xb, e);
  return d;
}

std::vector<std::pair<double, double>> binned_means(std::span<const double> x, std::span<const double> y,
                                                    std::size_t n_bins) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<std::pair<double, double>> out;
  const std::size_t n = x.size();
  n_bins = std::min(n_bins, n);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t lo = b * n / n_bins, hi = (b + 1) * n / n_bins;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sx += x[order[i]];
      sy += y[order[i]];
    }
    const double m = static_cast<double>(hi - lo);
    out.emplace_back(sx / m, sy / m);
  }
  return out;
}

CrossPeriodAgreement cross_period_agreement(const AkmFit &a, const AkmFit &b, std::size_t n_bins) {
  std::vector<double> ta, tb, pa, pb;
  for (std::size_t i = 0; i < a.person_ids.size(); ++i) {
    if (auto t = b.theta_of(a.person_ids[i])) {
      ta.push_back(a.theta[i]);
      tb.push_back(*t);
    }
  }
  for (std::size_t i = 0; i < a.firm_ids.size(); ++i) {
    if (auto p = b.psi_of(a.firm_ids[i])) {
      pa.push_back(a.psi[i]);
      pb.push_back(*p);
    }
  }
  if (ta.empty() || pa.empty()) {
    throw ValidationError("empty-intersection", "the two fits share no persons or no firms");
  }
  CrossPeriodAgreement out;
  out.n_persons = ta.size();
  out.n_firms = pa.size();
  out.corr_theta = stats::correlation(ta, tb);
  out.corr_psi = stats::correlation(pa, pb);
  out.theta_bins = binned_means(ta, tb, n_bins);
  out.psi_bins = binned_means(pa, pb, n_bins);
  return out;
}

} // namespace wagepanel::akm
