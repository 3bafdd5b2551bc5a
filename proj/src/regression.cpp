#include "wagepanel/regression.hpp"

#include <algorithm>

#include "wagepanel/error.hpp"
#include "wagepanel/linalg.hpp"
#include "wagepanel/parallel.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel::regression {

namespace {

constexpr std::size_t kChunks = 16;

} // namespace

double SparseDesign::value(std::size_t row, std::size_t col) const {
  for (std::size_t k = row_start[row]; k < row_start[row + 1]; ++k) {
    if (cols[k] == col) {
      return vals[k];
    }
  }
  return 0.0;
}

std::vector<std::string> LsFit::dropped_names() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!kept[j]) {
      out.push_back(names[j]);
    }
  }
  return out;
}

std::size_t LsFit::n_kept() const { return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true)); }

LsFit fit_least_squares(const SparseDesign &x, std::span<const double> y, std::span<const double> weights,
                        std::span<const std::int64_t> clusters, int threads) {
  const std::size_t n = x.n_rows();
  const std::size_t p = x.n_cols();
  if (y.size() != n || (!weights.empty() && weights.size() != n) || (!clusters.empty() && clusters.size() != n)) {
    throw ValidationError("shape-mismatch", "design, outcome, weight and cluster lengths differ");
  }
  if (n == 0) {
    throw ValidationError("empty-sample", "no observations to fit");
  }
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  // Cross products in fixed row chunks, reduced in chunk order.
  std::vector<Eigen::MatrixXd> grams(kChunks, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
  std::vector<Eigen::VectorXd> rhss(kChunks, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)));
  std::vector<Eigen::VectorXd> sums(kChunks, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)));
  std::vector<double> wsum(kChunks, 0.0), ysum(kChunks, 0.0);
  parallel_for(kChunks, threads, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      auto &g = grams[c];
      auto &r = rhss[c];
      auto &s = sums[c];
      for (std::size_t i = n * c / kChunks; i < n * (c + 1) / kChunks; ++i) {
        const double wi = w(i);
        wsum[c] += wi;
        ysum[c] += wi * y[i];
        for (std::size_t a = x.row_start[i]; a < x.row_start[i + 1]; ++a) {
          const auto ca = x.cols[a];
          const double wa = wi * x.vals[a];
          r(ca) += wa * y[i];
          s(ca) += wa;
          for (std::size_t b = a; b < x.row_start[i + 1]; ++b) {
            const auto cb = x.cols[b];
            const double v = wa * x.vals[b];
            if (ca <= cb) {
              g(ca, cb) += v;
            } else {
              g(cb, ca) += v;
            }
          }
        }
      }
    }
  });
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd colsum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double total_w = 0.0, total_y = 0.0;
  for (std::size_t c = 0; c < kChunks; ++c) {
    gram += grams[c];
    rhs += rhss[c];
    colsum += sums[c];
    total_w += wsum[c];
    total_y += ysum[c];
  }
  gram = gram.selfadjointView<Eigen::Upper>();
  if (!(total_w > 0.0)) {
    throw ValidationError("invalid-weights", "weights sum to zero");
  }

  const auto solved = linalg::solve_normal_equations(gram, rhs);
  LsFit fit;
  fit.names = x.names;
  fit.kept.assign(p, false);
  for (auto j : solved.kept) {
    fit.kept[j] = true;
  }
  fit.coef = solved.coef;
  fit.means = colsum / total_w;
  fit.n_obs = n;

  const double ybar = total_y / total_w;
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t a = x.row_start[i]; a < x.row_start[i + 1]; ++a) {
      pred += x.vals[a] * fit.coef(x.cols[a]);
    }
    fit.residuals[i] = y[i] - pred;
    fit.ssr += w(i) * fit.residuals[i] * fit.residuals[i];
    fit.sst += w(i) * (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r2 = fit.sst > 0.0 ? 1.0 - fit.ssr / fit.sst : 0.0;
  const auto k = static_cast<Eigen::Index>(solved.kept.size());
  fit.resid_var = total_w > static_cast<double>(k) ? fit.ssr / (total_w - static_cast<double>(k)) : 0.0;

  // Scores per row (HC1) or per cluster (CR1), kept columns only.
  std::vector<Eigen::Index> pos(p, -1);
  for (Eigen::Index a = 0; a < k; ++a) {
    pos[solved.kept[static_cast<std::size_t>(a)]] = a;
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  std::size_t n_groups = n;
  if (clusters.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double we = w(i) * fit.residuals[i];
      const double we2 = we * we;
      for (std::size_t a = x.row_start[i]; a < x.row_start[i + 1]; ++a) {
        const auto ja = pos[x.cols[a]];
        if (ja < 0) {
          continue;
        }
        for (std::size_t b = x.row_start[i]; b < x.row_start[i + 1]; ++b) {
          const auto jb = pos[x.cols[b]];
          if (jb >= 0) {
            meat(ja, jb) += we2 * x.vals[a] * x.vals[b];
          }
        }
      }
    }
  } else {
    // Rows of a cluster need not be adjacent: visit them grouped by id.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
      order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return clusters[a] < clusters[b]; });
    Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
    n_groups = 0;
    for (std::size_t r = 0; r < n;) {
      const auto id = clusters[order[r]];
      score.setZero();
      for (; r < n && clusters[order[r]] == id; ++r) {
        const std::size_t i = order[r];
        const double we = w(i) * fit.residuals[i];
        for (std::size_t a = x.row_start[i]; a < x.row_start[i + 1]; ++a) {
          const auto j = pos[x.cols[a]];
          if (j >= 0) {
            score(j) += we * x.vals[a];
          }
        }
      }
      meat.selfadjointView<Eigen::Lower>().rankUpdate(score);
      ++n_groups;
    }
    meat = meat.selfadjointView<Eigen::Lower>();
  }
  const double dn = static_cast<double>(n), dk = static_cast<double>(k), dg = static_cast<double>(n_groups);
  double factor = 1.0;
  if (clusters.empty()) {
    factor = dn > dk ? dn / (dn - dk) : 1.0;
  } else {
    fit.n_clusters = n_groups;
    factor = (dg > 1.0 && dn > dk) ? dg / (dg - 1.0) * (dn - 1.0) / (dn - dk) : 1.0;
  }
  const Eigen::MatrixXd vk = factor * solved.inverse_kept * meat * solved.inverse_kept;
  fit.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      fit.cov(static_cast<Eigen::Index>(solved.kept[static_cast<std::size_t>(a)]),
              static_cast<Eigen::Index>(solved.kept[static_cast<std::size_t>(b)])) = vk(a, b);
    }
  }
  return fit;
}

WaldTest wald_test(const LsFit &fit, std::span<const std::size_t> columns) {
  std::vector<Eigen::Index> idx;
  for (auto c : columns) {
    if (fit.kept[c]) {
      idx.push_back(static_cast<Eigen::Index>(c));
    }
  }
  WaldTest out;
  out.df = idx.size();
  if (idx.empty()) {
    return out;
  }
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd b(m);
  Eigen::MatrixXd v(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    b(a) = fit.coef(idx[static_cast<std::size_t>(a)]);
    for (Eigen::Index c = 0; c < m; ++c) {
      v(a, c) = fit.cov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
    }
  }
  out.statistic = b.dot(v.ldlt().solve(b));
  out.p_value = stats::chi_squared_sf(out.statistic, static_cast<double>(out.df));
  return out;
}

} // namespace wagepanel::regression
