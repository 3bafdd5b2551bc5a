#include "wagepanel/linalg.hpp"

#include <cmath>

namespace wagepanel::linalg {

NormalSolve solve_normal_equations(const Eigen::MatrixXd &gram, const Eigen::VectorXd &rhs, double rel_tol) {
  const Eigen::Index p = gram.rows();
  NormalSolve out;
  // Lower-triangular factor over the kept columns, grown one column at a time.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double diag = gram(j, j);
    if (!(diag > 0.0)) {
      out.dropped.push_back(static_cast<std::size_t>(j));
      continue;
    }
    const auto k = static_cast<Eigen::Index>(kept.size());
    Eigen::VectorXd row(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      double s = gram(j, kept[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < a; ++b) {
        s -= L(a, b) * row(b);
      }
      row(a) = s / L(a, a);
    }
    const double pivot = diag - row.squaredNorm();
    if (!(pivot > rel_tol * diag)) {
      out.dropped.push_back(static_cast<std::size_t>(j));
      continue;
    }
    L.row(k).head(k) = row.transpose();
    L(k, k) = std::sqrt(pivot);
    kept.push_back(j);
  }
  const auto k = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd Lk = L.topLeftCorner(k, k);
  Eigen::VectorXd h(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    h(a) = rhs(kept[static_cast<std::size_t>(a)]);
    out.kept.push_back(static_cast<std::size_t>(kept[static_cast<std::size_t>(a)]));
  }
  const auto tri = Lk.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd Lt = Lk.transpose();
  Eigen::VectorXd b = Lt.triangularView<Eigen::Upper>().solve(tri.solve(h));
  out.coef = Eigen::VectorXd::Zero(p);
  for (Eigen::Index a = 0; a < k; ++a) {
    out.coef(kept[static_cast<std::size_t>(a)]) = b(a);
  }
  Eigen::MatrixXd Linv = tri.solve(Eigen::MatrixXd::Identity(k, k));
  out.inverse_kept = Linv.transpose() * Linv;
  return out;
}

} // namespace wagepanel::linalg
