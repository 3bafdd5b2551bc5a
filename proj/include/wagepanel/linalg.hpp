#pragma once

#include <vector>

#include <Eigen/Dense>

namespace wagepanel::linalg {

/// Solution of symmetric PSD normal equations G b = h after dropping
/// columns that are linearly dependent on earlier ones.
struct NormalSolve {
  std::vector<std::size_t> kept;    ///< original column indices, ascending
  std::vector<std::size_t> dropped; ///< original column indices, ascending
  Eigen::VectorXd coef;             ///< full length; dropped entries are 0
  Eigen::MatrixXd inverse_kept;     ///< (G_kk)^-1 over the kept columns
};

/// Sequential (in column order) Cholesky with dropping: column j is removed
/// when its pivot falls below `rel_tol` times its original diagonal, or the
/// diagonal itself is zero.
NormalSolve solve_normal_equations(const Eigen::MatrixXd &gram, const Eigen::VectorXd &rhs, double rel_tol = 1e-9);

} // namespace wagepanel::linalg
