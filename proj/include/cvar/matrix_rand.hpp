#pragma once

#include <Eigen/Dense>

#include "cvar/linalg.hpp"
#include "cvar/rng.hpp"

namespace cvar {

/// Draw from the inverse Wishart with density
///   p(S) ~ |S|^{-(dof+d+1)/2} exp(-tr(S^{-1} scale)/2),
/// so the mean is scale/(dof-d-1) for dof > d+1. Bartlett construction:
/// no explicit matrix inverse, only triangular solves. Requires dof > d-1.
SpdMatrix sample_inverse_wishart(const SpdMatrix& scale, double dof,
                                 RngStream& rng);

/// Draw a k x n matrix with mean `mean` and vec-covariance
/// col_cov (x) row_cov_inv^{-1}: mean + Lr^{-T} Z Lc' for Z std normal,
/// Lr = chol(row_cov_inv), Lc = chol(col_cov). The row covariance is passed
/// as a precision because the conditional posterior supplies it that way.
Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean,
                                     const SpdMatrix& row_cov_inv,
                                     const SpdMatrix& col_cov, RngStream& rng);

/// Matrix-normal density evaluation on the same parameterization (log scale).
double log_matrix_normal(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mean,
                         const Eigen::MatrixXd& row_cov_chol,
                         const Eigen::MatrixXd& col_cov_chol);

/// Multivariate normal log-density given the lower Cholesky factor of the
/// covariance.
double log_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
               const Eigen::MatrixXd& cov_chol);

}  // namespace cvar
