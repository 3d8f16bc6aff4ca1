#include "cvar/matrix_rand.hpp"

#include <cmath>
#include <string>

namespace cvar {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

// Lower-triangular Bartlett factor of a Wishart(I, dof) draw.
Eigen::MatrixXd bartlett_lower(int dim, double dof, RngStream& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(dof - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  return a;
}
}  // namespace

SpdMatrix sample_inverse_wishart(const SpdMatrix& scale, double dof,
                                 RngStream& rng) {
  const int d = scale.dim();
  if (!(dof > d - 1)) {
    throw ParamError("sample_inverse_wishart: dof " + std::to_string(dof) +
                     " must exceed dim-1 = " + std::to_string(d - 1));
  }
  // S = scale => S^{-1} ~ W(scale^{-1}, dof). With C = chol(scale) and
  // A the Bartlett factor, S = G G' where G = C A'^{-1}.
  const Eigen::MatrixXd c = scale.chol();
  const Eigen::MatrixXd a = bartlett_lower(d, dof, rng);
  // G' = A^{-1} C'  (one triangular solve)
  const Eigen::MatrixXd gt =
      a.triangularView<Eigen::Lower>().solve(c.transpose());
  Eigen::MatrixXd s = gt.transpose() * gt;
  return SpdMatrix::from(0.5 * (s + s.transpose()));
}

Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean,
                                     const SpdMatrix& row_cov_inv,
                                     const SpdMatrix& col_cov, RngStream& rng) {
  const Eigen::Index k = mean.rows();
  const Eigen::Index n = mean.cols();
  if (row_cov_inv.dim() != k || col_cov.dim() != n) {
    throw DimensionError("sample_matrix_normal: covariance dims do not match mean");
  }
  const Eigen::MatrixXd lr = row_cov_inv.chol();
  const Eigen::MatrixXd lc = col_cov.chol();
  const Eigen::MatrixXd z = rng.normal_matrix(k, n);
  const Eigen::MatrixXd y =
      lr.transpose().triangularView<Eigen::Upper>().solve(z);
  return mean + y * lc.transpose();
}

double log_matrix_normal(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mean,
                         const Eigen::MatrixXd& row_cov_chol,
                         const Eigen::MatrixXd& col_cov_chol) {
  const Eigen::Index a = x.rows();
  const Eigen::Index b = x.cols();
  const Eigen::MatrixXd d = x - mean;
  // tr[V^{-1} D' U^{-1} D] = || Lu^{-1} D Lv^{-T} ||_F^2
  const Eigen::MatrixXd e = row_cov_chol.triangularView<Eigen::Lower>().solve(d);
  const Eigen::MatrixXd f =
      col_cov_chol.triangularView<Eigen::Lower>().solve(e.transpose());
  const double quad = f.squaredNorm();
  return -0.5 * quad - 0.5 * a * b * kLog2Pi -
         0.5 * b * log_det_from_chol(row_cov_chol) -
         0.5 * a * log_det_from_chol(col_cov_chol);
}

double log_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
               const Eigen::MatrixXd& cov_chol) {
  const Eigen::VectorXd z =
      cov_chol.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * z.squaredNorm() - 0.5 * x.size() * kLog2Pi -
         0.5 * log_det_from_chol(cov_chol);
}

}  // namespace cvar
