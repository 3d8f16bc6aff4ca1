#include "cvar/ml.hpp"

#include <cmath>
#include <string>

namespace cvar {

MlEstimate ml_estimate(const FitContext& ctx) {
  const EcmDesign& design = ctx.design();
  const int n = design.n;
  const int r = design.r;
  if (r < 1) throw ParamError("ml_estimate: rank must be >= 1");

  // Residuals of Y and Z after regressing out the deterministic/lag block.
  const Eigen::MatrixXd xtx = design.X.transpose() * design.X;
  const Eigen::MatrixXd l_x = chol_spd(xtx);
  const Eigen::MatrixXd r0 =
      design.Y - design.X * chol_solve(l_x, design.X.transpose() * design.Y);
  const Eigen::MatrixXd r1 =
      design.Z - design.X * chol_solve(l_x, design.X.transpose() * design.Z);

  const double t = static_cast<double>(design.t);
  const Eigen::MatrixXd s00 = (r0.transpose() * r0) / t;
  const Eigen::MatrixXd s01 = (r0.transpose() * r1) / t;
  const Eigen::MatrixXd s11 = (r1.transpose() * r1) / t;

  const Eigen::MatrixXd l00 = chol_spd(s00);
  Eigen::MatrixXd m = s01.transpose() * chol_solve(l00, s01);
  m = 0.5 * (m + m.transpose());

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      m, 0.5 * (s11 + s11.transpose()));
  if (es.info() != Eigen::Success)
    throw NumericError("ml_estimate: generalized eigensolver failed");

  MlEstimate out;
  out.eigenvalues = es.eigenvalues().reverse();  // descending
  Eigen::MatrixXd v(n, r);
  for (int j = 0; j < r; ++j) v.col(j) = es.eigenvectors().col(n - 1 - j);

  const Eigen::MatrixXd top = v.topRows(r);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(top);
  if (!lu.isInvertible()) {
    throw ParamError(
        "ml_estimate: leading r x r block of the eigenvector matrix is "
        "singular; the identity normalization fails for this variable "
        "ordering");
  }
  const Eigen::MatrixXd beta_full = v * lu.inverse();
  out.beta_ml = ThinBeta::from_free(n, r, beta_full.bottomRows(n - r));

  // Observed-information covariance from central differences of the
  // collapsed target.
  const int d = out.beta_ml.free_dim();
  Eigen::VectorXd theta = out.beta_ml.vec();
  auto f = [&](const Eigen::VectorXd& v2) {
    return ctx.log_target(ThinBeta::from_vec(n, r, v2));
  };
  Eigen::VectorXd step(d);
  for (int i = 0; i < d; ++i) step(i) = 1e-4 * (1.0 + std::abs(theta(i)));

  Eigen::MatrixXd hess(d, d);
  const double f0 = f(theta);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd up = theta, dn = theta;
    up(i) += step(i);
    dn(i) -= step(i);
    hess(i, i) = (f(up) - 2.0 * f0 + f(dn)) / (step(i) * step(i));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      Eigen::VectorXd pp = theta, pm = theta, mp = theta, mm = theta;
      pp(i) += step(i); pp(j) += step(j);
      pm(i) += step(i); pm(j) -= step(j);
      mp(i) -= step(i); mp(j) += step(j);
      mm(i) -= step(i); mm(j) -= step(j);
      const double v2 =
          (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step(i) * step(j));
      hess(i, j) = v2;
      hess(j, i) = v2;
    }
  }

  try {
    const Eigen::MatrixXd l_info = chol_spd(-hess);
    Eigen::MatrixXd cov = chol_solve(l_info, Eigen::MatrixXd::Identity(d, d));
    cov = 0.5 * (cov + cov.transpose());
    out.fisher_chol = chol_spd(cov);
    out.fisher_cov = cov;
  } catch (const SpdError&) {
    out.hessian_fallback = true;
    out.fisher_cov = 0.01 * Eigen::MatrixXd::Identity(d, d);
    out.fisher_chol = 0.1 * Eigen::MatrixXd::Identity(d, d);
  }
  return out;
}

}  // namespace cvar
