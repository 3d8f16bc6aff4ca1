#pragma once

#include <Eigen/Dense>

#include "cvar/ecm.hpp"

namespace cvar {

/// Maximum-likelihood starting point for the cointegration block.
/// beta_ml comes from reduced-rank regression; fisher_cov is the inverse
/// negative Hessian of the collapsed log-target at beta_ml over the
/// column-major free entries, with a 0.1^2 I fallback when the Hessian
/// is not negative definite (flagged).
struct MlEstimate {
  ThinBeta beta_ml;
  Eigen::MatrixXd fisher_cov;   // d x d, d = (n-r) r
  Eigen::MatrixXd fisher_chol;  // lower factor, cached for proposals
  Eigen::VectorXd eigenvalues;  // squared canonical correlations, descending
  bool hessian_fallback = false;
};

/// Reduced-rank regression: partial out X from Y and Z, solve the
/// generalized eigenproblem S01' S00^{-1} S01 v = lambda S11 v, keep the r
/// leading eigenvectors and rotate so the top r x r block is the identity.
MlEstimate ml_estimate(const FitContext& ctx);

inline MlEstimate ml_estimate(const EcmDesign& design, const PriorSpec& prior) {
  return ml_estimate(FitContext::make(design, prior));
}

}  // namespace cvar
