#pragma once

#include <Eigen/Dense>

#include "cvar/linalg.hpp"
#include "cvar/panel.hpp"
#include "cvar/rng.hpp"

namespace cvar {

/// Cointegration matrix under the identification restriction: the full
/// n x r matrix is [I_r ; free] with the top r x r block pinned to the
/// identity, so only the (n-r) x r block below it is ever sampled.
/// Vectorization of the free block is column-major everywhere.
struct ThinBeta {
  int n = 0;
  int r = 0;
  Eigen::MatrixXd free;  // (n-r) x r

  static ThinBeta zero(int n, int r);
  static ThinBeta from_free(int n, int r, Eigen::MatrixXd f);
  static ThinBeta from_vec(int n, int r, const Eigen::VectorXd& v);

  int free_dim() const { return (n - r) * r; }
  Eigen::MatrixXd full() const;
  Eigen::VectorXd vec() const;
};

/// Regression-form layout of the error correction model:
///   Y = X Gamma + Z beta alpha' + E,  W = (X  Z beta),  B = [Gamma ; alpha'].
/// Row i (0-based) covers time step p+i of the panel:
///   Y[i]  = x[p+i]   - x[p+i-1]
///   Z[i]  = x[p+i-1]
///   X[i]  = [1, (x[p+i-1]-x[p+i-2])', ..., (x[i+1]-x[i])']
/// which uses every difference the panel can supply, giving t = rows - p.
struct EcmDesign {
  Eigen::MatrixXd Y;  // t x n
  Eigen::MatrixXd X;  // t x (1 + n(p-1))
  Eigen::MatrixXd Z;  // t x n
  int t = 0;
  int n = 0;
  int p = 0;
  int r = 0;
  int k = 0;           // 1 + n(p-1) + r
  int gamma_rows = 0;  // 1 + n(p-1)
};

EcmDesign build_ecm_design(const TimeSeriesPanel& panel, int p, int r);

/// W = [X | Z beta], t x k.
Eigen::MatrixXd assemble_w(const EcmDesign& design, const ThinBeta& beta);

/// Conjugate prior: beta ~ N(beta_mean, Q (x) H^{-1}),
/// Sigma ~ IW(S, h), B|Sigma ~ N(P, Sigma (x) A^{-1}).
struct PriorSpec {
  Eigen::MatrixXd beta_mean;  // n x r
  SpdMatrix Q;                // r x r  (column covariance of beta)
  SpdMatrix H;                // n x n  (row precision of beta)
  SpdMatrix S;                // n x n
  double h = 0.0;             // Sigma dof, must exceed n-1
  Eigen::MatrixXd P;          // k x n
  SpdMatrix A;                // k x k  (row precision of B)
  double lambda = 1.0;        // construction scalars, recorded for replay
  double tau = 0.0;
};

/// Data-driven default prior: P is the least-squares fit at beta = [I_r; 0],
/// A = lambda W'W / T, Q = I_r, H = tau Z'Z, S = tau Y'Y, h = n+1,
/// tau = 1/T unless overridden. T is the panel length. The default lambda
/// keeps the B prior worth a hundredth of an observation: a unit-information
/// anchor (lambda = 1) at the beta = [I_r; 0] fit measurably drags the
/// cointegration estimates toward zero and breaks rank selection.
PriorSpec default_prior(const EcmDesign& design, int series_len,
                        double lambda = 0.01, double tau = -1.0,
                        double dof_h = -1.0);

void validate_prior(const PriorSpec& prior, const EcmDesign& design);

/// Conjugate update at a fixed beta:
///   A* = A + W'W
///   B* = A*^{-1} (A P + W'Y)
///   S* = S + S_hat + (P - B_hat)' [A^{-1} + (W'W)^{-1}]^{-1} (P - B_hat)
/// with B_hat the least-squares coefficient and S_hat its residual scatter.
/// A rank-deficient W'W falls back to a ridge of 1e-10 tr(W'W)/k, surfaced
/// through `ridged`.
struct PosteriorSummary {
  SpdMatrix A_star;
  Eigen::MatrixXd B_star;
  SpdMatrix S_star;
  Eigen::MatrixXd B_hat;
  Eigen::MatrixXd S_hat;
  Eigen::MatrixXd W;
  bool ridged = false;
};

PosteriorSummary posterior_summary(const EcmDesign& design, const ThinBeta& beta,
                                   const PriorSpec& prior);

/// Unnormalized log p(beta | Y): free-block prior density plus
/// -(t+h+1)/2 log|S*| - n/2 log|A*|. Differences between two betas are
/// meaningful; the constant offset is not.
double log_marginal_beta(const EcmDesign& design, const ThinBeta& beta,
                         const PriorSpec& prior);

/// Prior factorizations reused across many target evaluations. Build once
/// per (design, prior) pair; the referenced design/prior must outlive it.
class FitContext {
 public:
  static FitContext make(const EcmDesign& design, const PriorSpec& prior);

  const EcmDesign& design() const { return *design_; }
  const PriorSpec& prior() const { return *prior_; }

  /// Normal prior density of the free block: the rows of beta below the
  /// identity are marginally N(beta_mean rows, H^{-1} sub-block (x) Q).
  double log_prior_free(const ThinBeta& beta) const;

  /// Collapsed target log p(beta | Y) up to an additive constant.
  double log_target(const ThinBeta& beta) const;

  /// Joint-form target at fixed (B, Sigma): free prior plus the Gaussian
  /// likelihood exponent. Kept for the literal algorithm-step acceptance.
  double log_target_joint(const ThinBeta& beta, const Eigen::MatrixXd& b,
                          const SpdMatrix& sigma) const;

  /// Summary plus the two log-determinants the target needs.
  PosteriorSummary summary(const ThinBeta& beta, double* log_det_s_star,
                           double* log_det_a_star) const;

  /// Draw the free block from its prior.
  Eigen::MatrixXd sample_beta_free_prior(RngStream& rng) const;

 private:
  const EcmDesign* design_ = nullptr;
  const PriorSpec* prior_ = nullptr;
  Eigen::MatrixXd beta_mean_free_;   // (n-r) x r
  Eigen::MatrixXd chol_h_inv_free_;  // lower factor of the H^{-1} sub-block
  Eigen::MatrixXd chol_q_;
  double prior_log_norm_ = 0.0;
};

}  // namespace cvar
