#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "cvar/errors.hpp"

namespace cvar {

/// Lower Cholesky factor. Throws SpdError naming the failing pivot (0-based).
/// No symmetrization, no jitter: callers wanting the lenient policy use chol_spd.
Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& m);

/// Lenient Cholesky: symmetrize (M+M')/2, factor, and on failure retry once
/// with +1e-10*mean(diag)*I. A second failure throws SpdError.
Eigen::MatrixXd chol_spd(const Eigen::MatrixXd& m);

/// Solve A x = b for SPD A through its lower Cholesky factor.
Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& chol_lower_factor,
                           const Eigen::MatrixXd& b);

inline double log_det_from_chol(const Eigen::MatrixXd& l) {
  return 2.0 * l.diagonal().array().log().sum();
}

/// Symmetric positive definite matrix. Construction symmetrizes and validates:
/// asymmetry beyond 1e-10 absolute or a failed (jittered) factorization throws.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  static SpdMatrix from(Eigen::MatrixXd m);
  static SpdMatrix identity(int dim);

  const Eigen::MatrixXd& m() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

  /// Lower Cholesky factor under the lenient policy.
  Eigen::MatrixXd chol() const { return chol_spd(m_); }

  double log_det() const { return log_det_from_chol(chol()); }

 private:
  explicit SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

inline double log_det(const SpdMatrix& m) { return m.log_det(); }

/// log Gamma_p(a) = p(p-1)/4 * log(pi) + sum_j lgamma(a + (1-j)/2).
double log_multigamma(int p, double a);

/// log [Gamma_p(a_num) / Gamma_p(a_den)]; the pi factors cancel.
double log_multigamma_ratio(int p, double a_num, double a_den);

/// log( (1/N) sum exp(terms) ), max-shifted. Empty input throws; all -inf
/// yields -inf. Stable for terms up to ~700 apart.
double log_sum_exp_mean(const std::vector<double>& log_terms);

/// Same estimator plus a delta-method Monte Carlo standard error. n_eff lets
/// callers discount for autocorrelation; pass terms.size() for i.i.d. input.
struct LogMeanExp {
  double value = 0.0;
  double mc_se = 0.0;
  double max_term = 0.0;
  std::size_t n = 0;
};
LogMeanExp log_mean_exp_stats(const std::vector<double>& log_terms, double n_eff);

/// Single-pass mean/scatter accumulator (Welford), used for the adaptive
/// proposal covariance. The scatter is kept exactly symmetric.
class RunningCovariance {
 public:
  explicit RunningCovariance(int dim);

  void update(const Eigen::VectorXd& x);

  int dim() const { return static_cast<int>(mean_.size()); }
  long long count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& scatter() const { return scatter_; }

  /// scatter/(count-1); requires count >= 2.
  Eigen::MatrixXd covariance() const;

 private:
  long long count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;
};

/// Effective sample size of a scalar series via Geyer's initial positive
/// sequence. A (numerically) constant series reports 1.
double effective_sample_size(const std::vector<double>& series);

}  // namespace cvar
