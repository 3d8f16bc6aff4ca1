#include "cvar/ecm.hpp"

#include <cmath>
#include <string>

namespace cvar {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

ThinBeta ThinBeta::zero(int n, int r) {
  ThinBeta b;
  b.n = n;
  b.r = r;
  b.free = Eigen::MatrixXd::Zero(n - r, r);
  return b;
}

ThinBeta ThinBeta::from_free(int n, int r, Eigen::MatrixXd f) {
  if (f.rows() != n - r || f.cols() != r)
    throw DimensionError("ThinBeta: free block must be (n-r) x r");
  ThinBeta b;
  b.n = n;
  b.r = r;
  b.free = std::move(f);
  return b;
}

ThinBeta ThinBeta::from_vec(int n, int r, const Eigen::VectorXd& v) {
  if (v.size() != static_cast<Eigen::Index>(n - r) * r)
    throw DimensionError("ThinBeta: vector length must be (n-r)*r");
  ThinBeta b;
  b.n = n;
  b.r = r;
  b.free = Eigen::Map<const Eigen::MatrixXd>(v.data(), n - r, r);
  return b;
}

Eigen::MatrixXd ThinBeta::full() const {
  Eigen::MatrixXd out(n, r);
  out.topRows(r) = Eigen::MatrixXd::Identity(r, r);
  out.bottomRows(n - r) = free;
  return out;
}

Eigen::VectorXd ThinBeta::vec() const {
  return Eigen::Map<const Eigen::VectorXd>(free.data(), free.size());
}

EcmDesign build_ecm_design(const TimeSeriesPanel& panel, int p, int r) {
  const int rows = panel.rows();
  const int n = panel.dim();
  if (p < 1) throw ParamError("build_ecm_design: lag p must be >= 1");
  if (r < 0 || r > n) throw ParamError("build_ecm_design: rank must be in [0, n]");
  if (rows < p + 2) {
    throw ParamError("build_ecm_design: panel has " + std::to_string(rows) +
                     " rows; lag " + std::to_string(p) + " needs at least " +
                     std::to_string(p + 2));
  }
  if (!panel.levels.allFinite())
    throw ParamError("build_ecm_design: panel contains non-finite values");

  EcmDesign d;
  d.n = n;
  d.p = p;
  d.r = r;
  d.t = rows - p;
  d.gamma_rows = 1 + n * (p - 1);
  d.k = d.gamma_rows + r;

  const Eigen::MatrixXd& x = panel.levels;
  d.Y.resize(d.t, n);
  d.Z.resize(d.t, n);
  d.X.resize(d.t, d.gamma_rows);
  for (int i = 0; i < d.t; ++i) {
    d.Y.row(i) = x.row(p + i) - x.row(p + i - 1);
    d.Z.row(i) = x.row(p + i - 1);
    d.X(i, 0) = 1.0;
    for (int lag = 1; lag <= p - 1; ++lag) {
      d.X.row(i).segment(1 + (lag - 1) * n, n) =
          x.row(p + i - lag) - x.row(p + i - lag - 1);
    }
  }
  return d;
}

Eigen::MatrixXd assemble_w(const EcmDesign& design, const ThinBeta& beta) {
  if (beta.n != design.n || beta.r != design.r)
    throw DimensionError("assemble_w: beta dims do not match design");
  Eigen::MatrixXd w(design.t, design.k);
  w.leftCols(design.gamma_rows) = design.X;
  if (design.r > 0) w.rightCols(design.r) = design.Z * beta.full();
  return w;
}

PriorSpec default_prior(const EcmDesign& design, int series_len, double lambda,
                        double tau, double dof_h) {
  const int n = design.n;
  const int r = design.r;
  const double series_t = static_cast<double>(series_len);
  if (tau <= 0.0) tau = 1.0 / series_t;
  if (dof_h <= 0.0) dof_h = n + 1;

  PriorSpec prior;
  prior.lambda = lambda;
  prior.tau = tau;
  prior.h = dof_h;

  auto sym = [](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    return 0.5 * (m + m.transpose());
  };

  const ThinBeta beta_hat = ThinBeta::zero(n, r);
  const Eigen::MatrixXd w = assemble_w(design, beta_hat);
  const Eigen::MatrixXd wtw = sym(w.transpose() * w);
  const Eigen::MatrixXd l = chol_spd(wtw);
  prior.P = chol_solve(l, w.transpose() * design.Y);
  prior.A = SpdMatrix::from((lambda / series_t) * wtw);

  prior.beta_mean = beta_hat.full();
  prior.Q = SpdMatrix::identity(r);
  prior.H = SpdMatrix::from(sym(tau * (design.Z.transpose() * design.Z)));
  prior.S = SpdMatrix::from(sym(tau * (design.Y.transpose() * design.Y)));
  return prior;
}

void validate_prior(const PriorSpec& prior, const EcmDesign& design) {
  const int n = design.n;
  const int r = design.r;
  if (!(prior.h > n - 1))
    throw ParamError("prior: Sigma dof h must exceed n-1");
  if (prior.beta_mean.rows() != n || prior.beta_mean.cols() != r)
    throw DimensionError("prior: beta_mean must be n x r");
  if (prior.Q.dim() != r) throw DimensionError("prior: Q must be r x r");
  if (prior.H.dim() != n) throw DimensionError("prior: H must be n x n");
  if (prior.S.dim() != n) throw DimensionError("prior: S must be n x n");
  if (prior.P.rows() != design.k || prior.P.cols() != n)
    throw DimensionError("prior: P must be k x n");
  if (prior.A.dim() != design.k) throw DimensionError("prior: A must be k x k");
}

namespace {

PosteriorSummary summary_impl(const EcmDesign& design, const ThinBeta& beta,
                              const PriorSpec& prior, double* log_det_s_star,
                              double* log_det_a_star) {
  if (design.t < 1) throw ParamError("posterior_summary: empty design");

  PosteriorSummary out;
  out.W = assemble_w(design, beta);
  const Eigen::MatrixXd wtw =
      (out.W.transpose() * out.W).selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd wty = out.W.transpose() * design.Y;

  Eigen::MatrixXd a_star = prior.A.m() + wtw;
  a_star = 0.5 * (a_star + a_star.transpose());
  const Eigen::MatrixXd l_a_star = chol_spd(a_star);

  // Least-squares block; ridge only if W'W is numerically rank deficient.
  Eigen::MatrixXd l_wtw;
  Eigen::MatrixXd wtw_used = wtw;
  try {
    l_wtw = chol_spd(wtw);
  } catch (const SpdError&) {
    const double ridge = 1e-10 * wtw.trace() / design.k;
    wtw_used = wtw + ridge * Eigen::MatrixXd::Identity(design.k, design.k);
    l_wtw = chol_spd(wtw_used);
    out.ridged = true;
  }
  out.B_hat = chol_solve(l_wtw, wty);

  const Eigen::MatrixXd resid = design.Y - out.W * out.B_hat;
  out.S_hat = resid.transpose() * resid;
  out.S_hat = 0.5 * (out.S_hat + out.S_hat.transpose());

  // [A^{-1} + (W'W)^{-1}]^{-1} = A A*^{-1} W'W, evaluated with one solve.
  const Eigen::MatrixXd m = prior.A.m() * chol_solve(l_a_star, wtw_used);
  const Eigen::MatrixXd d = prior.P - out.B_hat;
  Eigen::MatrixXd shrink = d.transpose() * (0.5 * (m + m.transpose())) * d;
  Eigen::MatrixXd s_star = prior.S.m() + out.S_hat + shrink;
  s_star = 0.5 * (s_star + s_star.transpose());
  const Eigen::MatrixXd l_s_star = chol_spd(s_star);

  out.B_star = chol_solve(l_a_star, prior.A.m() * prior.P + wty);
  out.A_star = SpdMatrix::from(a_star);
  out.S_star = SpdMatrix::from(s_star);
  if (log_det_a_star) *log_det_a_star = log_det_from_chol(l_a_star);
  if (log_det_s_star) *log_det_s_star = log_det_from_chol(l_s_star);
  return out;
}

}  // namespace

PosteriorSummary posterior_summary(const EcmDesign& design, const ThinBeta& beta,
                                   const PriorSpec& prior) {
  return summary_impl(design, beta, prior, nullptr, nullptr);
}

FitContext FitContext::make(const EcmDesign& design, const PriorSpec& prior) {
  validate_prior(prior, design);
  FitContext ctx;
  ctx.design_ = &design;
  ctx.prior_ = &prior;
  const int n = design.n;
  const int r = design.r;
  const int nf = n - r;
  if (r > 0 && nf > 0) {
    // Free-row marginal of the beta prior: rows r+1..n of beta are
    // N(rows of beta_mean, U (x) Q) with U the matching block of H^{-1}.
    const Eigen::MatrixXd l_h = prior.H.chol();
    const Eigen::MatrixXd h_inv =
        chol_solve(l_h, Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd u = h_inv.bottomRightCorner(nf, nf);
    ctx.chol_h_inv_free_ = chol_spd(u);
    ctx.chol_q_ = prior.Q.chol();
    ctx.beta_mean_free_ = prior.beta_mean.bottomRows(nf);
    ctx.prior_log_norm_ =
        -0.5 * nf * r * kLog2Pi -
        0.5 * r * log_det_from_chol(ctx.chol_h_inv_free_) -
        0.5 * nf * log_det_from_chol(ctx.chol_q_);
  }
  return ctx;
}

double FitContext::log_prior_free(const ThinBeta& beta) const {
  if (beta.free_dim() == 0) return 0.0;
  const Eigen::MatrixXd d = beta.free - beta_mean_free_;
  const Eigen::MatrixXd e =
      chol_h_inv_free_.triangularView<Eigen::Lower>().solve(d);
  const Eigen::MatrixXd f =
      chol_q_.triangularView<Eigen::Lower>().solve(e.transpose());
  return prior_log_norm_ - 0.5 * f.squaredNorm();
}

double FitContext::log_target(const ThinBeta& beta) const {
  double ld_s = 0.0, ld_a = 0.0;
  summary_impl(*design_, beta, *prior_, &ld_s, &ld_a);
  return log_prior_free(beta) -
         0.5 * (design_->t + prior_->h + 1.0) * ld_s - 0.5 * design_->n * ld_a;
}

double FitContext::log_target_joint(const ThinBeta& beta,
                                    const Eigen::MatrixXd& b,
                                    const SpdMatrix& sigma) const {
  const Eigen::MatrixXd w = assemble_w(*design_, beta);
  const Eigen::MatrixXd resid = design_->Y - w * b;
  const Eigen::MatrixXd l_sigma = sigma.chol();
  const Eigen::MatrixXd half =
      l_sigma.triangularView<Eigen::Lower>().solve(resid.transpose());
  return log_prior_free(beta) - 0.5 * half.squaredNorm();
}

PosteriorSummary FitContext::summary(const ThinBeta& beta,
                                     double* log_det_s_star,
                                     double* log_det_a_star) const {
  return summary_impl(*design_, beta, *prior_, log_det_s_star, log_det_a_star);
}

Eigen::MatrixXd FitContext::sample_beta_free_prior(RngStream& rng) const {
  const int nf = design_->n - design_->r;
  const int r = design_->r;
  if (nf == 0 || r == 0) return Eigen::MatrixXd(nf, r);
  const Eigen::MatrixXd z = rng.normal_matrix(nf, r);
  return beta_mean_free_ + chol_h_inv_free_ * z * chol_q_.transpose();
}

double log_marginal_beta(const EcmDesign& design, const ThinBeta& beta,
                         const PriorSpec& prior) {
  return FitContext::make(design, prior).log_target(beta);
}

}  // namespace cvar
