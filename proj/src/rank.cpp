#include "cvar/rank.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cvar/parallel.hpp"

namespace cvar {

namespace {
constexpr double kLogPi = 1.1447298858494001741;
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

Eigen::MatrixXd schur_alpha_block(const Eigen::MatrixXd& a,
                                  const BlockPartition& part) {
  if (a.rows() != part.k || a.cols() != part.k)
    throw DimensionError("schur_alpha_block: matrix is not k x k");
  if (part.r == 0) return Eigen::MatrixXd(0, 0);
  const auto a11 = a.topLeftCorner(part.m, part.m);
  const auto a12 = a.topRightCorner(part.m, part.r);
  const auto a21 = a.bottomLeftCorner(part.r, part.m);
  const auto a22 = a.bottomRightCorner(part.r, part.r);
  const Eigen::MatrixXd l11 = chol_spd(a11);
  Eigen::MatrixXd s = a22 - a21 * chol_solve(l11, a12);
  return 0.5 * (s + s.transpose());
}

double log_prior_alpha_zero(const PriorSpec& prior, int r, int n,
                            const BlockPartition& part, PriorAlphaForm form) {
  if (!(prior.h > n - 1))
    throw ParamError("log_prior_alpha_zero: h must exceed n-1");
  if (r == 0) return 0.0;
  const Eigen::MatrixXd a221 = schur_alpha_block(prior.A.m(), part);
  const double log_det_a221 = log_det_from_chol(chol_spd(a221));
  const double log_det_s = prior.S.log_det();
  double log_det_tail = log_det_s;
  if (form == PriorAlphaForm::exact) {
    const Eigen::MatrixXd p2 = prior.P.bottomRows(r);
    Eigen::MatrixXd tail = prior.S.m() + p2.transpose() * a221 * p2;
    tail = 0.5 * (tail + tail.transpose());
    log_det_tail = log_det_from_chol(chol_spd(tail));
  }
  return -0.5 * n * r * kLogPi + 0.5 * prior.h * log_det_s +
         0.5 * n * log_det_a221 +
         log_multigamma_ratio(n, 0.5 * (prior.h + r), 0.5 * prior.h) -
         0.5 * (prior.h + r) * log_det_tail;
}

namespace {

std::vector<double> l1_terms_impl(const ChainTrace& trace,
                                  const FitContext& ctx, L1Exponent exponent,
                                  int jobs) {
  const EcmDesign& design = ctx.design();
  const int n = design.n;
  const int r = design.r;
  const double t = static_cast<double>(design.t);
  const double h = ctx.prior().h;
  const BlockPartition part = BlockPartition::from_design(design);
  const std::size_t count = trace.retained();

  // Constant across draws; hoisted out of the per-draw kernel.
  const double gamma_ratio =
      log_multigamma_ratio(n, 0.5 * (t + h + r), 0.5 * (t + h));
  const double tail_exp =
      exponent == L1Exponent::matrix_t ? 0.5 * (t + h + r) : 0.5 * (t + r);

  std::vector<double> terms(count);
  parallel_for_index(count, jobs, [&](std::size_t i) {
    const ChainState& state = trace.retained_state(i);
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      double ld_s_star = 0.0;
      const PosteriorSummary sum = ctx.summary(state.beta, &ld_s_star, nullptr);
      const Eigen::MatrixXd a221 = schur_alpha_block(sum.A_star.m(), part);
      const Eigen::MatrixXd l221 = chol_spd(a221);
      const Eigen::MatrixXd b2 = sum.B_star.bottomRows(r);
      Eigen::MatrixXd inner =
          sum.S_star.m() + b2.transpose() * a221 * b2;
      inner = 0.5 * (inner + inner.transpose());
      const double ld_inner = log_det_from_chol(chol_spd(inner));
      value = -0.5 * n * r * kLogPi + 0.5 * (t + h) * ld_s_star +
              0.5 * n * log_det_from_chol(l221) + gamma_ratio -
              tail_exp * ld_inner;
    } catch (const NumericError&) {
      // left NaN; dropped by the reducer
    }
    terms[i] = value;
  });
  return terms;
}

std::vector<double> l2_terms_impl(const ChainTrace& trace,
                                  const PriorSpec& prior,
                                  const BlockPartition& part, int jobs) {
  const int r = part.r;
  const std::size_t count = trace.retained();
  if (count == 0) return {};
  const int n = static_cast<int>(prior.P.cols());

  // Conditional of the alpha rows given the Gamma rows under the matrix
  // normal B|Sigma: row precision A22, mean P2 - A22^{-1} A21 (Gamma - P1).
  const Eigen::MatrixXd a21 = prior.A.m().bottomLeftCorner(r, part.m);
  const Eigen::MatrixXd a22 = prior.A.m().bottomRightCorner(r, r);
  const Eigen::MatrixXd l22 = chol_spd(a22);
  const double log_det_a22 = log_det_from_chol(l22);
  const Eigen::MatrixXd p1 = prior.P.topRows(part.m);
  const Eigen::MatrixXd p2 = prior.P.bottomRows(r);

  std::vector<double> terms(count);
  parallel_for_index(count, jobs, [&](std::size_t i) {
    const ChainState& state = trace.retained_state(i);
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      const Eigen::MatrixXd gamma_i = state.B.topRows(part.m);
      const Eigen::MatrixXd mean =
          p2 - chol_solve(l22, a21 * (gamma_i - p1));
      // density of 0: -nr/2 log2pi + n/2 log|A22| - r/2 log|Sigma|
      //              - tr[Sigma^{-1} M' A22 M]/2
      const Eigen::MatrixXd l_sigma = state.Sigma.chol();
      const Eigen::MatrixXd half =
          l_sigma.triangularView<Eigen::Lower>().solve(
              (l22.transpose() * mean).transpose());
      value = -0.5 * n * r * kLog2Pi + 0.5 * n * log_det_a22 -
              0.5 * r * log_det_from_chol(l_sigma) - 0.5 * half.squaredNorm();
    } catch (const NumericError&) {
    }
    terms[i] = value;
  });
  return terms;
}

LogMeanEstimate reduce_terms(std::vector<double> terms, const char* what) {
  LogMeanEstimate out;
  out.n_terms = terms.size();
  if (terms.empty()) throw ParamError(std::string(what) + ": empty trace");
  std::vector<double> kept;
  kept.reserve(terms.size());
  for (double v : terms) {
    if (std::isfinite(v)) kept.push_back(v);
  }
  out.n_dropped = terms.size() - kept.size();
  if (out.n_dropped * 100 > terms.size()) {
    throw NumericError(std::string(what) + ": " + std::to_string(out.n_dropped) +
                       " of " + std::to_string(terms.size()) +
                       " terms non-finite (> 1%)");
  }
  if (kept.empty())
    throw NumericError(std::string(what) + ": all terms non-finite");

  // Discount the SE by the autocorrelation of the shifted weights.
  const double n_eff = effective_sample_size(kept);
  const LogMeanExp stats = log_mean_exp_stats(kept, n_eff);
  out.value = stats.value;
  out.mc_se = stats.mc_se;
  out.max_term = stats.max_term;
  return out;
}

}  // namespace

std::vector<double> posterior_alpha_zero_terms(const ChainTrace& trace,
                                               const FitContext& ctx,
                                               L1Exponent exponent, int jobs) {
  return l1_terms_impl(trace, ctx, exponent, jobs);
}

std::vector<double> posterior_alpha_zero_terms_serial(const ChainTrace& trace,
                                                      const FitContext& ctx,
                                                      L1Exponent exponent) {
  return l1_terms_impl(trace, ctx, exponent, 1);
}

LogMeanEstimate log_posterior_alpha_zero(const ChainTrace& trace,
                                         const FitContext& ctx,
                                         L1Exponent exponent, int jobs) {
  return reduce_terms(posterior_alpha_zero_terms(trace, ctx, exponent, jobs),
                      "log_posterior_alpha_zero");
}

std::vector<double> correction_terms(const ChainTrace& trace,
                                     const PriorSpec& prior,
                                     const BlockPartition& part, int jobs) {
  return l2_terms_impl(trace, prior, part, jobs);
}

std::vector<double> correction_terms_serial(const ChainTrace& trace,
                                            const PriorSpec& prior,
                                            const BlockPartition& part) {
  return l2_terms_impl(trace, prior, part, 1);
}

LogMeanEstimate log_correction_cr(const ChainTrace& trace,
                                  const PriorSpec& prior,
                                  const BlockPartition& part, int jobs) {
  return reduce_terms(correction_terms(trace, prior, part, jobs),
                      "log_correction_cr");
}

double mvreg_log_evidence(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                          const Eigen::MatrixXd& p, const Eigen::MatrixXd& a,
                          const Eigen::MatrixXd& s, double h) {
  const double t = static_cast<double>(y.rows());
  const int n = static_cast<int>(y.cols());
  const Eigen::MatrixXd xtx =
      (x.transpose() * x).selfadjointView<Eigen::Lower>();
  Eigen::MatrixXd a_star = a + xtx;
  a_star = 0.5 * (a_star + a_star.transpose());
  const Eigen::MatrixXd l_a_star = chol_spd(a_star);

  Eigen::MatrixXd l_xtx;
  Eigen::MatrixXd xtx_used = xtx;
  try {
    l_xtx = chol_spd(xtx);
  } catch (const SpdError&) {
    const double ridge = 1e-10 * xtx.trace() / static_cast<double>(xtx.rows());
    xtx_used = xtx + ridge * Eigen::MatrixXd::Identity(xtx.rows(), xtx.cols());
    l_xtx = chol_spd(xtx_used);
  }
  const Eigen::MatrixXd b_hat = chol_solve(l_xtx, x.transpose() * y);
  const Eigen::MatrixXd resid = y - x * b_hat;
  const Eigen::MatrixXd m = a * chol_solve(l_a_star, xtx_used);
  const Eigen::MatrixXd d = p - b_hat;
  Eigen::MatrixXd s_star =
      s + resid.transpose() * resid + d.transpose() * (0.5 * (m + m.transpose())) * d;
  s_star = 0.5 * (s_star + s_star.transpose());

  return -0.5 * n * t * kLogPi +
         0.5 * n * (log_det_from_chol(chol_spd(a)) - log_det_from_chol(l_a_star)) +
         log_multigamma_ratio(n, 0.5 * (t + h), 0.5 * h) +
         0.5 * h * log_det_from_chol(chol_spd(s)) -
         0.5 * (t + h) * log_det_from_chol(chol_spd(s_star));
}

double log_conditioned_evidence(const EcmDesign& design, const PriorSpec& prior) {
  const int m = design.gamma_rows;
  const int r = design.r;
  if (r == 0) return mvreg_log_evidence(design.Y, design.X, prior.P,
                                        prior.A.m(), prior.S.m(), prior.h);
  const BlockPartition part = BlockPartition::from_design(design);
  const Eigen::MatrixXd a11 = prior.A.m().topLeftCorner(m, m);
  const Eigen::MatrixXd a12 = prior.A.m().topRightCorner(m, r);
  const Eigen::MatrixXd p1 = prior.P.topRows(m);
  const Eigen::MatrixXd p2 = prior.P.bottomRows(r);
  const Eigen::MatrixXd l11 = chol_spd(a11);
  const Eigen::MatrixXd p_cond = p1 + chol_solve(l11, a12 * p2);
  const Eigen::MatrixXd a221 = schur_alpha_block(prior.A.m(), part);
  Eigen::MatrixXd s_cond = prior.S.m() + p2.transpose() * a221 * p2;
  s_cond = 0.5 * (s_cond + s_cond.transpose());
  return mvreg_log_evidence(design.Y, design.X, p_cond, a11, s_cond,
                            prior.h + r);
}

double log_rank0_evidence(const EcmDesign& design, const PriorSpec& prior) {
  const int m = design.gamma_rows;
  const Eigen::MatrixXd a11 = prior.A.m().topLeftCorner(m, m);
  const Eigen::MatrixXd xtx = design.X.transpose() * design.X;
  const Eigen::MatrixXd p0 =
      chol_solve(chol_spd(xtx), design.X.transpose() * design.Y);
  return mvreg_log_evidence(design.Y, design.X, p0, a11, prior.S.m(), prior.h);
}

double log_correction_evidence(const EcmDesign& design, const PriorSpec& prior) {
  return log_conditioned_evidence(design, prior) -
         log_rank0_evidence(design, prior);
}

int RankPosterior::map_rank() const {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i) {
    if (probs(i) > probs(best)) best = i;
  }
  return best;
}

Eigen::VectorXd normalize_rank_probs(const Eigen::VectorXd& log_bf,
                                     const std::vector<bool>& excluded) {
  auto is_excluded = [&](int i) {
    return !excluded.empty() && excluded[static_cast<std::size_t>(i)];
  };
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < log_bf.size(); ++i) {
    if (!is_excluded(i)) mx = std::max(mx, log_bf(i));
  }
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(log_bf.size());
  if (mx == -std::numeric_limits<double>::infinity()) return probs;
  double denom = 0.0;
  for (int i = 0; i < log_bf.size(); ++i) {
    if (!is_excluded(i)) denom += std::exp(log_bf(i) - mx);
  }
  for (int i = 0; i < log_bf.size(); ++i) {
    if (!is_excluded(i)) probs(i) = std::exp(log_bf(i) - mx) / denom;
  }
  return probs;
}

RankPosterior rank_posterior(const std::vector<RankFit>& fits, int n,
                             L1Exponent exponent, int jobs,
                             CorrectionForm correction) {
  RankPosterior rp;
  rp.log_bf = Eigen::VectorXd::Zero(n + 1);
  rp.probs = Eigen::VectorXd::Zero(n + 1);
  rp.diag.resize(static_cast<std::size_t>(n + 1));
  rp.diag[0].r = 0;  // BF_{0|0} = 1 by definition, nothing to estimate
  for (int r = 1; r <= n; ++r) {
    rp.diag[static_cast<std::size_t>(r)].r = r;
    rp.diag[static_cast<std::size_t>(r)].excluded = true;
    rp.diag[static_cast<std::size_t>(r)].error = "no chain provided";
  }

  for (const RankFit& fit : fits) {
    RankDiag& d = rp.diag[static_cast<std::size_t>(fit.r)];
    d.r = fit.r;
    d.excluded = false;
    d.error.clear();
    try {
      const FitContext ctx = FitContext::make(*fit.design, *fit.prior);
      const BlockPartition part = BlockPartition::from_design(*fit.design);
      d.log_prior0 = log_prior_alpha_zero(*fit.prior, fit.r, n, part);
      const LogMeanEstimate post =
          log_posterior_alpha_zero(*fit.trace, ctx, exponent, jobs);
      d.log_post0 = post.value;
      d.max_shift = post.max_term;
      d.n_terms = post.n_terms;
      d.dropped = post.n_dropped;
      d.mc_se = post.mc_se;
      if (correction == CorrectionForm::evidence_ratio) {
        d.log_cr = log_correction_evidence(*fit.design, *fit.prior);
      } else {
        const LogMeanEstimate cr =
            log_correction_cr(*fit.trace, *fit.prior, part, jobs);
        d.log_cr = cr.value;
        d.dropped += cr.n_dropped;
        d.mc_se = std::sqrt(post.mc_se * post.mc_se + cr.mc_se * cr.mc_se);
      }
      d.log_bf = d.log_prior0 + d.log_cr - d.log_post0;
      rp.log_bf(fit.r) = d.log_bf;
    } catch (const std::exception& e) {
      d.excluded = true;
      d.error = e.what();
      rp.log_bf(fit.r) = -std::numeric_limits<double>::infinity();
    }
  }

  std::vector<bool> excluded(static_cast<std::size_t>(n + 1), false);
  for (int r = 0; r <= n; ++r)
    excluded[static_cast<std::size_t>(r)] = rp.diag[static_cast<std::size_t>(r)].excluded;
  rp.probs = normalize_rank_probs(rp.log_bf, excluded);
  return rp;
}

Eigen::VectorXd bma_weights(const RankPosterior& rp) { return rp.probs; }

}  // namespace cvar
