#include "cvar/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace cvar {

const char* sampler_kind_name(SamplerKind k) {
  return k == SamplerKind::alg1 ? "alg1" : "alg2";
}

Eigen::MatrixXd alpha_of(const ChainState& state) {
  const int r = state.beta.r;
  return state.B.bottomRows(r).transpose();
}

namespace {

ChainState draw_sigma_and_b(const FitContext& ctx, const PosteriorSummary& sum,
                            const ThinBeta& beta, RngStream& rng) {
  const EcmDesign& d = ctx.design();
  ChainState out;
  out.beta = beta;
  out.Sigma = sample_inverse_wishart(sum.S_star, d.t + ctx.prior().h, rng);
  out.B = sample_matrix_normal(sum.B_star, sum.A_star, out.Sigma, rng);
  return out;
}

const PosteriorSummary& summary_for(const FitContext& ctx, const ThinBeta& beta,
                                    SweepWorkspace& ws,
                                    PosteriorSummary& scratch) {
  if (beta.free_dim() == 0) {
    // W never changes; compute the conjugate update once.
    if (!ws.fixed_beta_summary)
      ws.fixed_beta_summary = ctx.summary(beta, nullptr, nullptr);
    return *ws.fixed_beta_summary;
  }
  scratch = ctx.summary(beta, nullptr, nullptr);
  return scratch;
}

std::pair<ThinBeta, BetaStepReport> beta_update(const ThinBeta& beta,
                                                const BetaLogTarget& target,
                                                const SamplerConfig& cfg,
                                                SweepWorkspace& ws,
                                                RngStream& rng) {
  if (cfg.kind == SamplerKind::alg1) {
    return alg1_step(beta, target, cfg.alg1, *ws.ml, rng);
  }
  return alg2_step(beta, target, cfg.alg2, ws.adapt, rng);
}

}  // namespace

std::pair<ChainState, BetaStepReport> gibbs_sweep(const ChainState& state,
                                                  const FitContext& ctx,
                                                  const SamplerConfig& cfg,
                                                  SweepWorkspace& ws,
                                                  RngStream& rng) {
  PosteriorSummary scratch;

  if (cfg.target_form == TargetForm::collapsed) {
    ThinBeta beta_new = state.beta;
    BetaStepReport rep;
    if (state.beta.free_dim() == 0) {
      rep.accepted = true;
      rep.move_kind = MoveKind::none;
    } else {
      const BetaLogTarget target = [&](const ThinBeta& b) {
        return ctx.log_target(b);
      };
      std::tie(beta_new, rep) = beta_update(state.beta, target, cfg, ws, rng);
    }
    const PosteriorSummary& sum = summary_for(ctx, beta_new, ws, scratch);
    return {draw_sigma_and_b(ctx, sum, beta_new, rng), rep};
  }

  // Literal order: exact Sigma and B at the current beta, then the beta move
  // accepted against the joint density at the fresh (Sigma, B).
  const PosteriorSummary& sum = summary_for(ctx, state.beta, ws, scratch);
  ChainState mid = draw_sigma_and_b(ctx, sum, state.beta, rng);
  if (state.beta.free_dim() == 0) {
    BetaStepReport rep;
    rep.accepted = true;
    rep.move_kind = MoveKind::none;
    return {mid, rep};
  }
  const BetaLogTarget target = [&](const ThinBeta& b) {
    return ctx.log_target_joint(b, mid.B, mid.Sigma);
  };
  auto [beta_new, rep] = beta_update(state.beta, target, cfg, ws, rng);
  mid.beta = beta_new;
  return {mid, rep};
}

ChainTrace run_chain(const FitContext& ctx, const SamplerConfig& cfg, int iters,
                     int burnin, const ChainInit& init, RngStream rng) {
  const EcmDesign& design = ctx.design();
  if (iters <= burnin)
    throw ParamError("run_chain: iterations must exceed burnin");
  const int thin = std::max(1, cfg.thin);
  const int d = (design.n - design.r) * design.r;

  SweepWorkspace ws;
  ws.adapt = RunningCovariance(d);
  const bool needs_ml =
      (cfg.kind == SamplerKind::alg1 && d > 0) ||
      (init.mode == ChainInit::Mode::ml && design.r > 0);
  if (needs_ml) ws.ml = ml_estimate(ctx);

  // Initial state.
  ChainState state;
  switch (init.mode) {
    case ChainInit::Mode::explicit_state:
      state = *init.state;
      break;
    case ChainInit::Mode::ml: {
      const ThinBeta beta0 = design.r > 0 ? ws.ml->beta_ml
                                          : ThinBeta::zero(design.n, design.r);
      PosteriorSummary scratch;
      const PosteriorSummary& sum = summary_for(ctx, beta0, ws, scratch);
      state = draw_sigma_and_b(ctx, sum, beta0, rng);
      break;
    }
    case ChainInit::Mode::prior: {
      ThinBeta beta0 = ThinBeta::zero(design.n, design.r);
      beta0.free = ctx.sample_beta_free_prior(rng);
      state.beta = beta0;
      state.Sigma = sample_inverse_wishart(ctx.prior().S, ctx.prior().h, rng);
      state.B = sample_matrix_normal(ctx.prior().P, ctx.prior().A, state.Sigma,
                                     rng);
      break;
    }
  }
  if (d > 0) ws.adapt.update(state.beta.vec());

  ChainTrace trace;
  trace.iters = iters;
  trace.burnin = burnin;
  trace.thin = thin;
  trace.kind = cfg.kind;
  trace.seed = rng.seed();
  trace.stream = rng.stream();
  trace.states.reserve(static_cast<std::size_t>(iters / thin) + 1);
  trace.reports.reserve(static_cast<std::size_t>(iters / thin) + 1);

  for (int j = 1; j <= iters; ++j) {
    auto [next, rep] = gibbs_sweep(state, ctx, cfg, ws, rng);
    state = std::move(next);
    if (d > 0) ws.adapt.update(state.beta.vec());
    if (j % thin == 0) {
      trace.states.push_back(state);
      trace.reports.push_back(rep);
      if (j <= burnin) ++trace.burnin_stored;
    }
  }

  // Local-identification watchdog: a chain stuck at alpha = 0 cannot move
  // beta any more.
  if (design.r > 0 && trace.retained() > 0) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < trace.retained(); ++i) {
      if (alpha_of(trace.retained_state(i)).cwiseAbs().maxCoeff() < 1e-6)
        ++hits;
    }
    trace.watchdog_fraction =
        static_cast<double>(hits) / static_cast<double>(trace.retained());
    trace.watchdog_flag = trace.watchdog_fraction > 0.05;
  }
  return trace;
}

PointEstimates point_estimates(const ChainTrace& trace) {
  const std::size_t n_ret = trace.retained();
  if (n_ret == 0) throw ParamError("point_estimates: no retained states");

  const ChainState& first = trace.retained_state(0);
  PointEstimates out;
  Eigen::MatrixXd beta_m = Eigen::MatrixXd::Zero(first.beta.free.rows(),
                                                 first.beta.free.cols());
  Eigen::MatrixXd beta_s = beta_m;
  Eigen::MatrixXd b_m = Eigen::MatrixXd::Zero(first.B.rows(), first.B.cols());
  Eigen::MatrixXd b_s = b_m;
  Eigen::MatrixXd sig_m = Eigen::MatrixXd::Zero(first.Sigma.dim(), first.Sigma.dim());
  Eigen::MatrixXd sig_s = sig_m;
  double tr_m = 0.0, tr_s = 0.0;

  // Accumulate relative to the first retained state: a degenerate trace then
  // produces exact zeros, and the conditioning improves in general.
  const double n = static_cast<double>(n_ret);
  const double tr0 = first.Sigma.m().trace();
  for (std::size_t i = 0; i < n_ret; ++i) {
    const ChainState& s = trace.retained_state(i);
    beta_m += s.beta.free - first.beta.free;
    b_m += s.B - first.B;
    sig_m += s.Sigma.m() - first.Sigma.m();
    tr_m += s.Sigma.m().trace() - tr0;
  }
  beta_m /= n;
  b_m /= n;
  sig_m /= n;
  tr_m /= n;
  for (std::size_t i = 0; i < n_ret; ++i) {
    const ChainState& s = trace.retained_state(i);
    beta_s += (s.beta.free - first.beta.free - beta_m).cwiseAbs2();
    b_s += (s.B - first.B - b_m).cwiseAbs2();
    sig_s += (s.Sigma.m() - first.Sigma.m() - sig_m).cwiseAbs2();
    const double d = s.Sigma.m().trace() - tr0 - tr_m;
    tr_s += d * d;
  }
  beta_m += first.beta.free;
  b_m += first.B;
  sig_m += first.Sigma.m();
  tr_m += tr0;
  beta_s = (beta_s / n).cwiseSqrt();
  b_s = (b_s / n).cwiseSqrt();
  sig_s = (sig_s / n).cwiseSqrt();
  tr_s = std::sqrt(tr_s / n);

  out.beta_mmse = ThinBeta::from_free(first.beta.n, first.beta.r, beta_m);
  out.beta_sd = beta_s;
  out.B_mmse = b_m;
  out.B_sd = b_s;
  out.Sigma_mmse = SpdMatrix::from(0.5 * (sig_m + sig_m.transpose()));
  out.Sigma_sd = sig_s;
  out.trace_sigma_mmse = tr_m;
  out.trace_sigma_sd = tr_s;
  return out;
}

Diagnostics diagnostics(const ChainTrace& trace) {
  Diagnostics out;
  const std::size_t n_ret = trace.retained();
  if (n_ret == 0) return out;

  const ChainState& first = trace.retained_state(0);
  const int n = first.beta.n;
  const int r = first.beta.r;
  const int nf = n - r;

  auto add_param = [&](const std::string& name, const std::vector<double>& s) {
    ParamDiag pd;
    pd.name = name;
    pd.ess = effective_sample_size(s);
    pd.act = static_cast<double>(s.size()) / pd.ess;
    out.params.push_back(std::move(pd));
  };

  std::vector<double> series(n_ret);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < nf; ++i) {
      for (std::size_t m = 0; m < n_ret; ++m)
        series[m] = trace.retained_state(m).beta.free(i, j);
      add_param("beta_" + std::to_string(r + i + 1) + "_" + std::to_string(j + 1),
                series);
    }
  }
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < n_ret; ++m)
        series[m] = alpha_of(trace.retained_state(m))(i, j);
      add_param("alpha_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
                series);
    }
  }
  for (std::size_t m = 0; m < n_ret; ++m)
    series[m] = trace.retained_state(m).Sigma.m().trace();
  add_param("trace_sigma", series);

  out.min_ess = out.params.empty() ? 0.0 : out.params[0].ess;
  for (const auto& p : out.params) out.min_ess = std::min(out.min_ess, p.ess);

  // Acceptance bookkeeping over the whole stored range.
  const MoveKind kinds[] = {MoveKind::local, MoveKind::global,
                            MoveKind::adaptive, MoveKind::fixed_rw};
  std::size_t total = 0, acc = 0;
  for (MoveKind k : kinds) {
    MoveStats ms;
    ms.kind = k;
    for (const auto& rep : trace.reports) {
      if (rep.move_kind != k) continue;
      ++ms.proposed;
      if (rep.accepted) ++ms.accepted;
    }
    if (ms.proposed > 0) {
      total += ms.proposed;
      acc += ms.accepted;
      out.moves.push_back(ms);
    }
  }
  out.beta_accept_rate = total ? static_cast<double>(acc) / total : 0.0;
  out.alpha_watchdog_fraction = trace.watchdog_fraction;
  out.watchdog_flag = trace.watchdog_flag;
  return out;
}

}  // namespace cvar
