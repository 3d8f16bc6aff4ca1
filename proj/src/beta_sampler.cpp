#include "cvar/beta_sampler.hpp"

#include <algorithm>
#include <cmath>

#include "cvar/matrix_rand.hpp"

namespace cvar {

const char* move_kind_name(MoveKind k) {
  switch (k) {
    case MoveKind::none: return "none";
    case MoveKind::local: return "local";
    case MoveKind::global: return "global";
    case MoveKind::adaptive: return "adaptive";
    case MoveKind::fixed_rw: return "fixed-rw";
  }
  return "?";
}

namespace {

bool mh_accept(double log_a, RngStream& rng) {
  if (log_a >= 0.0) return true;
  return std::log(1.0 - rng.uniform()) < log_a;
}

BetaStepReport empty_block_report() {
  BetaStepReport rep;
  rep.accepted = true;
  rep.move_kind = MoveKind::none;
  rep.log_accept_prob = 0.0;
  return rep;
}

}  // namespace

std::pair<ThinBeta, BetaStepReport> alg1_step(const ThinBeta& state,
                                              const BetaLogTarget& target,
                                              const Alg1Config& cfg,
                                              const MlEstimate& ml,
                                              RngStream& rng) {
  const int d = state.free_dim();
  if (d == 0) return {state, empty_block_report()};

  BetaStepReport rep;
  ThinBeta proposal = state;
  double log_a;

  if (rng.uniform() < cfg.w1) {
    // Independence move over every free entry. The proposal density does not
    // cancel: both directions enter the ratio. The local component puts no
    // mass on a full-block change, so it does not appear here.
    rep.move_kind = MoveKind::global;
    const Eigen::VectorXd z = rng.normal_vector(d);
    const Eigen::VectorXd prop_vec = ml.beta_ml.vec() + ml.fisher_chol * z;
    proposal = ThinBeta::from_vec(state.n, state.r, prop_vec);
    const double q_fwd = log_mvn(prop_vec, ml.beta_ml.vec(), ml.fisher_chol);
    const double q_rev = log_mvn(state.vec(), ml.beta_ml.vec(), ml.fisher_chol);
    log_a = target(proposal) - target(state) + q_rev - q_fwd;
  } else {
    // Single-entry random walk; the Gaussian perturbation is symmetric and
    // the global component puts no mass on a one-entry change, so the
    // acceptance ratio is target-only.
    rep.move_kind = MoveKind::local;
    const int rows = state.n - state.r;
    const int idx = std::min<int>(d - 1, static_cast<int>(rng.uniform() * d));
    const int i = idx % rows;
    const int j = idx / rows;
    proposal.free(i, j) += cfg.local_sd(i, j) * rng.normal();
    log_a = target(proposal) - target(state);
  }

  rep.proposal_free = proposal.free;
  rep.log_accept_prob = std::min(0.0, log_a);
  rep.accepted = mh_accept(log_a, rng);
  return {rep.accepted ? proposal : state, rep};
}

std::pair<ThinBeta, BetaStepReport> alg2_step(const ThinBeta& state,
                                              const BetaLogTarget& target,
                                              const Alg2Config& cfg,
                                              const RunningCovariance& adapt,
                                              RngStream& rng) {
  const int d = state.free_dim();
  if (d == 0) return {state, empty_block_report()};
  if (adapt.dim() != d)
    throw DimensionError("alg2_step: running covariance dimension mismatch");

  BetaStepReport rep;
  bool adaptive = rng.uniform() < cfg.w1 && adapt.count() > cfg.warmup_min;
  Eigen::MatrixXd chol_cov;
  if (adaptive) {
    try {
      chol_cov = chol_spd(adapt.covariance());
    } catch (const SpdError&) {
      adaptive = false;  // degenerate history: fall back to the fixed kernel
    }
  }

  const Eigen::VectorXd z = rng.normal_vector(d);
  Eigen::VectorXd step;
  if (adaptive) {
    rep.move_kind = MoveKind::adaptive;
    step = (2.38 / std::sqrt(static_cast<double>(d))) * (chol_cov * z);
  } else {
    rep.move_kind = MoveKind::fixed_rw;
    step = (0.1 / std::sqrt(static_cast<double>(d))) * z;
  }

  const ThinBeta proposal =
      ThinBeta::from_vec(state.n, state.r, state.vec() + step);
  const double log_a = target(proposal) - target(state);
  rep.proposal_free = proposal.free;
  rep.log_accept_prob = std::min(0.0, log_a);
  rep.accepted = mh_accept(log_a, rng);
  return {rep.accepted ? proposal : state, rep};
}

Alg1Config pretune_local_sd(const BetaLogTarget& target, int n, int r,
                            const ThinBeta& init, RngStream& rng, int batch,
                            int budget) {
  Alg1Config cfg;
  const int rows = n - r;
  const int d = rows * r;
  cfg.local_sd = Eigen::MatrixXd::Constant(rows, r, 0.1);
  cfg.achieved_rates = Eigen::MatrixXd::Zero(rows, r);
  if (d == 0) {
    cfg.tuned_in_band = true;
    return cfg;
  }

  ThinBeta state = init;
  double log_cur = target(state);
  int total = 0;
  bool in_band = false;
  while (total < budget && !in_band) {
    in_band = true;
    for (int j = 0; j < r && total < budget; ++j) {
      for (int i = 0; i < rows && total < budget; ++i) {
        int accepted = 0;
        for (int b = 0; b < batch; ++b) {
          ThinBeta prop = state;
          prop.free(i, j) += cfg.local_sd(i, j) * rng.normal();
          const double log_prop = target(prop);
          if (mh_accept(log_prop - log_cur, rng)) {
            state = prop;
            log_cur = log_prop;
            ++accepted;
          }
        }
        total += batch;
        const double rate = static_cast<double>(accepted) / batch;
        cfg.achieved_rates(i, j) = rate;
        if (rate < cfg.target_low || rate > cfg.target_high) {
          cfg.local_sd(i, j) *= std::exp(0.5 * (rate - 0.4));
          in_band = false;
        }
      }
    }
  }
  cfg.tuned_in_band = in_band;
  return cfg;
}

std::pair<ThinBeta, BetaStepReport> alg1_step(const ThinBeta& state,
                                              const EcmDesign& design,
                                              const PriorSpec& prior,
                                              const Alg1Config& cfg,
                                              const MlEstimate& ml,
                                              RngStream& rng) {
  const FitContext ctx = FitContext::make(design, prior);
  return alg1_step(state, [&](const ThinBeta& b) { return ctx.log_target(b); },
                   cfg, ml, rng);
}

std::pair<ThinBeta, BetaStepReport> alg2_step(const ThinBeta& state,
                                              const EcmDesign& design,
                                              const PriorSpec& prior,
                                              const Alg2Config& cfg,
                                              const RunningCovariance& adapt,
                                              RngStream& rng) {
  const FitContext ctx = FitContext::make(design, prior);
  return alg2_step(state, [&](const ThinBeta& b) { return ctx.log_target(b); },
                   cfg, adapt, rng);
}

Alg1Config pretune_local_sd(const EcmDesign& design, const PriorSpec& prior,
                            RngStream& rng) {
  const FitContext ctx = FitContext::make(design, prior);
  const ThinBeta init =
      ThinBeta::from_free(design.n, design.r,
                          prior.beta_mean.bottomRows(design.n - design.r));
  return pretune_local_sd([&](const ThinBeta& b) { return ctx.log_target(b); },
                          design.n, design.r, init, rng);
}

}  // namespace cvar
