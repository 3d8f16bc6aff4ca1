#pragma once

#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "cvar/ecm.hpp"
#include "cvar/linalg.hpp"
#include "cvar/ml.hpp"
#include "cvar/rng.hpp"

namespace cvar {

enum class MoveKind { none, local, global, adaptive, fixed_rw };

const char* move_kind_name(MoveKind k);

/// Outcome of one Metropolis-Hastings update of the free cointegration block.
struct BetaStepReport {
  bool accepted = false;
  MoveKind move_kind = MoveKind::none;
  double log_accept_prob = 0.0;      // min(0, log A)
  Eigen::MatrixXd proposal_free;     // what was proposed (diagnostics)
};

/// Pretuned mixture sampler: with probability w1 an independence proposal
/// N(beta_ml, fisher_cov) over all free entries, otherwise a single
/// uniformly-chosen entry perturbed by its pretuned standard deviation.
struct Alg1Config {
  double w1 = 0.1;
  Eigen::MatrixXd local_sd;        // (n-r) x r, all positive
  Eigen::MatrixXd achieved_rates;  // per-entry acceptance in the last tuning batch
  bool tuned_in_band = true;
  double target_low = 0.3;
  double target_high = 0.5;
};

/// Adaptive random-walk sampler: with probability w1 (once warmed up and the
/// empirical covariance factors) a N(0, 2.38^2/d Sigma_j) step, otherwise the
/// fixed N(0, 0.1^2/d I) step. Both components are symmetric, so acceptance
/// depends on the target alone. The ever-present fixed component and the
/// O(1/j) drift of the running covariance are what keep adaptation safe.
struct Alg2Config {
  double w1 = 0.95;
  int warmup_min = 0;
  int d = 0;

  static Alg2Config make(int n, int r, double w1 = 0.95) {
    Alg2Config c;
    c.w1 = w1;
    c.d = (n - r) * r;
    c.warmup_min = std::max(100, 2 * c.d);
    return c;
  }
};

/// Log-density of the target, up to a constant. Injectable so tests can rig
/// the target; production code passes the collapsed marginal.
using BetaLogTarget = std::function<double(const ThinBeta&)>;

std::pair<ThinBeta, BetaStepReport> alg1_step(const ThinBeta& state,
                                              const BetaLogTarget& target,
                                              const Alg1Config& cfg,
                                              const MlEstimate& ml,
                                              RngStream& rng);

std::pair<ThinBeta, BetaStepReport> alg2_step(const ThinBeta& state,
                                              const BetaLogTarget& target,
                                              const Alg2Config& cfg,
                                              const RunningCovariance& adapt,
                                              RngStream& rng);

/// Stochastic-approximation tuning of the per-entry proposal scales: batches
/// of `batch` single-entry moves per coordinate, scale multiplied by
/// exp(0.5 (rate - 0.4)) after each batch, until every per-coordinate rate
/// sits in [0.3, 0.5] or `budget` total moves have been spent. When the
/// budget runs out first, the best scales found are returned with
/// tuned_in_band = false.
Alg1Config pretune_local_sd(const BetaLogTarget& target, int n, int r,
                            const ThinBeta& init, RngStream& rng,
                            int batch = 200, int budget = 20000);

/// Convenience overloads on the collapsed marginal target.
std::pair<ThinBeta, BetaStepReport> alg1_step(const ThinBeta& state,
                                              const EcmDesign& design,
                                              const PriorSpec& prior,
                                              const Alg1Config& cfg,
                                              const MlEstimate& ml,
                                              RngStream& rng);
std::pair<ThinBeta, BetaStepReport> alg2_step(const ThinBeta& state,
                                              const EcmDesign& design,
                                              const PriorSpec& prior,
                                              const Alg2Config& cfg,
                                              const RunningCovariance& adapt,
                                              RngStream& rng);
Alg1Config pretune_local_sd(const EcmDesign& design, const PriorSpec& prior,
                            RngStream& rng);

}  // namespace cvar
