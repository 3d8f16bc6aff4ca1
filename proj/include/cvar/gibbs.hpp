#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvar/beta_sampler.hpp"
#include "cvar/ecm.hpp"
#include "cvar/matrix_rand.hpp"

namespace cvar {

enum class SamplerKind { alg1, alg2 };
enum class TargetForm { collapsed, joint };

const char* sampler_kind_name(SamplerKind k);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::alg2;
  Alg1Config alg1;
  Alg2Config alg2;
  /// collapsed: the beta step targets the marginal p(beta|Y) and runs before
  /// the exact Sigma and B draws (partially collapsed sweep, the default).
  /// joint: the literal step order — Sigma, B, then beta accepted against
  /// the joint density at the freshly drawn (Sigma, B).
  TargetForm target_form = TargetForm::collapsed;
  int thin = 1;
};

/// One Gibbs state. B stacks the deterministic/lag coefficients on top of
/// alpha': Gamma = B.topRows(gamma_rows), alpha = B.bottomRows(r)'.
struct ChainState {
  ThinBeta beta;
  Eigen::MatrixXd B;  // k x n
  SpdMatrix Sigma;    // n x n
};

Eigen::MatrixXd alpha_of(const ChainState& state);

struct ChainTrace {
  std::vector<ChainState> states;        // every thin-th sweep, in order
  std::vector<BetaStepReport> reports;   // aligned with states
  std::size_t burnin_stored = 0;         // retained range is [burnin_stored, end)
  int iters = 0;
  int burnin = 0;
  int thin = 1;
  SamplerKind kind = SamplerKind::alg2;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double watchdog_fraction = 0.0;  // retained states with ||alpha||_inf < 1e-6
  bool watchdog_flag = false;

  std::size_t retained() const { return states.size() - burnin_stored; }
  const ChainState& retained_state(std::size_t i) const {
    return states[burnin_stored + i];
  }
};

struct ChainInit {
  enum class Mode { ml, prior, explicit_state };
  Mode mode = Mode::ml;
  std::optional<ChainState> state;

  static ChainInit ml() { return ChainInit{}; }
  static ChainInit prior() { return ChainInit{Mode::prior, std::nullopt}; }
  static ChainInit at(ChainState s) {
    return ChainInit{Mode::explicit_state, std::move(s)};
  }
};

/// Per-chain mutable pieces threaded through the sweeps.
struct SweepWorkspace {
  std::optional<MlEstimate> ml;
  RunningCovariance adapt{0};
  std::optional<PosteriorSummary> fixed_beta_summary;  // cached when d == 0
};

/// One sweep: beta MH update, then Sigma ~ IW(S*(beta), t+h), then
/// B ~ N(B*, Sigma (x) A*^{-1}) — or the joint-form order when configured.
std::pair<ChainState, BetaStepReport> gibbs_sweep(const ChainState& state,
                                                  const FitContext& ctx,
                                                  const SamplerConfig& cfg,
                                                  SweepWorkspace& ws,
                                                  RngStream& rng);

/// Run a full chain. The adaptive covariance is fed every post-decision
/// state. Deterministic replay under a fixed (seed, stream).
ChainTrace run_chain(const FitContext& ctx, const SamplerConfig& cfg, int iters,
                     int burnin, const ChainInit& init, RngStream rng);

struct PointEstimates {
  ThinBeta beta_mmse;
  Eigen::MatrixXd beta_sd;
  Eigen::MatrixXd B_mmse;
  Eigen::MatrixXd B_sd;
  SpdMatrix Sigma_mmse;
  Eigen::MatrixXd Sigma_sd;
  double trace_sigma_mmse = 0.0;
  double trace_sigma_sd = 0.0;
};

/// Entrywise posterior means and standard deviations over retained states.
PointEstimates point_estimates(const ChainTrace& trace);

struct MoveStats {
  MoveKind kind = MoveKind::none;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double rate() const {
    return proposed ? static_cast<double>(accepted) / proposed : 0.0;
  }
};

struct ParamDiag {
  std::string name;
  double ess = 0.0;
  double act = 0.0;  // integrated autocorrelation time
};

struct Diagnostics {
  std::vector<ParamDiag> params;   // beta entries, alpha entries, tr(Sigma)
  std::vector<MoveStats> moves;
  double beta_accept_rate = 0.0;   // over all beta-updating moves
  double alpha_watchdog_fraction = 0.0;
  bool watchdog_flag = false;
  double min_ess = 0.0;
};

Diagnostics diagnostics(const ChainTrace& trace);

}  // namespace cvar
