#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cvar/gibbs.hpp"
#include "cvar/rank.hpp"

namespace cvar {

enum class ForecastMode { bmos, bma };

struct ForecastRequest {
  int horizon = 5;
  int n_noise_paths = 0;  // 0: mean path only
  ForecastMode mode = ForecastMode::bmos;
  bool levels = true;  // false: emit the difference-scale path
};

struct ForecastResult {
  Eigen::MatrixXd mean_path;  // horizon x n
  // Per-step quantiles of the sampled predictive paths (empty without paths).
  Eigen::MatrixXd q05, q25, q50, q75, q95;
  std::vector<std::pair<int, Eigen::MatrixXd>> per_rank_mean;  // BMA split
  std::size_t paths_used = 0;
  std::size_t paths_dropped = 0;
  bool overflow_flag = false;  // more than 1% of paths dropped
};

/// Forward-iterate the error correction recursion for one parameter draw.
/// `tail` holds the last p observed levels (oldest row first); shocks is
/// horizon x n or empty for the mean path. Returns levels (or differences).
Eigen::MatrixXd forecast_path(const ChainState& draw, int p,
                              const Eigen::MatrixXd& tail, int horizon,
                              const Eigen::MatrixXd& shocks, bool levels);

/// Predictive summary under one fixed rank: the mean path averages the
/// (exact, shock-free) per-draw recursions over all retained draws; quantile
/// bands come from n_noise_paths simulated paths with Gaussian shocks.
/// Draws whose recursion overflows are dropped and counted.
ForecastResult predict_fixed_rank(const ChainTrace& trace, int p,
                                  const Eigen::MatrixXd& tail,
                                  const ForecastRequest& req, RngStream& rng,
                                  int jobs = 1);

/// Serial reference for the mean-path kernel (bit-identical to the
/// parallel version).
Eigen::MatrixXd mean_path_kernel(const ChainTrace& trace, int p,
                                 const Eigen::MatrixXd& tail, int horizon,
                                 bool levels, std::size_t* dropped, int jobs);
Eigen::MatrixXd mean_path_kernel_serial(const ChainTrace& trace, int p,
                                        const Eigen::MatrixXd& tail,
                                        int horizon, bool levels,
                                        std::size_t* dropped);

/// Rank-averaged predictive: mean path is the probability-weighted mixture of
/// the per-rank mean paths; sampled paths are pooled with counts apportioned
/// to the weights (largest remainder).
ForecastResult predict_bma(const std::vector<RankFit>& fits,
                           const RankPosterior& rp, int p,
                           const Eigen::MatrixXd& tail,
                           const ForecastRequest& req, RngStream& rng,
                           int jobs = 1);

}  // namespace cvar
