#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cvar/gibbs.hpp"
#include "cvar/io.hpp"
#include "cvar/rank.hpp"
#include "cvar/synth.hpp"

namespace cvar::app {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitWatchdog = 4;

/// A fit run aborts with kExitWatchdog when this fraction of retained states
/// sits at the alpha = 0 identification trap.
inline constexpr double kWatchdogHardLimit = 0.25;

struct PriorOverrides {
  double lambda = 0.01;
  double tau = -1.0;  // <= 0: 1/T
  double h = -1.0;    // <= 0: n+1
};

struct SynthConfig {
  std::string preset;  // named model; when empty, n/p/r generate one
  int n = 0;
  int p = 1;
  int r = 0;
  int rows = 100;
  std::string name = "synth";
  std::string out = ".";
  std::uint64_t seed = 1;
};

struct FitConfig {
  std::string data;
  int lag = 1;
  int rank = 1;
  std::string sampler = "alg2";
  std::string target = "collapsed";
  std::string init = "ml";
  int iters = 20000;
  int burnin = 10000;
  int thin = 1;
  PriorOverrides prior;
  std::string out = ".";
  std::uint64_t seed = 1;
  int jobs = 0;
};

struct RankScanConfig {
  std::string data;
  int lag = 1;
  std::string sampler = "alg2";
  int iters = 20000;
  int burnin = 10000;
  std::vector<int> window_grid;  // growing prefixes; empty = whole panel
  int replicates = 1;
  PriorOverrides prior;
  std::string out = ".";
  std::uint64_t seed = 1;
  int jobs = 0;
};

struct PredictConfig {
  std::string data;
  int lag = 1;
  std::string mode = "bmos";
  std::optional<int> rank;  // pin the rank instead of scanning (bmos only)
  int horizon = 5;
  int paths = 400;
  bool levels = true;
  std::string sampler = "alg2";
  int iters = 20000;
  int burnin = 10000;
  int eval_windows = 0;  // > 0: squared-error study over random windows
  int eval_window_len = 50;
  PriorOverrides prior;
  std::string out = ".";
  std::uint64_t seed = 1;
  int jobs = 0;
};

int run_synth(const SynthConfig& cfg);
int run_fit(const FitConfig& cfg);
int run_rank_scan(const RankScanConfig& cfg);
int run_predict(const PredictConfig& cfg);

SamplerKind parse_sampler(const std::string& s);
TargetForm parse_target(const std::string& s);

/// One fitted rank bundling the chain with the design/prior it ran under.
struct FittedRank {
  int r = 0;
  std::unique_ptr<EcmDesign> design;
  std::unique_ptr<PriorSpec> prior;
  ChainTrace trace;
};

/// Fit chains for the listed ranks concurrently (one stream per rank).
std::vector<FittedRank> fit_ranks(const TimeSeriesPanel& panel, int lag,
                                  const std::vector<int>& ranks,
                                  SamplerKind sampler, int iters, int burnin,
                                  const PriorOverrides& prior,
                                  std::uint64_t seed, std::uint64_t stream_salt,
                                  int jobs);

std::vector<RankFit> rank_views(const std::vector<FittedRank>& fits,
                                bool include_rank_zero);

}  // namespace cvar::app
