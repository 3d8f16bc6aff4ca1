#include "cvar/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvar/parallel.hpp"

namespace cvar {

namespace {

constexpr double kOverflowGuard = 1e12;

// Type-7 quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

Eigen::MatrixXd forecast_path(const ChainState& draw, int p,
                              const Eigen::MatrixXd& tail, int horizon,
                              const Eigen::MatrixXd& shocks, bool levels) {
  const int n = draw.beta.n;
  const int r = draw.beta.r;
  if (tail.rows() < p || tail.cols() != n)
    throw DimensionError("forecast_path: tail must supply the last p levels");

  const Eigen::VectorXd mu = draw.B.row(0).transpose();
  const Eigen::MatrixXd alpha = alpha_of(draw);
  const Eigen::MatrixXd pi_lr =
      r > 0 ? Eigen::MatrixXd(alpha * draw.beta.full().transpose())
            : Eigen::MatrixXd::Zero(n, n);

  // Gamma rows 1.. hold Psi_i', so each block acts transposed.
  std::vector<Eigen::MatrixXd> psi;
  psi.reserve(static_cast<std::size_t>(p - 1));
  for (int i = 0; i < p - 1; ++i)
    psi.push_back(draw.B.middleRows(1 + i * n, n).transpose());

  // Most recent difference first.
  std::vector<Eigen::VectorXd> diffs(static_cast<std::size_t>(std::max(0, p - 1)));
  for (int i = 0; i < p - 1; ++i) {
    diffs[static_cast<std::size_t>(i)] =
        (tail.row(tail.rows() - 1 - i) - tail.row(tail.rows() - 2 - i))
            .transpose();
  }

  Eigen::VectorXd x = tail.row(tail.rows() - 1).transpose();
  Eigen::MatrixXd out(horizon, n);
  for (int s = 0; s < horizon; ++s) {
    Eigen::VectorXd dx = mu + pi_lr * x;
    for (int i = 0; i < p - 1; ++i) dx += psi[static_cast<std::size_t>(i)] * diffs[static_cast<std::size_t>(i)];
    if (shocks.size() > 0) dx += shocks.row(s).transpose();
    x += dx;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kOverflowGuard)
      throw NumericError("forecast_path: recursion overflow");
    out.row(s) = levels ? x.transpose() : dx.transpose();
    for (int i = p - 2; i > 0; --i) diffs[static_cast<std::size_t>(i)] = diffs[static_cast<std::size_t>(i - 1)];
    if (p > 1) diffs[0] = dx;
  }
  return out;
}

Eigen::MatrixXd mean_path_kernel(const ChainTrace& trace, int p,
                                 const Eigen::MatrixXd& tail, int horizon,
                                 bool levels, std::size_t* dropped, int jobs) {
  const std::size_t count = trace.retained();
  if (count == 0) throw ParamError("mean_path_kernel: no retained draws");
  const int n = trace.retained_state(0).beta.n;
  const Eigen::MatrixXd no_shocks;

  std::vector<Eigen::MatrixXd> paths(count);
  std::vector<char> ok(count, 0);
  parallel_for_index(count, jobs, [&](std::size_t i) {
    try {
      paths[i] = forecast_path(trace.retained_state(i), p, tail, horizon,
                               no_shocks, levels);
      ok[i] = 1;
    } catch (const NumericError&) {
      ok[i] = 0;
    }
  });

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(horizon, n);
  std::size_t used = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!ok[i]) continue;
    mean += paths[i];
    ++used;
  }
  if (dropped) *dropped = count - used;
  if (used == 0) throw NumericError("mean_path_kernel: every draw overflowed");
  return mean / static_cast<double>(used);
}

Eigen::MatrixXd mean_path_kernel_serial(const ChainTrace& trace, int p,
                                        const Eigen::MatrixXd& tail,
                                        int horizon, bool levels,
                                        std::size_t* dropped) {
  return mean_path_kernel(trace, p, tail, horizon, levels, dropped, 1);
}

namespace {

struct SampledPaths {
  // paths[j] is horizon x n; only successful simulations are kept.
  std::vector<Eigen::MatrixXd> paths;
  std::size_t attempted = 0;
};

SampledPaths sample_noise_paths(const ChainTrace& trace, int p,
                                const Eigen::MatrixXd& tail, int horizon,
                                bool levels, std::size_t n_paths,
                                const RngStream& base, std::uint64_t tag_salt,
                                int jobs) {
  const std::size_t count = trace.retained();
  SampledPaths out;
  out.attempted = n_paths;
  if (n_paths == 0 || count == 0) return out;

  std::vector<Eigen::MatrixXd> slots(n_paths);
  std::vector<char> ok(n_paths, 0);
  parallel_for_index(n_paths, jobs, [&](std::size_t j) {
    const ChainState& draw = trace.retained_state(j % count);
    RngStream rng = base.derive(tag_salt ^ (0x517cc1b727220a95ULL + j));
    try {
      const Eigen::MatrixXd l_sigma = draw.Sigma.chol();
      const int n = draw.beta.n;
      Eigen::MatrixXd shocks(horizon, n);
      for (int s = 0; s < horizon; ++s)
        shocks.row(s) = (l_sigma * rng.normal_vector(n)).transpose();
      slots[j] = forecast_path(draw, p, tail, horizon, shocks, levels);
      ok[j] = 1;
    } catch (const NumericError&) {
      ok[j] = 0;
    }
  });
  for (std::size_t j = 0; j < n_paths; ++j) {
    if (ok[j]) out.paths.push_back(std::move(slots[j]));
  }
  return out;
}

void fill_quantiles(ForecastResult& result, const std::vector<Eigen::MatrixXd>& paths,
                    int horizon, int n) {
  if (paths.empty()) return;
  result.q05.resize(horizon, n);
  result.q25.resize(horizon, n);
  result.q50.resize(horizon, n);
  result.q75.resize(horizon, n);
  result.q95.resize(horizon, n);
  std::vector<double> vals(paths.size());
  for (int s = 0; s < horizon; ++s) {
    for (int j = 0; j < n; ++j) {
      for (std::size_t m = 0; m < paths.size(); ++m) vals[m] = paths[m](s, j);
      std::sort(vals.begin(), vals.end());
      result.q05(s, j) = quantile_sorted(vals, 0.05);
      result.q25(s, j) = quantile_sorted(vals, 0.25);
      result.q50(s, j) = quantile_sorted(vals, 0.50);
      result.q75(s, j) = quantile_sorted(vals, 0.75);
      result.q95(s, j) = quantile_sorted(vals, 0.95);
    }
  }
}

}  // namespace

namespace {
// Shared noise-stream salt so the fixed-rank and mixture predictors draw
// common random numbers for the same (rank, path) pair: a point-mass rank
// posterior then reproduces the fixed-rank paths exactly.
std::uint64_t rank_path_salt(int r) {
  return 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(r) + 1);
}
}  // namespace

ForecastResult predict_fixed_rank(const ChainTrace& trace, int p,
                                  const Eigen::MatrixXd& tail,
                                  const ForecastRequest& req, RngStream& rng,
                                  int jobs) {
  if (req.horizon < 1) throw ParamError("predict_fixed_rank: horizon must be >= 1");
  ForecastResult result;
  std::size_t dropped = 0;
  result.mean_path =
      mean_path_kernel(trace, p, tail, req.horizon, req.levels, &dropped, jobs);
  result.paths_dropped = dropped;

  if (req.n_noise_paths > 0) {
    const int rank = trace.retained_state(0).beta.r;
    const SampledPaths sp = sample_noise_paths(
        trace, p, tail, req.horizon, req.levels,
        static_cast<std::size_t>(req.n_noise_paths), rng, rank_path_salt(rank),
        jobs);
    result.paths_used = sp.paths.size();
    result.paths_dropped += sp.attempted - sp.paths.size();
    fill_quantiles(result, sp.paths, req.horizon,
                   static_cast<int>(result.mean_path.cols()));
  }
  const std::size_t total = trace.retained() + static_cast<std::size_t>(req.n_noise_paths);
  result.overflow_flag = result.paths_dropped * 100 > total;
  return result;
}

ForecastResult predict_bma(const std::vector<RankFit>& fits,
                           const RankPosterior& rp, int p,
                           const Eigen::MatrixXd& tail,
                           const ForecastRequest& req, RngStream& rng,
                           int jobs) {
  if (fits.empty()) throw ParamError("predict_bma: no fitted ranks");
  ForecastResult result;
  const Eigen::VectorXd w = bma_weights(rp);

  // Exact mixture mean: sum of weighted per-rank mean paths.
  std::size_t dropped = 0;
  bool first = true;
  for (const RankFit& fit : fits) {
    const double wr = w(fit.r);
    std::size_t d = 0;
    const Eigen::MatrixXd mp = mean_path_kernel(*fit.trace, p, tail,
                                                req.horizon, req.levels, &d, jobs);
    dropped += d;
    if (first) {
      result.mean_path = wr * mp;
      first = false;
    } else {
      result.mean_path += wr * mp;
    }
    result.per_rank_mean.emplace_back(fit.r, mp);
  }
  result.paths_dropped = dropped;

  if (req.n_noise_paths > 0) {
    // Largest-remainder apportionment of the path budget to the weights.
    const std::size_t total = static_cast<std::size_t>(req.n_noise_paths);
    std::vector<std::size_t> counts(fits.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      const double exact = w(fits[i].r) * static_cast<double>(total);
      counts[i] = static_cast<std::size_t>(exact);
      assigned += counts[i];
      remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t m = 0; assigned < total && m < remainders.size(); ++m) {
      ++counts[remainders[m].second];
      ++assigned;
    }

    std::vector<Eigen::MatrixXd> pooled;
    std::size_t attempted = 0;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      if (counts[i] == 0) continue;
      const SampledPaths sp = sample_noise_paths(
          *fits[i].trace, p, tail, req.horizon, req.levels, counts[i], rng,
          rank_path_salt(fits[i].r), jobs);
      attempted += sp.attempted;
      for (const auto& path : sp.paths) pooled.push_back(path);
    }
    result.paths_used = pooled.size();
    result.paths_dropped += attempted - pooled.size();
    fill_quantiles(result, pooled, req.horizon,
                   static_cast<int>(result.mean_path.cols()));
  }
  std::size_t total_attempted = static_cast<std::size_t>(req.n_noise_paths);
  for (const RankFit& fit : fits) total_attempted += fit.trace->retained();
  result.overflow_flag = result.paths_dropped * 100 > total_attempted;
  return result;
}

}  // namespace cvar
