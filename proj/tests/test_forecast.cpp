#include <doctest.h>

#include <cmath>

#include "cvar/forecast.hpp"
#include "oracle_helpers.hpp"

using namespace cvar;

namespace {

SamplerConfig alg2_config(const EcmDesign& d) {
  SamplerConfig cfg;
  cfg.kind = SamplerKind::alg2;
  cfg.alg2 = Alg2Config::make(d.n, d.r);
  return cfg;
}

ChainTrace trace_of_states(std::vector<ChainState> states) {
  ChainTrace t;
  t.states = std::move(states);
  t.reports.resize(t.states.size());
  t.burnin_stored = 0;
  t.thin = 1;
  return t;
}

}  // namespace

TEST_CASE("one-step forecast matches the hand recursion") {
  RngStream rng(171);
  const int n = 3, r = 1, p = 2;
  ChainState draw;
  draw.beta = ThinBeta::from_free(n, r, rng.normal_matrix(n - r, r));
  draw.B = rng.normal_matrix(1 + n * (p - 1) + r, n);
  draw.Sigma = SpdMatrix::identity(n);
  const Eigen::MatrixXd tail = rng.normal_matrix(p, n);

  const Eigen::MatrixXd path =
      forecast_path(draw, p, tail, 1, Eigen::MatrixXd(), true);

  const Eigen::VectorXd x_t = tail.row(1).transpose();
  const Eigen::VectorXd dx_t = (tail.row(1) - tail.row(0)).transpose();
  const Eigen::VectorXd mu = draw.B.row(0).transpose();
  const Eigen::MatrixXd psi1 = draw.B.middleRows(1, n).transpose();
  const Eigen::MatrixXd alpha = draw.B.bottomRows(r).transpose();
  const Eigen::VectorXd expected =
      x_t + mu + alpha * draw.beta.full().transpose() * x_t + psi1 * dx_t;
  CHECK((path.row(0).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero dynamics freeze the forecast at the last level") {
  const int n = 2, p = 1;
  ChainState draw;
  draw.beta = ThinBeta::zero(n, 0);
  draw.B = Eigen::MatrixXd::Zero(1, n);  // mu = 0, no alpha rows
  draw.Sigma = SpdMatrix::identity(n);
  Eigen::MatrixXd tail(1, n);
  tail << 4.2, -1.7;
  const Eigen::MatrixXd path =
      forecast_path(draw, p, tail, 6, Eigen::MatrixXd(), true);
  for (int s = 0; s < 6; ++s)
    CHECK((path.row(s) - tail.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise-path average converges to the shock-free path") {
  const oracle::ToyFit toy = oracle::make_toy_fit(2, 1, 80, 172);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  ChainTrace trace = run_chain(ctx, alg2_config(toy.design), 300, 200,
                               ChainInit::ml(), RngStream(172, 3));
  // freeze a single draw so the only variability is the shocks
  for (auto& s : trace.states) s = trace.states.back();

  const Eigen::MatrixXd tail = toy.panel.levels.bottomRows(toy.design.p);
  ForecastRequest req;
  req.horizon = 4;
  req.n_noise_paths = 10000;
  RngStream rng(172, 9);
  const ForecastResult res =
      predict_fixed_rank(trace, toy.design.p, tail, req, rng, 2);

  // The recursion is affine in the shocks, so the sampled median/mean band
  // centers on the deterministic path; compare the sampled mean per entry.
  const ChainState& draw = trace.states.back();
  const Eigen::MatrixXd exact =
      forecast_path(draw, toy.design.p, tail, 4, Eigen::MatrixXd(), true);
  CHECK((res.mean_path - exact).cwiseAbs().maxCoeff() < 1e-10);
  // q50 is a noisy estimate of the mean path; allow a few standard errors of
  // the terminal-step spread.
  const double spread = (res.q75(3, 0) - res.q25(3, 0)) / 1.349;
  CHECK(std::abs(res.q50(3, 0) - exact(3, 0)) <
        4.0 * spread / std::sqrt(10000.0 / 4.0));
}

TEST_CASE("levels and differences are consistent") {
  RngStream rng(173);
  const int n = 2, r = 1, p = 2;
  ChainState draw;
  draw.beta = ThinBeta::from_free(n, r, 0.1 * rng.normal_matrix(n - r, r));
  draw.B = 0.1 * rng.normal_matrix(1 + n * (p - 1) + r, n);
  draw.Sigma = SpdMatrix::identity(n);
  const Eigen::MatrixXd tail = rng.normal_matrix(p, n);

  const Eigen::MatrixXd levels =
      forecast_path(draw, p, tail, 8, Eigen::MatrixXd(), true);
  const Eigen::MatrixXd diffs =
      forecast_path(draw, p, tail, 8, Eigen::MatrixXd(), false);
  Eigen::RowVectorXd acc = tail.row(p - 1);
  for (int s = 0; s < 8; ++s) {
    acc += diffs.row(s);
    CHECK((levels.row(s) - acc).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("explosive draws are dropped and counted") {
  const int n = 2, p = 1;
  ChainState good;
  good.beta = ThinBeta::zero(n, 0);
  good.B = Eigen::MatrixXd::Zero(1, n);
  good.Sigma = SpdMatrix::identity(n);
  ChainState bad = good;
  bad.B = Eigen::MatrixXd::Constant(1, n, 1e13);  // overflows on the first step

  ChainTrace trace = trace_of_states({good, bad, good});
  std::size_t dropped = 0;
  Eigen::MatrixXd tail = Eigen::MatrixXd::Zero(1, n);
  const Eigen::MatrixXd mean =
      mean_path_kernel_serial(trace, p, tail, 5, true, &dropped);
  CHECK(dropped == 1);
  CHECK(mean.cwiseAbs().maxCoeff() == 0.0);  // the two good paths stay at zero
}

TEST_CASE("serial and parallel mean-path kernels agree bitwise") {
  const oracle::ToyFit toy = oracle::make_toy_fit(3, 1, 80, 174);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const ChainTrace trace = run_chain(ctx, alg2_config(toy.design), 2000, 500,
                                     ChainInit::ml(), RngStream(174, 3));
  const Eigen::MatrixXd tail = toy.panel.levels.bottomRows(toy.design.p);
  std::size_t d1 = 0, d2 = 0;
  const Eigen::MatrixXd serial =
      mean_path_kernel_serial(trace, toy.design.p, tail, 10, true, &d1);
  const Eigen::MatrixXd parallel =
      mean_path_kernel(trace, toy.design.p, tail, 10, true, &d2, 2);
  CHECK(d1 == d2);
  CHECK((serial - parallel).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("point-mass rank posterior reduces the mixture to a fixed rank") {
  const oracle::ToyFit toy = oracle::make_toy_fit(2, 1, 80, 175);
  std::vector<EcmDesign> designs;
  std::vector<PriorSpec> priors;
  std::vector<ChainTrace> traces;
  for (int r : {0, 1, 2}) {
    designs.push_back(build_ecm_design(toy.panel, 1, r));
    priors.push_back(default_prior(designs.back(), toy.panel.rows()));
    const FitContext ctx = FitContext::make(designs.back(), priors.back());
    traces.push_back(run_chain(ctx, alg2_config(designs.back()), 800, 400,
                               ChainInit::ml(), RngStream(175, 20 + r)));
  }
  std::vector<RankFit> views;
  for (int r : {0, 1, 2})
    views.push_back(RankFit{r, &designs[r], &priors[r], &traces[r]});

  RankPosterior rp;
  rp.log_bf = Eigen::VectorXd::Zero(3);
  rp.probs = Eigen::Vector3d(0.0, 1.0, 0.0);  // all mass on rank 1
  rp.diag.resize(3);

  const Eigen::MatrixXd tail = toy.panel.levels.bottomRows(1);
  ForecastRequest req;
  req.horizon = 5;
  req.n_noise_paths = 0;
  RngStream rng(175, 9);
  const ForecastResult mix = predict_bma(views, rp, 1, tail, req, rng, 1);
  RngStream rng2(175, 10);
  const ForecastResult fixed =
      predict_fixed_rank(traces[1], 1, tail, req, rng2, 1);
  CHECK((mix.mean_path - fixed.mean_path).cwiseAbs().maxCoeff() < 1e-12);

  // Mixture mean identity with general weights.
  rp.probs = Eigen::Vector3d(0.2, 0.5, 0.3);
  const ForecastResult blended = predict_bma(views, rp, 1, tail, req, rng, 1);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(5, 2);
  for (const auto& [r, mean] : blended.per_rank_mean)
    expected += rp.probs(r) * mean;
  CHECK((blended.mean_path - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predictive spread grows with the horizon") {
  const oracle::ToyFit toy = oracle::make_toy_fit(2, 1, 80, 176);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const ChainTrace trace = run_chain(ctx, alg2_config(toy.design), 3000, 1000,
                                     ChainInit::ml(), RngStream(176, 3));
  const Eigen::MatrixXd tail = toy.panel.levels.bottomRows(toy.design.p);
  ForecastRequest req;
  req.horizon = 8;
  req.n_noise_paths = 6000;
  RngStream rng(176, 9);
  const ForecastResult res =
      predict_fixed_rank(trace, toy.design.p, tail, req, rng, 2);
  for (int j = 0; j < 2; ++j) {
    double prev = 0.0;
    for (int s = 0; s < 8; ++s) {
      const double iqr = res.q75(s, j) - res.q25(s, j);
      // allow Monte Carlo wiggle: 3 relative standard errors of an IQR
      CHECK(iqr > prev * (1.0 - 3.0 * 0.025));
      prev = std::max(prev, iqr);
    }
  }
}
