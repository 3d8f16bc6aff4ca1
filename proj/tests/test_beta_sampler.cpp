#include <doctest.h>

#include <cmath>

#include "cvar/beta_sampler.hpp"
#include "cvar/matrix_rand.hpp"
#include "oracle_helpers.hpp"

using namespace cvar;

namespace {

MlEstimate fake_ml(const ThinBeta& center, const Eigen::MatrixXd& cov) {
  MlEstimate ml;
  ml.beta_ml = center;
  ml.fisher_cov = cov;
  ml.fisher_chol = chol_spd(cov);
  return ml;
}

// Independent reassembly of the acceptance ratio from the step report.
double recompute_log_accept(const ThinBeta& before, const BetaStepReport& rep,
                            const BetaLogTarget& target, const MlEstimate* ml) {
  const ThinBeta prop = ThinBeta::from_free(before.n, before.r, rep.proposal_free);
  double log_a = target(prop) - target(before);
  if (rep.move_kind == MoveKind::global) {
    log_a += log_mvn(before.vec(), ml->beta_ml.vec(), ml->fisher_chol) -
             log_mvn(prop.vec(), ml->beta_ml.vec(), ml->fisher_chol);
  }
  return std::min(0.0, log_a);
}

}  // namespace

TEST_CASE("vanishing local scale gives a null move accepted with certainty") {
  const oracle::ToyFit toy = oracle::make_toy_fit(2, 1, 30, 121);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const BetaLogTarget target = [&](const ThinBeta& b) { return ctx.log_target(b); };

  Alg1Config cfg;
  cfg.w1 = 1e-30;  // force local moves
  cfg.local_sd = Eigen::MatrixXd::Constant(1, 1, 1e-12);
  const MlEstimate ml = fake_ml(ThinBeta::zero(2, 1),
                                Eigen::MatrixXd::Identity(1, 1));
  RngStream rng(121, 9);
  ThinBeta state = ThinBeta::from_free(2, 1, Eigen::MatrixXd::Constant(1, 1, -0.8));
  for (int i = 0; i < 50; ++i) {
    auto [next, rep] = alg1_step(state, target, cfg, ml, rng);
    CHECK(rep.accepted);
    CHECK(std::abs(rep.log_accept_prob) < 1e-8);
    CHECK((next.free - state.free).cwiseAbs().maxCoeff() < 1e-10);
    state = next;
  }
}

TEST_CASE("global moves accept with probability one when target equals proposal") {
  const int n = 4, r = 1;
  RngStream setup(122, 1);
  const Eigen::MatrixXd a = setup.normal_matrix(3, 3);
  const MlEstimate ml = fake_ml(
      ThinBeta::from_free(n, r, setup.normal_matrix(3, 1)),
      Eigen::MatrixXd(a * a.transpose() + Eigen::MatrixXd::Identity(3, 3)));
  const BetaLogTarget rigged = [&](const ThinBeta& b) {
    return log_mvn(b.vec(), ml.beta_ml.vec(), ml.fisher_chol);
  };

  Alg1Config cfg;
  cfg.w1 = 1.0 - 1e-12;  // force global moves
  cfg.local_sd = Eigen::MatrixXd::Constant(3, 1, 0.1);
  RngStream rng(122, 2);
  ThinBeta state = ThinBeta::zero(n, r);
  int accepted = 0;
  const int steps = 2000;
  for (int i = 0; i < steps; ++i) {
    auto [next, rep] = alg1_step(state, rigged, cfg, ml, rng);
    CHECK(rep.move_kind == MoveKind::global);
    if (rep.accepted) ++accepted;
    state = next;
  }
  CHECK(accepted == steps);
}

TEST_CASE("identity block is preserved through every step") {
  const oracle::ToyFit toy = oracle::make_toy_fit(3, 2, 40, 123);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const BetaLogTarget target = [&](const ThinBeta& b) { return ctx.log_target(b); };
  const MlEstimate ml = ml_estimate(ctx);

  Alg1Config cfg;
  cfg.local_sd = Eigen::MatrixXd::Constant(1, 2, 0.1);
  RngStream rng(123, 5);
  ThinBeta state = ml.beta_ml;
  for (int i = 0; i < 200; ++i) {
    auto [next, rep] = alg1_step(state, target, cfg, ml, rng);
    const Eigen::MatrixXd full = next.full();
    CHECK((full.topRows(2) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
          0.0);
    state = next;
  }
}

TEST_CASE("reported acceptance probability matches an independent reassembly") {
  const oracle::ToyFit toy = oracle::make_toy_fit(3, 1, 40, 124);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const BetaLogTarget target = [&](const ThinBeta& b) { return ctx.log_target(b); };
  const MlEstimate ml = ml_estimate(ctx);

  SUBCASE("pretuned mixture sampler") {
    Alg1Config cfg;
    cfg.w1 = 0.3;
    cfg.local_sd = Eigen::MatrixXd::Constant(2, 1, 0.05);
    RngStream rng(124, 5);
    ThinBeta state = ml.beta_ml;
    for (int i = 0; i < 300; ++i) {
      auto [next, rep] = alg1_step(state, target, cfg, ml, rng);
      const double expected = recompute_log_accept(state, rep, target, &ml);
      CHECK(rep.log_accept_prob == doctest::Approx(expected).epsilon(1e-10));
      CHECK(rep.log_accept_prob <= 0.0);
      state = next;
    }
  }
  SUBCASE("adaptive sampler") {
    const Alg2Config cfg = Alg2Config::make(3, 1);
    RunningCovariance adapt(2);
    RngStream rng(124, 6);
    ThinBeta state = ml.beta_ml;
    for (int i = 0; i < 500; ++i) {
      auto [next, rep] = alg2_step(state, target, cfg, adapt, rng);
      const double expected = recompute_log_accept(state, rep, target, nullptr);
      CHECK(rep.log_accept_prob == doctest::Approx(expected).epsilon(1e-10));
      state = next;
      adapt.update(state.vec());
    }
  }
}

TEST_CASE("adaptive sampler stays on the fixed kernel through warmup") {
  const oracle::ToyFit toy = oracle::make_toy_fit(2, 1, 30, 125);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const BetaLogTarget target = [&](const ThinBeta& b) { return ctx.log_target(b); };
  const Alg2Config cfg = Alg2Config::make(2, 1);
  RunningCovariance adapt(1);
  RngStream rng(125, 5);
  ThinBeta state = ThinBeta::zero(2, 1);
  for (int i = 0; i < cfg.warmup_min; ++i) {
    auto [next, rep] = alg2_step(state, target, cfg, adapt, rng);
    CHECK(rep.move_kind == MoveKind::fixed_rw);
    state = next;
    adapt.update(state.vec());
  }
  // After warmup, adaptive moves appear with roughly probability w1.
  int adaptive = 0;
  const int steps = 3000;
  for (int i = 0; i < steps; ++i) {
    auto [next, rep] = alg2_step(state, target, cfg, adapt, rng);
    if (rep.move_kind == MoveKind::adaptive) ++adaptive;
    state = next;
    adapt.update(state.vec());
  }
  const double frac = static_cast<double>(adaptive) / steps;
  const double se = std::sqrt(cfg.w1 * (1.0 - cfg.w1) / steps);
  CHECK(std::abs(frac - cfg.w1) < 4.0 * se);
}

TEST_CASE("both samplers reproduce the 1-D grid law (KS < 0.02)") {
  const oracle::ToyFit toy = oracle::make_strong_toy(2, 1, 30, 126);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const BetaLogTarget target = [&](const ThinBeta& b) { return ctx.log_target(b); };
  const MlEstimate ml = ml_estimate(ctx);

  // A short pilot chain locates the posterior mass for the grid window.
  double center = 0.0, spread = 0.0;
  {
    const Alg2Config cfg = Alg2Config::make(2, 1);
    RunningCovariance adapt(1);
    RngStream rng(126, 99);
    ThinBeta state = ml.beta_ml;
    adapt.update(state.vec());
    double s = 0.0, s2 = 0.0;
    const int pilot = 4000;
    for (int i = 0; i < pilot; ++i) {
      state = alg2_step(state, target, cfg, adapt, rng).first;
      adapt.update(state.vec());
      s += state.free(0, 0);
      s2 += state.free(0, 0) * state.free(0, 0);
    }
    center = s / pilot;
    spread = 10.0 * std::sqrt(std::max(1e-12, s2 / pilot - center * center));
  }
  const oracle::Grid1D grid(
      [&](double x) {
        return ctx.log_target(
            ThinBeta::from_free(2, 1, Eigen::MatrixXd::Constant(1, 1, x)));
      },
      center - spread, center + spread, 10000);

  const int steps = 100000;
  const int burn = 2000;

  SUBCASE("pretuned mixture") {
    RngStream tune_rng(126, 3);
    Alg1Config cfg = pretune_local_sd(target, 2, 1, ml.beta_ml, tune_rng);
    cfg.w1 = 0.1;
    RngStream rng(126, 4);
    ThinBeta state = ml.beta_ml;
    std::vector<double> samples;
    samples.reserve(steps);
    for (int i = 0; i < steps + burn; ++i) {
      auto [next, rep] = alg1_step(state, target, cfg, ml, rng);
      state = next;
      if (i >= burn) samples.push_back(state.free(0, 0));
    }
    CHECK(grid.ks_statistic(samples) < 0.02);
  }
  SUBCASE("adaptive random walk") {
    const Alg2Config cfg = Alg2Config::make(2, 1);
    RunningCovariance adapt(1);
    RngStream rng(126, 5);
    ThinBeta state = ml.beta_ml;
    adapt.update(state.vec());
    std::vector<double> samples;
    samples.reserve(steps);
    for (int i = 0; i < steps + burn; ++i) {
      auto [next, rep] = alg2_step(state, target, cfg, adapt, rng);
      state = next;
      adapt.update(state.vec());
      if (i >= burn) samples.push_back(state.free(0, 0));
    }
    CHECK(grid.ks_statistic(samples) < 0.02);
  }
}

TEST_CASE("adaptation diminishes at rate 1/j and the fixed kernel never vanishes") {
  const Alg2Config cfg = Alg2Config::make(5, 1);  // d = 4
  RunningCovariance adapt(4);
  RngStream rng(127, 1);
  adapt.update(rng.normal_vector(4));
  adapt.update(rng.normal_vector(4));
  Eigen::MatrixXd prev = adapt.covariance();
  for (int j = 3; j <= 3000; ++j) {
    adapt.update(rng.normal_vector(4));
    const Eigen::MatrixXd cur = adapt.covariance();
    if (j > 100) {
      const double change = (cur - prev).cwiseAbs().maxCoeff();
      CHECK(change * j < 60.0);  // O(1/j) with a generous constant
    }
    prev = cur;
  }

  // Fixed-kernel share of moves stays >= 1 - w1.
  const oracle::ToyFit toy = oracle::make_toy_fit(2, 1, 30, 127);
  const FitContext ctx = FitContext::make(toy.design, toy.prior);
  const BetaLogTarget target = [&](const ThinBeta& b) { return ctx.log_target(b); };
  RunningCovariance adapt1(1);
  RngStream rng2(127, 2);
  ThinBeta state = ThinBeta::zero(2, 1);
  adapt1.update(state.vec());
  int fixed = 0;
  const int steps = 4000;
  for (int i = 0; i < steps; ++i) {
    auto [next, rep] = alg2_step(state, target, Alg2Config::make(2, 1), adapt1, rng2);
    if (rep.move_kind == MoveKind::fixed_rw) ++fixed;
    state = next;
    adapt1.update(state.vec());
  }
  const double w1 = Alg2Config::make(2, 1).w1;
  const double se = std::sqrt(w1 * (1.0 - w1) / steps);
  CHECK(static_cast<double>(fixed) / steps > (1.0 - w1) - 4.0 * se);
}

TEST_CASE("pretuning lands in the acceptance band on a Gaussian target") {
  const double sigma_target = 0.35;
  const BetaLogTarget target = [&](const ThinBeta& b) {
    const double x = b.free(0, 0);
    return -0.5 * x * x / (sigma_target * sigma_target);
  };
  RngStream rng(128, 1);
  const Alg1Config cfg =
      pretune_local_sd(target, 2, 1, ThinBeta::zero(2, 1), rng);
  CHECK(cfg.tuned_in_band);
  const double rate = cfg.achieved_rates(0, 0);
  CHECK(rate >= 0.3);
  CHECK(rate <= 0.5);
  const double ratio = cfg.local_sd(0, 0) / sigma_target;
  CHECK(ratio >= 1.0);
  CHECK(ratio <= 4.0);
}

TEST_CASE("acceptance rate never rises when the proposal scale doubles") {
  const double sigma_target = 0.5;
  const BetaLogTarget target = [&](const ThinBeta& b) {
    const double x = b.free(0, 0);
    return -0.5 * x * x / (sigma_target * sigma_target);
  };
  RngStream rng(129, 1);
  auto measure = [&](double sd, int steps) {
    ThinBeta state = ThinBeta::zero(2, 1);
    int acc = 0;
    for (int i = 0; i < steps; ++i) {
      ThinBeta prop = state;
      prop.free(0, 0) += sd * rng.normal();
      const double log_a = target(prop) - target(state);
      if (std::log(1.0 - rng.uniform()) < log_a) {
        state = prop;
        ++acc;
      }
    }
    return static_cast<double>(acc) / steps;
  };
  const int steps = 8000;
  const double se3 = 3.0 * std::sqrt(0.25 / steps);
  double prev = measure(0.2, steps);
  for (double sd : {0.4, 0.8, 1.6, 3.2}) {
    const double rate = measure(sd, steps);
    CHECK(rate <= prev + se3);
    prev = rate;
  }
}

TEST_CASE("no free entries means a no-op sampler and empty tuning") {
  const BetaLogTarget target = [](const ThinBeta&) { return 0.0; };
  RngStream rng(130, 1);
  const Alg1Config cfg = pretune_local_sd(target, 3, 3, ThinBeta::zero(3, 3), rng);
  CHECK(cfg.tuned_in_band);
  CHECK(cfg.local_sd.size() == 0);

  const MlEstimate ml = fake_ml(ThinBeta::zero(3, 3), Eigen::MatrixXd(0, 0));
  auto [next, rep] = alg1_step(ThinBeta::zero(3, 3), target, cfg, ml, rng);
  CHECK(rep.move_kind == MoveKind::none);
  CHECK(rep.accepted);

  RunningCovariance adapt(0);
  auto [next2, rep2] = alg2_step(ThinBeta::zero(3, 3), target,
                                 Alg2Config::make(3, 3), adapt, rng);
  CHECK(rep2.move_kind == MoveKind::none);
}
