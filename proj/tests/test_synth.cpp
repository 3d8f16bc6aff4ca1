#include <doctest.h>

#include <cmath>

#include "cvar/ml.hpp"
#include "cvar/synth.hpp"

using namespace cvar;

namespace {
double autocorr_at(const Eigen::VectorXd& x, int lag) {
  const double mean = x.mean();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < x.size(); ++i) den += (x(i) - mean) * (x(i) - mean);
  for (int i = 0; i + lag < x.size(); ++i)
    num += (x(i) - mean) * (x(i + lag) - mean);
  return num / den;
}
}  // namespace

TEST_CASE("random models always satisfy the unit-root structure") {
  RngStream rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    const TrueModel m = random_true_model(4, 2, 2, rng);
    CHECK(is_valid_i1(m));
    const Eigen::VectorXd moduli = companion_moduli(m);
    int unit = 0;
    for (int i = 0; i < moduli.size(); ++i)
      if (std::abs(moduli(i) - 1.0) < 1e-6) ++unit;
    CHECK(unit == 2);  // n - r
  }
}

TEST_CASE("high-dimensional preset matches its published shape") {
  const TrueModel m = preset_model("highdim-n10r5");
  CHECK(m.n == 10);
  CHECK(m.p == 2);
  CHECK(m.r == 5);
  CHECK(m.beta.free.rows() == 5);
  CHECK(m.beta.free.cols() == 5);
  CHECK((m.beta.free.topRows(4).array() == 0.0).all());
  CHECK((m.beta.free.bottomRows(1).array() == -1.0).all());
  CHECK((m.sigma.m() - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(is_valid_i1(m));
  CHECK(m.mu.cwiseAbs().maxCoeff() <= 0.4);
}

TEST_CASE("benchmark preset pins the published truth values") {
  const TrueModel m = preset_model("sugita-n4r2");
  CHECK(m.n == 4);
  CHECK(m.r == 2);
  CHECK(m.alpha(0, 0) == -0.2);
  CHECK(m.alpha(0, 1) == 0.2);
  CHECK((m.mu.array() == 0.1).all());
  CHECK(m.sigma.m().trace() == 4.0);
  CHECK(m.beta.free(0, 0) == 0.0);
  CHECK(m.beta.free(0, 1) == -1.0);
  CHECK(m.beta.free(1, 1) == -1.0);
  CHECK(is_valid_i1(m));
}

TEST_CASE("unknown preset raises a usage error") {
  CHECK_THROWS_AS(preset_model("nope"), ParamError);
}

TEST_CASE("rank zero model is a stationary VAR in differences") {
  RngStream rng(102);
  const TrueModel m = random_true_model(3, 2, 0, rng);
  CHECK(m.beta.free_dim() == 0);
  const Eigen::VectorXd moduli = companion_moduli(m);
  int unit = 0;
  for (int i = 0; i < moduli.size(); ++i) {
    if (std::abs(moduli(i) - 1.0) < 1e-6) ++unit;
    else CHECK(moduli(i) < 0.99);
  }
  CHECK(unit == 3);
}

TEST_CASE("deterministic drift limit produces a linear trend") {
  TrueModel m;
  m.n = 2;
  m.p = 1;
  m.r = 0;
  m.mu = Eigen::Vector2d(0.5, -0.25);
  m.alpha = Eigen::MatrixXd(2, 0);
  m.beta = ThinBeta::zero(2, 0);
  m.sigma = SpdMatrix::from(1e-24 * Eigen::MatrixXd::Identity(2, 2));
  RngStream rng(103);
  const TimeSeriesPanel panel = simulate(m, 50, rng, 0);
  for (int i = 0; i < 50; ++i) {
    CHECK(panel.levels(i, 0) ==
          doctest::Approx(0.5 * (i + 1)).epsilon(1e-6));
    CHECK(panel.levels(i, 1) ==
          doctest::Approx(-0.25 * (i + 1)).epsilon(1e-6));
  }
}

TEST_CASE("equilibrium combinations are stationary while levels are not") {
  RngStream model_rng(104, 1);
  const TrueModel m = random_true_model(3, 1, 2, model_rng);
  RngStream sim_rng(104, 2);
  const TimeSeriesPanel panel = simulate(m, 2000, sim_rng);

  const Eigen::MatrixXd combos = panel.levels * m.beta.full();  // T x r
  for (int j = 0; j < 2; ++j)
    CHECK(std::abs(autocorr_at(combos.col(j), 20)) < 0.5);
  // the raw series keep their stochastic trend
  double max_level_ac = 0.0;
  for (int j = 0; j < 3; ++j)
    max_level_ac = std::max(max_level_ac, autocorr_at(panel.levels.col(j), 20));
  CHECK(max_level_ac > 0.8);
}

TEST_CASE("simulation replays bit-identically under a fixed seed") {
  const TrueModel m = preset_model("sugita-n4r2");
  RngStream a(105, 3), b(105, 3);
  const TimeSeriesPanel pa = simulate(m, 80, a);
  const TimeSeriesPanel pb = simulate(m, 80, b);
  CHECK((pa.levels - pb.levels).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("maximum likelihood recovers the free block on long samples") {
  RngStream model_rng(106, 1);
  const TrueModel m = random_true_model(3, 1, 1, model_rng);
  RngStream sim_rng(106, 2);
  const TimeSeriesPanel panel = simulate(m, 2000, sim_rng);
  const EcmDesign d = build_ecm_design(panel, 1, 1);
  const PriorSpec prior = default_prior(d, panel.rows());
  const MlEstimate ml = ml_estimate(d, prior);
  CHECK((ml.beta_ml.free - m.beta.free).cwiseAbs().maxCoeff() < 0.05);
}
