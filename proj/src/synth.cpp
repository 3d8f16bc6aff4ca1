#include "cvar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cvar {

Eigen::VectorXd companion_moduli(const TrueModel& model) {
  const int n = model.n;
  const int p = model.p;
  const Eigen::MatrixXd pi_lr =
      model.r > 0
          ? Eigen::MatrixXd(model.alpha * model.beta.full().transpose())
          : Eigen::MatrixXd::Zero(n, n);

  // Levels VAR coefficients implied by the ECM:
  //   A_1 = I + Pi + Psi_1, A_i = Psi_i - Psi_{i-1}, A_p = -Psi_{p-1}.
  std::vector<Eigen::MatrixXd> a(static_cast<std::size_t>(p));
  a[0] = Eigen::MatrixXd::Identity(n, n) + pi_lr;
  if (p > 1) a[0] += model.psi[0];
  for (int i = 2; i <= p - 1; ++i)
    a[static_cast<std::size_t>(i - 1)] = model.psi[static_cast<std::size_t>(i - 1)] -
                                         model.psi[static_cast<std::size_t>(i - 2)];
  if (p > 1) a[static_cast<std::size_t>(p - 1)] = -model.psi[static_cast<std::size_t>(p - 2)];

  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n * p, n * p);
  for (int i = 0; i < p; ++i)
    comp.block(0, i * n, n, n) = a[static_cast<std::size_t>(i)];
  if (p > 1)
    comp.block(n, 0, n * (p - 1), n * (p - 1)) =
        Eigen::MatrixXd::Identity(n * (p - 1), n * (p - 1));

  const Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  Eigen::VectorXd moduli = es.eigenvalues().cwiseAbs();
  std::sort(moduli.data(), moduli.data() + moduli.size(),
            std::greater<double>());
  return moduli;
}

bool is_valid_i1(const TrueModel& model) {
  const Eigen::VectorXd moduli = companion_moduli(model);
  const int want_unit = model.n - model.r;
  int unit = 0;
  for (Eigen::Index i = 0; i < moduli.size(); ++i) {
    const double m = moduli(i);
    if (std::abs(m - 1.0) < 1e-6) {
      ++unit;
    } else if (m >= 0.99) {
      return false;  // explosive or too close to the circle
    }
  }
  return unit == want_unit;
}

TrueModel random_true_model(int n, int p, int r, RngStream& rng,
                            int max_attempts) {
  if (r < 0 || r > n) throw ParamError("random_true_model: rank out of range");
  if (p < 1) throw ParamError("random_true_model: lag must be >= 1");

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    TrueModel m;
    m.n = n;
    m.p = p;
    m.r = r;
    m.mu.resize(n);
    for (int i = 0; i < n; ++i) m.mu(i) = rng.uniform(-0.4, 0.4);
    m.alpha.resize(n, r);
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < n; ++i) m.alpha(i, j) = rng.uniform(-0.4, 0.4);
    Eigen::MatrixXd free = Eigen::MatrixXd::Zero(n - r, r);
    if (n - r > 0 && r > 0) free.row(n - r - 1).setConstant(-1.0);
    m.beta = ThinBeta::from_free(n, r, free);
    for (int lag = 0; lag < p - 1; ++lag) {
      Eigen::MatrixXd psi(n, n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) psi(i, j) = rng.uniform(-0.4, 0.4);
      m.psi.push_back(psi);
    }
    m.sigma = SpdMatrix::identity(n);
    if (is_valid_i1(m)) return m;
  }
  throw NumericError(
      "random_true_model: no valid I(1) system in " +
      std::to_string(max_attempts) +
      " attempts; smaller coefficient ranges tend to stabilize the draw");
}

TimeSeriesPanel simulate(const TrueModel& model, int T, RngStream& rng,
                         int warmup) {
  if (T < model.p + 2)
    throw ParamError("simulate: need at least p+2 observations");
  const int n = model.n;
  const Eigen::MatrixXd pi_lr =
      model.r > 0
          ? Eigen::MatrixXd(model.alpha * model.beta.full().transpose())
          : Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd l_sigma = model.sigma.chol();

  std::vector<Eigen::VectorXd> diffs(
      static_cast<std::size_t>(std::max(0, model.p - 1)),
      Eigen::VectorXd::Zero(n));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);

  TimeSeriesPanel panel;
  panel.levels.resize(T, n);
  for (int j = 0; j < n; ++j) panel.labels.push_back("s" + std::to_string(j + 1));

  const int total = warmup + T;
  for (int step = 0; step < total; ++step) {
    Eigen::VectorXd dx = model.mu + pi_lr * x + l_sigma * rng.normal_vector(n);
    for (int i = 0; i < model.p - 1; ++i)
      dx += model.psi[static_cast<std::size_t>(i)] * diffs[static_cast<std::size_t>(i)];
    x += dx;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e9)
      throw NumericError("simulate: series overflow (model not I(1)?)");
    for (int i = model.p - 2; i > 0; --i)
      diffs[static_cast<std::size_t>(i)] = diffs[static_cast<std::size_t>(i - 1)];
    if (model.p > 1) diffs[0] = dx;
    if (step >= warmup) panel.levels.row(step - warmup) = x.transpose();
  }
  return panel;
}

TrueModel preset_model(const std::string& name) {
  if (name == "sugita-n4r2") {
    TrueModel m;
    m.n = 4;
    m.p = 1;
    m.r = 2;
    m.mu = Eigen::VectorXd::Constant(4, 0.1);
    m.alpha = Eigen::MatrixXd::Zero(4, 2);
    m.alpha(0, 0) = -0.2;
    m.alpha(0, 1) = 0.2;
    m.alpha(1, 1) = -0.4;  // second loading keeps the long-run matrix rank 2
    Eigen::MatrixXd free(2, 2);
    free << 0.0, -1.0, 0.0, -1.0;
    m.beta = ThinBeta::from_free(4, 2, free);
    m.sigma = SpdMatrix::identity(4);
    return m;
  }
  if (name == "highdim-n10r5") {
    RngStream rng(0x5eedc0ffee, 17);
    return random_true_model(10, 2, 5, rng);
  }
  throw ParamError("unknown preset '" + name +
                   "'; available: sugita-n4r2, highdim-n10r5");
}

std::vector<std::string> preset_names() {
  return {"sugita-n4r2", "highdim-n10r5"};
}

}  // namespace cvar
