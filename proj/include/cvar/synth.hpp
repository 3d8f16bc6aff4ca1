#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvar/ecm.hpp"
#include "cvar/rng.hpp"

namespace cvar {

/// Ground-truth data-generating process in error-correction form.
struct TrueModel {
  int n = 0;
  int p = 1;
  int r = 0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd alpha;  // n x r
  ThinBeta beta;
  std::vector<Eigen::MatrixXd> psi;  // p-1 matrices, n x n
  SpdMatrix sigma;
};

/// Moduli of the companion-form eigenvalues of the implied levels VAR,
/// sorted descending. A valid cointegrated I(1) system of rank r has exactly
/// n-r of them at one and the rest strictly inside the unit circle.
Eigen::VectorXd companion_moduli(const TrueModel& model);

/// Exactly n-r moduli within 1e-6 of one, all others below 0.99.
bool is_valid_i1(const TrueModel& model);

/// Random model with mu, alpha, Psi entries i.i.d. U(-0.4, 0.4), Sigma = I,
/// and the free beta block all zeros except a last row of -1. Rejection
/// sampled until is_valid_i1 holds; throws after max_attempts.
TrueModel random_true_model(int n, int p, int r, RngStream& rng,
                            int max_attempts = 1000);

/// Forward-simulate T observations after discarding `warmup` steps from zero
/// initial conditions; shocks are N(0, Sigma).
TimeSeriesPanel simulate(const TrueModel& model, int T, RngStream& rng,
                         int warmup = 200);

/// Named ground-truth presets:
///  - "sugita-n4r2":   n=4, p=1, r=2 benchmark with mu = 0.1, Sigma = I,
///                     alpha(1,:) = (-0.2, 0.2), free beta columns (0, -1).
///  - "highdim-n10r5": n=10, p=2, r=5 uniform-coefficient model with the
///                     free beta block zero except a last row of -1.
TrueModel preset_model(const std::string& name);

std::vector<std::string> preset_names();

}  // namespace cvar
