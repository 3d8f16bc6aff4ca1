#include "cvar/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cvar {

Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionError("chol_lower: matrix not square");
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double s = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw SpdError("matrix not positive definite at pivot " + std::to_string(j),
                     static_cast<int>(j));
    }
    l(j, j) = std::sqrt(s);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

Eigen::MatrixXd chol_spd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  try {
    return chol_lower(sym);
  } catch (const SpdError&) {
    const double jitter = 1e-10 * sym.diagonal().mean();
    sym.diagonal().array() += jitter;
    return chol_lower(sym);  // second failure propagates
  }
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& chol_lower_factor,
                           const Eigen::MatrixXd& b) {
  Eigen::MatrixXd y =
      chol_lower_factor.triangularView<Eigen::Lower>().solve(b);
  return chol_lower_factor.transpose().triangularView<Eigen::Upper>().solve(y);
}

SpdMatrix SpdMatrix::from(Eigen::MatrixXd m) {
  if (m.rows() != m.cols()) throw DimensionError("SpdMatrix: matrix not square");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw SpdError("SpdMatrix: asymmetry " + std::to_string(asym) +
                   " exceeds tolerance 1e-10");
  }
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  chol_spd(sym);  // validate
  return SpdMatrix(std::move(sym));
}

SpdMatrix SpdMatrix::identity(int dim) {
  return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

double log_multigamma(int p, double a) {
  if (p < 1) throw ParamError("log_multigamma: p must be positive");
  double s = 0.25 * p * (p - 1) * std::log(3.14159265358979323846);
  for (int j = 1; j <= p; ++j) {
    const double arg = a + 0.5 * (1 - j);
    if (!(arg > 0.0)) {
      throw ParamError("log_multigamma: gamma argument " + std::to_string(arg) +
                       " not positive (degrees of freedom too small)");
    }
    s += std::lgamma(arg);
  }
  return s;
}

double log_multigamma_ratio(int p, double a_num, double a_den) {
  if (p < 1) throw ParamError("log_multigamma_ratio: p must be positive");
  double s = 0.0;
  for (int j = 1; j <= p; ++j) {
    const double num = a_num + 0.5 * (1 - j);
    const double den = a_den + 0.5 * (1 - j);
    if (!(num > 0.0) || !(den > 0.0)) {
      throw ParamError("log_multigamma_ratio: gamma argument not positive");
    }
    s += std::lgamma(num) - std::lgamma(den);
  }
  return s;
}

double log_sum_exp_mean(const std::vector<double>& log_terms) {
  if (log_terms.empty()) throw ParamError("log_sum_exp_mean: empty input");
  const double mx = *std::max_element(log_terms.begin(), log_terms.end());
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double v : log_terms) s += std::exp(v - mx);
  return mx + std::log(s) - std::log(static_cast<double>(log_terms.size()));
}

LogMeanExp log_mean_exp_stats(const std::vector<double>& log_terms, double n_eff) {
  LogMeanExp out;
  out.n = log_terms.size();
  if (log_terms.empty()) throw ParamError("log_mean_exp_stats: empty input");
  const double mx = *std::max_element(log_terms.begin(), log_terms.end());
  out.max_term = mx;
  if (mx == -std::numeric_limits<double>::infinity()) {
    out.value = mx;
    out.mc_se = 0.0;
    return out;
  }
  double s = 0.0, s2 = 0.0;
  for (double v : log_terms) {
    const double w = std::exp(v - mx);
    s += w;
    s2 += w * w;
  }
  const double n = static_cast<double>(log_terms.size());
  const double mean_w = s / n;
  const double var_w = std::max(0.0, s2 / n - mean_w * mean_w);
  out.value = mx + std::log(mean_w);
  if (n_eff < 1.0) n_eff = 1.0;
  out.mc_se = std::sqrt(var_w / n_eff) / mean_w;
  return out;
}

RunningCovariance::RunningCovariance(int dim)
    : mean_(Eigen::VectorXd::Zero(dim)),
      scatter_(Eigen::MatrixXd::Zero(dim, dim)) {
  if (dim < 0) throw ParamError("RunningCovariance: negative dimension");
}

void RunningCovariance::update(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size())
    throw DimensionError("RunningCovariance: dimension mismatch");
  ++count_;
  const Eigen::VectorXd delta_old = x - mean_;
  mean_ += delta_old / static_cast<double>(count_);
  const Eigen::VectorXd delta_new = x - mean_;
  scatter_ += 0.5 * (delta_old * delta_new.transpose() +
                     delta_new * delta_old.transpose());
}

Eigen::MatrixXd RunningCovariance::covariance() const {
  if (count_ < 2)
    throw ParamError("RunningCovariance: need at least 2 updates");
  return scatter_ / static_cast<double>(count_ - 1);
}

double effective_sample_size(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 2) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (var <= 1e-300) return 1.0;

  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i)
      s += (series[i] - mean) * (series[i + lag] - mean);
    return s / static_cast<double>(n);
  };

  // Geyer: sum pairwise autocorrelations while the pair sums stay positive.
  double rho_sum = 0.0;
  for (std::size_t m = 0; 2 * m + 2 < n; ++m) {
    const double pair = (acov(2 * m + 1) + acov(2 * m + 2)) / var;
    if (pair <= 0.0) break;
    rho_sum += pair;
  }
  const double tau = 1.0 + 2.0 * rho_sum;
  return std::max(1.0, static_cast<double>(n) / tau);
}

}  // namespace cvar
