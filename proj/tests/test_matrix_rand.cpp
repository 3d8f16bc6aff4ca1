#include <doctest.h>

#include <cmath>

#include "cvar/matrix_rand.hpp"

using namespace cvar;

TEST_CASE("inverse Wishart scalar case matches s / chi2") {
  // dim 1, scale s, dof h: the draw is s / chi2_h with mean s/(h-2).
  RngStream rng(61);
  const double s = 2.5, h = 8.0;
  const SpdMatrix scale = SpdMatrix::from(Eigen::MatrixXd::Constant(1, 1, s));
  const int n = 100000;
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_inverse_wishart(scale, h, rng).m()(0, 0);
    mean += x;
    m2 += x * x;
  }
  mean /= n;
  m2 /= n;
  const double expected = s / (h - 2.0);
  const double se = std::sqrt((m2 - mean * mean) / n);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("inverse Wishart dim-3 empirical mean matches scale/(dof-dim-1)") {
  RngStream rng(62);
  Eigen::MatrixXd s(3, 3);
  s << 4.0, 1.0, 0.5,
       1.0, 3.0, -0.2,
       0.5, -0.2, 2.0;
  const SpdMatrix scale = SpdMatrix::from(s);
  const double dof = 10.0;
  const int n = 100000;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd m2 = mean;
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd draw = sample_inverse_wishart(scale, dof, rng).m();
    mean += draw;
    m2 += draw.cwiseProduct(draw);
  }
  mean /= n;
  m2 /= n;
  const Eigen::MatrixXd expected = s / (dof - 3.0 - 1.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((m2(i, j) - mean(i, j) * mean(i, j)) / n);
      CHECK(std::abs(mean(i, j) - expected(i, j)) < 3.0 * se);
    }
  }
}

TEST_CASE("inverse Wishart draws are reproducible and valid SPD") {
  const SpdMatrix scale = SpdMatrix::identity(4);
  RngStream a(63, 2), b(63, 2);
  for (int i = 0; i < 20; ++i) {
    const SpdMatrix da = sample_inverse_wishart(scale, 7.5, a);
    const SpdMatrix db = sample_inverse_wishart(scale, 7.5, b);
    CHECK((da.m() - db.m()).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
    CHECK_NOTHROW(da.chol());
  }
}

TEST_CASE("inverse Wishart rejects dof <= dim-1") {
  RngStream rng(64);
  CHECK_THROWS_AS(sample_inverse_wishart(SpdMatrix::identity(3), 1.5, rng),
                  ParamError);
}

TEST_CASE("matrix normal identity case gives i.i.d. standard normals") {
  RngStream rng(65);
  const Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(5, 4);
  const int reps = 5000;  // 100k scalar draws
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < reps; ++i) {
    const Eigen::MatrixXd x = sample_matrix_normal(
        mean, SpdMatrix::identity(5), SpdMatrix::identity(4), rng);
    s += x.sum();
    s2 += x.squaredNorm();
  }
  const double n = reps * 20.0;
  const double m = s / n, var = s2 / n - m * m;
  CHECK(std::abs(m) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("matrix normal vec covariance matches the Kronecker product") {
  RngStream rng(66);
  Eigen::MatrixXd row_prec(2, 2), col_cov(2, 2);
  row_prec << 2.0, 0.6, 0.6, 1.5;   // row covariance is its inverse
  col_cov << 1.0, -0.4, -0.4, 2.0;
  const SpdMatrix rp = SpdMatrix::from(row_prec);
  const SpdMatrix cc = SpdMatrix::from(col_cov);
  const Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);

  const int n = 100000;
  Eigen::Vector4d s = Eigen::Vector4d::Zero();
  Eigen::Matrix4d s2 = Eigen::Matrix4d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd x = sample_matrix_normal(mean, rp, cc, rng);
    const Eigen::Vector4d v = Eigen::Map<const Eigen::Vector4d>(x.data());
    s += v;
    s2 += v * v.transpose();
  }
  s /= n;
  const Eigen::Matrix4d cov = s2 / n - s * s.transpose();

  const Eigen::MatrixXd row_cov = row_prec.inverse();
  Eigen::Matrix4d expected;  // col_cov (x) row_cov, column-major vec
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      expected.block<2, 2>(2 * a, 2 * b) = col_cov(a, b) * row_cov;

  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      // var of a sample covariance entry ~ (c_ii c_jj + c_ij^2)/n
      const double se = std::sqrt(
          (expected(i, i) * expected(j, j) + expected(i, j) * expected(i, j)) /
          n);
      CHECK(std::abs(cov(i, j) - expected(i, j)) < 3.0 * se);
    }
  }
}

TEST_CASE("matrix normal empirical mean honors the supplied mean") {
  RngStream rng(67);
  Eigen::MatrixXd mean(3, 2);
  mean << 1.0, -2.0, 0.5, 4.0, -1.5, 0.0;
  Eigen::MatrixXd row_prec(3, 3);
  row_prec << 3.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 1.0;
  Eigen::MatrixXd col_cov(2, 2);
  col_cov << 0.8, 0.2, 0.2, 1.2;
  const int n = 100000;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 2), s2 = s;
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd x = sample_matrix_normal(
        mean, SpdMatrix::from(row_prec), SpdMatrix::from(col_cov), rng);
    s += x;
    s2 += x.cwiseProduct(x);
  }
  s /= n;
  s2 /= n;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((s2(i, j) - s(i, j) * s(i, j)) / n);
      CHECK(std::abs(s(i, j) - mean(i, j)) < 4.0 * se);
    }
  }
}

TEST_CASE("matrix normal degenerate column covariance collapses to the mean") {
  RngStream rng(68);
  Eigen::MatrixXd mean(2, 2);
  mean << 5.0, -3.0, 2.0, 7.0;
  const SpdMatrix tiny =
      SpdMatrix::from(1e-16 * Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd x =
      sample_matrix_normal(mean, SpdMatrix::identity(2), tiny, rng);
  CHECK((x - mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("matrix normal rejects mismatched dimensions") {
  RngStream rng(69);
  CHECK_THROWS_AS(
      sample_matrix_normal(Eigen::MatrixXd::Zero(3, 2), SpdMatrix::identity(2),
                           SpdMatrix::identity(2), rng),
      DimensionError);
}
