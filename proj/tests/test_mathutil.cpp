#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mpqmc/mathutil.hpp"

using namespace mpqmc;

TEST_CASE("gauss_inv_cdf hits textbook quantiles") {
  CHECK(gauss_inv_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(gauss_inv_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(gauss_inv_cdf(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-12));
  CHECK(gauss_inv_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
}

TEST_CASE("gauss_inv_cdf round-trips through the CDF") {
  // Dense sweep over the unit interval plus log-spaced tail points.
  for (int i = 1; i < 2000; ++i) {
    const double u = i / 2000.0;
    CHECK(std::fabs(gauss_cdf(gauss_inv_cdf(u)) - u) < 1e-12);
  }
  for (double u = 1e-12; u < 0.1; u *= 10.0) {
    const double x = gauss_inv_cdf(u);
    // One Newton step against the erfc-based CDF bounds the approximation error.
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    const double correction = (gauss_cdf(x) - u) / pdf;
    CHECK(std::fabs(correction) < 1e-9);
    // Antisymmetry check. Representing 1-u rounds by up to half an ulp near
    // one, and the flat tail CDF amplifies that to roughly ulp/(2 pdf) in x.
    const double tol = 1e-12 * std::fabs(x) + 1.5e-16 / pdf;
    CHECK(std::fabs(gauss_inv_cdf(1.0 - u) + x) < tol);
  }
}

TEST_CASE("gauss_inv_cdf is monotone and finite in extreme tails") {
  double prev = -1e308;
  for (double u : {1e-300, 1e-200, 1e-100, 1e-30, 1e-15, 0.2, 0.8, 1.0 - 1e-15, 1.0 - 1e-16}) {
    const double x = gauss_inv_cdf(u);
    CHECK(std::isfinite(x));
    CHECK(x > prev);
    prev = x;
  }
  CHECK_THROWS_AS(gauss_inv_cdf(0.0), Error);
  CHECK_THROWS_AS(gauss_inv_cdf(1.0), Error);
}

TEST_CASE("MvNormal logpdf matches a direct inverse-based evaluation") {
  Eigen::VectorXd mu(2);
  mu << 0.5, -1.0;
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  const auto law = MvNormal::from_moments(mu, cov);

  Eigen::VectorXd x(2);
  x << 1.0, -1.5;
  const Eigen::VectorXd r = x - mu;
  const double direct =
      -std::log(2.0 * M_PI) - 0.5 * std::log(cov.determinant()) -
      0.5 * r.dot(cov.inverse() * r);
  CHECK(law.logpdf(x) == doctest::Approx(direct).epsilon(1e-13));

  // Scalar standard normal at the mode.
  Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1);
  const auto std1 = MvNormal::from_moments(z1, Eigen::MatrixXd::Identity(1, 1));
  CHECK(std1.logpdf(z1) == doctest::Approx(-0.9189385332046727).epsilon(1e-15));
}

TEST_CASE("MvNormal rejects indefinite covariance") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(MvNormal::from_moments(Eigen::VectorXd::Zero(2), bad), Error);
}

TEST_CASE("map_uniforms sends the all-0.5 tuple to the mean") {
  Eigen::VectorXd mu(3);
  mu << 1.0, 2.0, 3.0;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3) * 4.0;
  const auto law = MvNormal::from_moments(mu, cov);
  const double u[3] = {0.5, 0.5, 0.5};
  CHECK((law.map_uniforms(u) - mu).norm() == doctest::Approx(0.0).epsilon(1e-15));

  // Pushing one coordinate's uniform up moves that coordinate up.
  const double u2[3] = {0.5, 0.9, 0.5};
  CHECK(law.map_uniforms(u2)[1] > mu[1]);
}

TEST_CASE("fnv1a64 matches the published test vector") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("abc") != fnv1a64("acb"));
}

TEST_CASE("mix64 is deterministic and spreads nearby inputs") {
  CHECK(mix64(42) == mix64(42));
  CHECK(mix64(1) != mix64(2));
  // Count bit flips between mixes of adjacent counters; should be near 32.
  int flips = __builtin_popcountll(mix64(1000) ^ mix64(1001));
  CHECK(flips > 10);
  CHECK(flips < 54);
}
