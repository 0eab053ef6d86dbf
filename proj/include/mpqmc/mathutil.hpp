#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "mpqmc/errors.hpp"

namespace mpqmc {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Standard-normal quantile, Wichura's PPND16 rational approximation.
// Absolute error is far below 1e-9 on (1e-300, 1 - 1e-16).
double gauss_inv_cdf(double p);

// Standard-normal CDF via erfc; used for round-trip checks and tail maths.
double gauss_cdf(double x);

// Multivariate normal with a cached lower Cholesky factor. Throws NotSPD if
// the covariance has no Cholesky decomposition.
struct MvNormal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol_lower;
  double log_norm_const = 0.0;  // -d/2 log(2 pi) - sum_i log L_ii

  static MvNormal from_moments(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);

  int dim() const { return static_cast<int>(mean.size()); }
  double logpdf(const Eigen::VectorXd& x) const;
  // Inverse-CDF transport: mean + L * Phi^{-1}(u), one uniform per coordinate.
  Eigen::VectorXd map_uniforms(const double* u) const;
};

// 64-bit FNV-1a, used for config fingerprints in run metadata.
std::uint64_t fnv1a64(const std::string& s);

// splitmix64-style finalizer; the counter-based uniform generator and the
// dataset simulators build on it.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mpqmc
