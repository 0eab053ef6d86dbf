#include "mpqmc/mathutil.hpp"

#include <cmath>

namespace mpqmc {

double gauss_inv_cdf(double p) {
  // AS241 PPND16 (Wichura 1988). Three rational approximations: a central
  // region and two tail regions split at sqrt(-log r) = 5.
  if (!(p > 0.0 && p < 1.0)) fail(Errc::InvalidWeights, "gauss_inv_cdf needs p in (0,1)");

  static const double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static const double b[8] = {
      1.0,                      4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3,  2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static const double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0,                      5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  auto poly = [](const double* k, double x) {
    return ((((((k[7] * x + k[6]) * x + k[5]) * x + k[4]) * x + k[3]) * x + k[2]) * x + k[1]) * x +
           k[0];
  };

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, r) / poly(b, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = poly(c, r) / poly(d, r);
  } else {
    r -= 5.0;
    val = poly(e, r) / poly(f, r);
  }
  return q < 0.0 ? -val : val;
}

double gauss_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

MvNormal MvNormal::from_moments(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    fail(Errc::NotSPD, "covariance shape does not match mean");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) fail(Errc::NotSPD, "covariance is not positive definite");
  MvNormal out;
  out.mean = std::move(mean);
  out.chol_lower = llt.matrixL();
  double logdet_half = 0.0;
  for (int i = 0; i < out.chol_lower.rows(); ++i) logdet_half += std::log(out.chol_lower(i, i));
  out.log_norm_const = -0.5 * out.dim() * kLog2Pi - logdet_half;
  return out;
}

double MvNormal::logpdf(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v = chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  return log_norm_const - 0.5 * v.squaredNorm();
}

Eigen::VectorXd MvNormal::map_uniforms(const double* u) const {
  const int d = dim();
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = gauss_inv_cdf(u[i]);
  return mean + chol_lower * z;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace mpqmc
