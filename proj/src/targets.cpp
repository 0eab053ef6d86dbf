#include "mpqmc/targets.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "mpqmc/driving.hpp"
#include "mpqmc/mathutil.hpp"

namespace mpqmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) { return z > 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Eigen::MatrixXd ar1_covariance(int d) {
  Eigen::MatrixXd S(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) S(i, j) = std::pow(0.5, std::abs(i - j));
  return S;
}

Eigen::VectorXd draw_normal(UniformStream& s, int d) {
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = gauss_inv_cdf(s.next());
  return z;
}

class MvnTarget final : public Target {
 public:
  MvnTarget(MvNormal law, Eigen::MatrixXd cov)
      : law_(std::move(law)), cov_(std::move(cov)) {
    precision_ = cov_.llt().solve(Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols()));
  }

  int dim() const override { return law_.dim(); }
  double log_density(const Eigen::VectorXd& x) const override { return law_.logpdf(x); }

  bool has_gradient() const override { return true; }
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override {
    return -(precision_ * (x - law_.mean));
  }

  bool has_fisher_metric() const override { return true; }
  Eigen::MatrixXd fisher_metric(const Eigen::VectorXd&) const override { return precision_; }

  bool has_analytic_moments() const override { return true; }
  Eigen::VectorXd analytic_mean() const override { return law_.mean; }
  Eigen::MatrixXd analytic_cov() const override { return cov_; }

 private:
  MvNormal law_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd precision_;
};

class LogisticTarget final : public Target {
 public:
  LogisticTarget(Eigen::MatrixXd X, Eigen::VectorXd y, double alpha)
      : X_(std::move(X)), y_(std::move(y)), alpha_(alpha) {}

  int dim() const override { return static_cast<int>(X_.cols()); }

  double log_density(const Eigen::VectorXd& theta) const override {
    const Eigen::VectorXd t = X_ * theta;
    double ll = 0.0;
    for (int i = 0; i < t.size(); ++i)
      ll -= y_[i] > 0.5 ? softplus(-t[i]) : softplus(t[i]);
    return ll - 0.5 * theta.squaredNorm() / alpha_;
  }

  bool has_gradient() const override { return true; }
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& theta) const override {
    const Eigen::VectorXd t = X_ * theta;
    Eigen::VectorXd r(t.size());
    for (int i = 0; i < t.size(); ++i) r[i] = y_[i] - sigmoid(t[i]);
    return X_.transpose() * r - theta / alpha_;
  }

  bool has_fisher_metric() const override { return true; }
  Eigen::MatrixXd fisher_metric(const Eigen::VectorXd& theta) const override {
    const Eigen::VectorXd t = X_ * theta;
    Eigen::VectorXd w(t.size());
    for (int i = 0; i < t.size(); ++i) {
      const double s = sigmoid(t[i]);
      w[i] = s * (1.0 - s);
    }
    return X_.transpose() * w.asDiagonal() * X_ +
           Eigen::MatrixXd::Identity(dim(), dim()) / alpha_;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  double alpha_;
};

class OdeTarget final : public Target {
 public:
  OdeTarget(OdeModel model, Eigen::MatrixXd obs, double prior_scale)
      : model_(std::move(model)), obs_(std::move(obs)), prior_scale_(prior_scale) {
    // Each observation row carries two independent Gaussian terms, one per state.
    ll_const_ = -static_cast<double>(obs_.rows()) *
                (std::log(model_.noise_sd[0]) + std::log(model_.noise_sd[1]) + kLog2Pi);
  }

  int dim() const override { return model_.param_dim; }

  double log_density(const Eigen::VectorXd& theta) const override {
    for (int i = 0; i < theta.size(); ++i)
      if (!(theta[i] > 0.0)) return kNegInf;
    Eigen::MatrixXd traj;
    try {
      traj = solve_ode_model(model_, theta);
    } catch (const Error& e) {
      if (e.code() == Errc::SolverDiverged) return kNegInf;
      throw;
    }
    double lp = -theta.sum() / prior_scale_;
    for (int r = 0; r < obs_.rows(); ++r)
      for (int c = 0; c < 2; ++c) {
        const double z = (obs_(r, c) - traj(r, c)) / model_.noise_sd[c];
        lp -= 0.5 * z * z;
      }
    return lp + ll_const_;
  }

 private:
  OdeModel model_;
  Eigen::MatrixXd obs_;
  double prior_scale_;
  double ll_const_;
};

}  // namespace

Eigen::VectorXd Target::grad_log_density(const Eigen::VectorXd&) const {
  fail(Errc::WrongMode, "target does not expose a gradient");
}

Eigen::MatrixXd Target::fisher_metric(const Eigen::VectorXd&) const {
  fail(Errc::WrongMode, "target does not expose a Fisher metric");
}

Eigen::VectorXd Target::analytic_mean() const {
  fail(Errc::NoReference, "target has no analytic mean");
}

Eigen::MatrixXd Target::analytic_cov() const {
  fail(Errc::NoReference, "target has no analytic covariance");
}

TargetPtr gaussian_target(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return std::make_shared<MvnTarget>(MvNormal::from_moments(mean, cov), cov);
}

TargetPtr zellner_linreg_target(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double sigma2, double g) {
  if (sigma2 <= 0.0 || g <= 0.0) fail(Errc::ConfigError, "sigma2 and g must be positive");
  if (X.rows() != y.size()) fail(Errc::ConfigError, "design and response sizes differ");
  const Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx);
  if (eig.info() != Eigen::Success) fail(Errc::DegenerateDesign, "eigendecomposition failed");
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = ev[ev.size() - 1] * 1e-12;
  if (ev[0] <= cutoff)
    fail(Errc::DegenerateDesign, "X^T X is rank deficient; the g-prior posterior is improper");

  // Pseudo-inverse through the eigenbasis; past the rank check this is the
  // plain inverse but stays stable for ill-conditioned designs.
  const Eigen::MatrixXd xtx_inv =
      eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd betahat = xtx_inv * (X.transpose() * y);
  const Eigen::VectorXd mean = betahat / (1.0 + g);
  const Eigen::MatrixXd cov = sigma2 / (1.0 + g) * xtx_inv;
  return std::make_shared<MvnTarget>(MvNormal::from_moments(mean, cov), cov);
}

TargetPtr logistic_target(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
  if (alpha <= 0.0) fail(Errc::ConfigError, "prior variance must be positive");
  if (X.rows() != y.size()) fail(Errc::ConfigError, "design and label sizes differ");
  return std::make_shared<LogisticTarget>(X, y, alpha);
}

OdeModel lotka_volterra_model(const Eigen::VectorXd& times) {
  OdeModel m;
  m.kind = OdeKind::LotkaVolterra;
  m.param_dim = 4;
  m.times = times;
  m.init << 10.0, 5.0;
  m.noise_sd << 0.25, 0.25;
  return m;
}

OdeModel fitzhugh_nagumo_model(const Eigen::VectorXd& times) {
  OdeModel m;
  m.kind = OdeKind::FitzHughNagumo;
  m.param_dim = 3;
  m.times = times;
  m.init << -1.0, 1.0;
  m.noise_sd << 1.0, 1.0;
  return m;
}

Eigen::Vector2d ode_rhs(OdeKind kind, const Eigen::Vector2d& s, const Eigen::VectorXd& p) {
  Eigen::Vector2d d;
  switch (kind) {
    case OdeKind::LotkaVolterra:
      // p = (alpha, beta, gamma, delta); u prey, v predator.
      d[0] = p[0] * s[0] - p[1] * s[0] * s[1];
      d[1] = p[2] * s[0] * s[1] - p[3] * s[1];
      return d;
    case OdeKind::FitzHughNagumo:
      // p = (alpha, beta, gamma); u voltage, v recovery.
      d[0] = p[2] * (s[0] - s[0] * s[0] * s[0] / 3.0 + s[1]);
      d[1] = -(s[0] - p[0] + p[1] * s[1]) / p[2];
      return d;
  }
  fail(Errc::WrongMode, "unknown ODE kind");
}

Eigen::MatrixXd solve_rk4(const OdeRhs& rhs, const Eigen::VectorXd& init,
                          const Eigen::VectorXd& t_grid, int substeps) {
  if (substeps < 1) fail(Errc::ConfigError, "substeps must be positive");
  for (int i = 0; i + 1 < t_grid.size(); ++i)
    if (!(t_grid[i] < t_grid[i + 1])) fail(Errc::ConfigError, "time grid must increase strictly");
  if (t_grid.size() > 0 && t_grid[0] < 0.0) fail(Errc::ConfigError, "time grid starts before 0");

  Eigen::MatrixXd out(t_grid.size(), init.size());
  Eigen::VectorXd x = init;
  double t = 0.0;
  for (int i = 0; i < t_grid.size(); ++i) {
    const double h = (t_grid[i] - t) / substeps;
    for (int k = 0; k < substeps && h > 0.0; ++k) {
      const Eigen::VectorXd k1 = rhs(t, x);
      const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
      const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
      const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
      x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
      if (!x.allFinite()) fail(Errc::SolverDiverged, "state left the finite range");
    }
    t = t_grid[i];
    out.row(i) = x.transpose();
  }
  return out;
}

Eigen::MatrixXd solve_ode_model(const OdeModel& model, const Eigen::VectorXd& params,
                                int substeps) {
  if (params.size() != model.param_dim) fail(Errc::ConfigError, "parameter dimension mismatch");
  auto rhs = [&model, &params](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return ode_rhs(model.kind, Eigen::Vector2d(x[0], x[1]), params);
  };
  return solve_rk4(rhs, model.init, model.times, substeps);
}

TargetPtr ode_target(const OdeModel& model, const Eigen::MatrixXd& observations,
                     double prior_scale) {
  if (observations.rows() != model.times.size() || observations.cols() != 2)
    fail(Errc::ConfigError, "observations must be one row per time, two states");
  if (prior_scale <= 0.0) fail(Errc::ConfigError, "prior scale must be positive");
  return std::make_shared<OdeTarget>(model, observations, prior_scale);
}

RegressionData simulate_linreg(int n, int d, std::uint64_t seed, double sigma2) {
  auto s = UniformStream::pseudo_random(seed);
  const auto row_law = MvNormal::from_moments(Eigen::VectorXd::Zero(d), ar1_covariance(d));
  RegressionData out;
  out.X.resize(n, d);
  std::vector<double> u(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) u[j] = s.next();
    out.X.row(i) = row_law.map_uniforms(u.data()).transpose();
  }
  out.y = out.X * Eigen::VectorXd::Ones(d) + std::sqrt(sigma2) * draw_normal(s, n);
  return out;
}

RegressionData simulate_logistic(int n, int d, std::uint64_t seed) {
  auto s = UniformStream::pseudo_random(seed);
  const auto row_law = MvNormal::from_moments(Eigen::VectorXd::Zero(d), ar1_covariance(d));
  Eigen::VectorXd theta(d);
  for (int j = 0; j < d; ++j) theta[j] = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(double(d));
  RegressionData out;
  out.X.resize(n, d);
  out.y.resize(n);
  std::vector<double> u(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) u[j] = s.next();
    out.X.row(i) = row_law.map_uniforms(u.data()).transpose();
    out.y[i] = s.next() < sigmoid(out.X.row(i).dot(theta)) ? 1.0 : 0.0;
  }
  return out;
}

Eigen::MatrixXd simulate_ode(const OdeModel& model, const Eigen::VectorXd& true_params,
                             std::uint64_t seed) {
  const Eigen::MatrixXd traj = solve_ode_model(model, true_params);
  auto s = UniformStream::pseudo_random(seed);
  Eigen::MatrixXd obs = traj;
  for (int r = 0; r < obs.rows(); ++r)
    for (int c = 0; c < 2; ++c) obs(r, c) += model.noise_sd[c] * gauss_inv_cdf(s.next());
  return obs;
}

}  // namespace mpqmc
