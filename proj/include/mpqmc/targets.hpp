#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>

#include "mpqmc/errors.hpp"

namespace mpqmc {

// A posterior density up to an additive log constant. Gradient, Fisher
// metric and analytic moments are optional capabilities; callers must check
// the has_* flags before use. Implementations are immutable and safe to
// query from many threads at once.
class Target {
 public:
  virtual ~Target() = default;

  virtual int dim() const = 0;

  // Finite inside the support, -infinity outside; never throws for
  // out-of-support points.
  virtual double log_density(const Eigen::VectorXd& x) const = 0;

  virtual bool has_gradient() const { return false; }
  virtual Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const;

  virtual bool has_fisher_metric() const { return false; }
  virtual Eigen::MatrixXd fisher_metric(const Eigen::VectorXd& x) const;

  virtual bool has_analytic_moments() const { return false; }
  virtual Eigen::VectorXd analytic_mean() const;
  virtual Eigen::MatrixXd analytic_cov() const;
};

using TargetPtr = std::shared_ptr<const Target>;

TargetPtr gaussian_target(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

// Bayesian linear regression with a g-prior N(0, sigma2/g (X^T X)^{-1}).
// The posterior is Gaussian: cov sigma2/(1+g) (X^T X)^{-1}, mean
// betahat/(1+g) with betahat the least-squares solution. Throws
// DegenerateDesign when X^T X is singular, since the prior (and hence the
// posterior) is improper along null directions.
TargetPtr zellner_linreg_target(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double sigma2, double g);

// Bayesian logistic regression with prior N(0, alpha I). Exposes the exact
// gradient and the expected Fisher metric X^T W X + I/alpha.
TargetPtr logistic_target(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);

enum class OdeKind { LotkaVolterra, FitzHughNagumo };

// Two-state ODE observation model with fixed, known initial conditions and
// independent Gaussian observation noise per state.
struct OdeModel {
  OdeKind kind;
  int param_dim;
  Eigen::VectorXd times;  // strictly increasing, all > 0
  Eigen::Vector2d init;
  Eigen::Vector2d noise_sd;
};

OdeModel lotka_volterra_model(const Eigen::VectorXd& times);
OdeModel fitzhugh_nagumo_model(const Eigen::VectorXd& times);

Eigen::Vector2d ode_rhs(OdeKind kind, const Eigen::Vector2d& state, const Eigen::VectorXd& params);

using OdeRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& state)>;

// Classical fixed-step RK4 from t = 0, with `substeps` internal steps per
// grid interval. Returns the state at each grid time (rows). Throws
// SolverDiverged as soon as any state component stops being finite.
Eigen::MatrixXd solve_rk4(const OdeRhs& rhs, const Eigen::VectorXd& init,
                          const Eigen::VectorXd& t_grid, int substeps = 4);

// Trajectory of a model at the model's own observation times.
Eigen::MatrixXd solve_ode_model(const OdeModel& model, const Eigen::VectorXd& params,
                                int substeps = 4);

// Posterior over ODE parameters: componentwise Gamma(shape 1, scale
// prior_scale) prior truncated at zero (density kept unnormalized), Gaussian
// likelihood of the observations against the RK4 solution. A diverging solve
// is treated as zero likelihood, not an error.
TargetPtr ode_target(const OdeModel& model, const Eigen::MatrixXd& observations,
                     double prior_scale = 3.0);

struct RegressionData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

// Rows of X are N(0, Sigma_X) with Sigma_X(i,j) = 0.5^|i-j|; y = X beta* + eps
// with beta* = ones and eps ~ N(0, sigma2 I). Fully determined by the seed.
RegressionData simulate_linreg(int n, int d, std::uint64_t seed, double sigma2 = 1.0);

// Same design distribution; labels are Bernoulli(sigmoid(x^T theta*)) with
// theta* alternating +-1/sqrt(d).
RegressionData simulate_logistic(int n, int d, std::uint64_t seed);

// Noisy observations of the model solved at true_params, one row per
// observation time.
Eigen::MatrixXd simulate_ode(const OdeModel& model, const Eigen::VectorXd& true_params,
                             std::uint64_t seed);

}  // namespace mpqmc
