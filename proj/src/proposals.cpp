#include "mpqmc/proposals.hpp"

#include <cmath>
#include <utility>

namespace mpqmc {

namespace {

void check_open_unit(const double* u, int n) {
  for (int i = 0; i < n; ++i)
    if (!(u[i] > 0.0) || !(u[i] < 1.0))
      fail(Errc::DegenerateTuple, "uniform outside the open unit interval");
}

}  // namespace

const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::IndependentGaussian: return "IndependentGaussian";
    case KernelKind::RandomWalkGaussian: return "RandomWalkGaussian";
    case KernelKind::Smmala: return "Smmala";
    case KernelKind::AuxiliaryState: return "AuxiliaryState";
  }
  return "?";
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> smmala_params(const Target& target,
                                                          const Eigen::VectorXd& x, double eps) {
  if (!target.has_gradient() || !target.has_fisher_metric())
    fail(Errc::WrongMode, "smmala needs a gradient and a Fisher metric");
  if (!(eps > 0.0)) fail(Errc::ConfigError, "smmala step size must be positive");
  const Eigen::MatrixXd g = target.fisher_metric(x);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    fail(Errc::MetricNotSPD, "Fisher metric has no Cholesky factor");
  const Eigen::VectorXd ginv_grad = llt.solve(target.grad_log_density(x));
  const Eigen::MatrixXd ginv = llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
  // Solving for the inverse leaves O(eps_mach) asymmetry; resymmetrize so the
  // covariance Cholesky downstream sees an exactly symmetric matrix.
  const Eigen::MatrixXd cov = 0.5 * eps * eps * (ginv + ginv.transpose());
  return {x + 0.5 * eps * eps * ginv_grad, cov};
}

Kernel Kernel::independent(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  Kernel k(KernelKind::IndependentGaussian, static_cast<int>(mean.size()));
  k.fixed_law_ = MvNormal::from_moments(mean, cov);
  k.mean_ = std::move(mean);
  k.cov_ = std::move(cov);
  return k;
}

Kernel Kernel::random_walk(Eigen::MatrixXd cov) {
  Kernel k(KernelKind::RandomWalkGaussian, static_cast<int>(cov.rows()));
  // Validate SPD once up front; per-point laws reuse the factor.
  k.fixed_law_ = MvNormal::from_moments(Eigen::VectorXd::Zero(cov.rows()), cov);
  k.cov_ = std::move(cov);
  return k;
}

Kernel Kernel::smmala(TargetPtr target, double eps) {
  if (!target) fail(Errc::ConfigError, "smmala kernel needs a target");
  Kernel k(KernelKind::Smmala, target->dim());
  k.target_ = std::move(target);
  k.eps_ = eps;
  return k;
}

Kernel Kernel::auxiliary_random_walk(Eigen::MatrixXd cov) {
  Kernel k(KernelKind::AuxiliaryState, static_cast<int>(cov.rows()));
  k.fixed_law_ = MvNormal::from_moments(Eigen::VectorXd::Zero(cov.rows()), cov);
  k.cov_ = std::move(cov);
  return k;
}

Kernel Kernel::auxiliary_smmala(TargetPtr target, double eps) {
  if (!target) fail(Errc::ConfigError, "smmala kernel needs a target");
  Kernel k(KernelKind::AuxiliaryState, target->dim());
  k.target_ = std::move(target);
  k.eps_ = eps;
  k.aux_smmala_ = true;
  return k;
}

int Kernel::uniforms_per_batch(int n_proposals) const {
  const int base = n_proposals * dim_;
  return kind_ == KernelKind::AuxiliaryState ? base + dim_ : base;
}

MvNormal Kernel::base_law_at(const Eigen::VectorXd& from) const {
  switch (kind_) {
    case KernelKind::IndependentGaussian:
      return fixed_law_;
    case KernelKind::RandomWalkGaussian: {
      MvNormal law = fixed_law_;
      law.mean = from;
      return law;
    }
    case KernelKind::Smmala: {
      auto [m, c] = smmala_params(*target_, from, eps_);
      return MvNormal::from_moments(std::move(m), c);
    }
    case KernelKind::AuxiliaryState: {
      if (aux_smmala_) {
        auto [m, c] = smmala_params(*target_, from, eps_);
        return MvNormal::from_moments(std::move(m), c);
      }
      MvNormal law = fixed_law_;
      law.mean = from;
      return law;
    }
  }
  fail(Errc::WrongMode, "unknown kernel kind");
}

MvNormal Kernel::law_at(const Eigen::VectorXd& from) const { return base_law_at(from); }

Eigen::MatrixXd Kernel::propose_batch(const Eigen::VectorXd& carried, const double* u,
                                      int n_proposals, Eigen::VectorXd* aux_z_out) const {
  if (carried.size() != dim_) fail(Errc::ConfigError, "carried point has the wrong dimension");
  if (n_proposals < 1) fail(Errc::ConfigError, "need at least one proposal");
  check_open_unit(u, uniforms_per_batch(n_proposals));

  Eigen::MatrixXd pts(n_proposals + 1, dim_);
  pts.row(0) = carried.transpose();

  const double* cursor = u;
  Eigen::VectorXd origin = carried;
  if (kind_ == KernelKind::AuxiliaryState) {
    origin = base_law_at(carried).map_uniforms(cursor);
    cursor += dim_;
    if (aux_z_out) *aux_z_out = origin;
  } else if (aux_z_out) {
    aux_z_out->resize(0);
  }

  const MvNormal law = base_law_at(origin);
  for (int i = 1; i <= n_proposals; ++i, cursor += dim_)
    pts.row(i) = law.map_uniforms(cursor).transpose();
  return pts;
}

double Kernel::log_kappa(const Eigen::VectorXd& from, const Eigen::MatrixXd& to_set) const {
  const MvNormal law = base_law_at(from);
  double total = 0.0;
  for (int i = 0; i < to_set.rows(); ++i) total += law.logpdf(to_set.row(i).transpose());
  return total;
}

Eigen::VectorXd Kernel::log_kappa_all(const Eigen::MatrixXd& points,
                                      const Eigen::VectorXd& aux_z) const {
  const int n = static_cast<int>(points.rows());
  Eigen::VectorXd lk(n);

  if (kind_ == KernelKind::AuxiliaryState) {
    if (aux_z.size() != dim_)
      fail(Errc::WrongMode, "auxiliary kernel needs the auxiliary point to score a batch");
    // kappa~(y_j, y_{\j}) = kappa(y_j, z) * prod_{k != j} kappa(z, y_k)
    const MvNormal from_z = base_law_at(aux_z);
    Eigen::VectorXd z_scores(n);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      z_scores[k] = from_z.logpdf(points.row(k).transpose());
      total += z_scores[k];
    }
    for (int j = 0; j < n; ++j)
      lk[j] = base_law_at(points.row(j).transpose()).logpdf(aux_z) + total - z_scores[j];
    return lk;
  }

  if (kind_ == KernelKind::IndependentGaussian) {
    // One shared law; each row's score drops only its own term.
    Eigen::VectorXd scores(n);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      scores[k] = fixed_law_.logpdf(points.row(k).transpose());
      total += scores[k];
    }
    for (int j = 0; j < n; ++j) lk[j] = total - scores[j];
    return lk;
  }

  for (int j = 0; j < n; ++j) {
    const MvNormal law = base_law_at(points.row(j).transpose());
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != j) s += law.logpdf(points.row(k).transpose());
    lk[j] = s;
  }
  return lk;
}

void Kernel::set_mean(Eigen::VectorXd mean) {
  if (kind_ != KernelKind::IndependentGaussian)
    fail(Errc::WrongMode, "only the independent kernel carries an adaptable mean");
  if (mean.size() != dim_) fail(Errc::NonSPDAdaptation, "mean dimension mismatch");
  fixed_law_.mean = mean;
  mean_ = std::move(mean);
}

void Kernel::set_cov(const Eigen::MatrixXd& cov) {
  if (!has_adaptable_cov())
    fail(Errc::WrongMode, "this kernel derives its covariance from the metric");
  if (cov.rows() != dim_ || cov.cols() != dim_)
    fail(Errc::NonSPDAdaptation, "covariance dimension mismatch");
  MvNormal law;
  try {
    law = MvNormal::from_moments(fixed_law_.mean, cov);
  } catch (const Error& e) {
    if (e.code() == Errc::NotSPD) fail(Errc::NonSPDAdaptation, "adapted covariance is not SPD");
    throw;
  }
  fixed_law_ = std::move(law);
  cov_ = cov;
}

const Eigen::VectorXd& Kernel::mean() const {
  if (kind_ != KernelKind::IndependentGaussian)
    fail(Errc::WrongMode, "only the independent kernel carries a mean");
  return mean_;
}

const Eigen::MatrixXd& Kernel::cov() const {
  if (cov_.size() == 0) fail(Errc::WrongMode, "kernel covariance is metric-derived");
  return cov_;
}

ProposalSet build_proposal_set(const Kernel& kernel, const Target& target,
                               const Eigen::VectorXd& carried, const double* u, int n_proposals) {
  ProposalSet set;
  set.points = kernel.propose_batch(carried, u, n_proposals, &set.aux_z);
  set.i0 = 0;
  const int rows = static_cast<int>(set.points.rows());
  set.log_pi.resize(rows);
  for (int i = 0; i < rows; ++i) set.log_pi[i] = target.log_density(set.points.row(i).transpose());
  set.log_kappa = kernel.log_kappa_all(set.points, set.aux_z);
  return set;
}

}  // namespace mpqmc
