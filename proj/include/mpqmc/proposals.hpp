#pragma once

#include <Eigen/Dense>
#include <utility>

#include "mpqmc/errors.hpp"
#include "mpqmc/mathutil.hpp"
#include "mpqmc/targets.hpp"

namespace mpqmc {

enum class KernelKind {
  IndependentGaussian,
  RandomWalkGaussian,
  Smmala,
  AuxiliaryState,
};

const char* kernel_kind_name(KernelKind k);

// Position-aware local Gaussian law: mean = x + (eps^2/2) G(x)^{-1} grad log pi(x),
// covariance = eps^2 G(x)^{-1}. Throws MetricNotSPD when G(x) has no Cholesky
// factor and WrongMode when the target exposes no gradient or metric.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> smmala_params(const Target& target,
                                                          const Eigen::VectorXd& x, double eps);

// One iteration's candidate pool. Row i0 (always 0 here) holds the sample
// carried over from the previous iteration; rows 1..N are fresh proposals.
struct ProposalSet {
  Eigen::MatrixXd points;     // (N+1) x d
  Eigen::VectorXd log_pi;     // target log-density per row
  Eigen::VectorXd log_kappa;  // log kappa(y_j, y_{\j}) per row
  Eigen::VectorXd aux_z;      // auxiliary conditioning point; empty unless used
  int i0 = 0;

  int n_proposals() const { return static_cast<int>(points.rows()) - 1; }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Gaussian proposal kernel in one of four shapes. The conditional law
// kappa(from, .) is Gaussian for every kind; what varies is how its moments
// depend on the conditioning point and which point conditions the batch:
//
//   IndependentGaussian   N(mu, Sigma), ignores the conditioning point
//   RandomWalkGaussian    N(from, Sigma)
//   Smmala                N(from + (eps^2/2) G^{-1} grad, eps^2 G^{-1})
//   AuxiliaryState        one extra point z ~ kappa_base(carried, .), then all
//                         N proposals from kappa_base(z, .); kappa_base is the
//                         random walk, or SmMALA when built with a target
//
// Mean and covariance are adaptation slots: the sampler rewrites them between
// iterations only, so concurrent density evaluations within an iteration see
// frozen parameters.
class Kernel {
 public:
  static Kernel independent(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static Kernel random_walk(Eigen::MatrixXd cov);
  static Kernel smmala(TargetPtr target, double eps);
  static Kernel auxiliary_random_walk(Eigen::MatrixXd cov);
  static Kernel auxiliary_smmala(TargetPtr target, double eps);

  KernelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  // Fresh-proposal draws never depend on the carried sample.
  bool is_independent() const { return kind_ == KernelKind::IndependentGaussian; }
  // The batch consumes d uniforms per proposal, plus d for the auxiliary point.
  int uniforms_per_batch(int n_proposals) const;

  // Conditional law kappa(from, .). For AuxiliaryState this is the base law,
  // used both for the z-step and, conditioned on z, for the proposals.
  MvNormal law_at(const Eigen::VectorXd& from) const;

  // Maps n_proposals * d uniforms (plus d leading ones for auxiliary kinds)
  // through the inverse CDF. Row 0 of the result is the carried point itself.
  // Throws DegenerateTuple if any uniform lies outside (0, 1).
  Eigen::MatrixXd propose_batch(const Eigen::VectorXd& carried, const double* u, int n_proposals,
                                Eigen::VectorXd* aux_z_out = nullptr) const;

  // log kappa(from, to_set): the batch density factorizes over rows.
  double log_kappa(const Eigen::VectorXd& from, const Eigen::MatrixXd& to_set) const;

  // log kappa(y_j, y_{\j}) for every row j of points. For AuxiliaryState the
  // value is kappa~(y_j, y_{\j}) = kappa(y_j, z) * prod_{k != j} kappa(z, y_k).
  Eigen::VectorXd log_kappa_all(const Eigen::MatrixXd& points, const Eigen::VectorXd& aux_z) const;

  // Adaptation slots. set_mean is only meaningful for the independent kind;
  // set_cov rejects non-SPD updates with NonSPDAdaptation. SmMALA variants
  // derive their covariance from the metric and accept neither.
  bool has_adaptable_cov() const { return cov_.size() != 0; }
  void set_mean(Eigen::VectorXd mean);
  void set_cov(const Eigen::MatrixXd& cov);
  const Eigen::VectorXd& mean() const;
  const Eigen::MatrixXd& cov() const;
  double eps() const { return eps_; }

 private:
  Kernel(KernelKind kind, int dim) : kind_(kind), dim_(dim) {}

  MvNormal base_law_at(const Eigen::VectorXd& from) const;

  KernelKind kind_;
  int dim_;
  Eigen::VectorXd mean_;   // independent kind
  Eigen::MatrixXd cov_;    // all kinds except pure SmMALA
  MvNormal fixed_law_;     // cached for the independent kind
  TargetPtr target_;       // SmMALA variants
  double eps_ = 0.0;
  bool aux_smmala_ = false;
};

// Assembles points, target log-densities and kernel log-densities for one
// iteration. Density evaluation stays single-threaded here; the sampler
// fans out the expensive log_pi loop itself when a worker pool is attached.
ProposalSet build_proposal_set(const Kernel& kernel, const Target& target,
                               const Eigen::VectorXd& carried, const double* u, int n_proposals);

}  // namespace mpqmc
