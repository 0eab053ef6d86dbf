#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mpqmc/driving.hpp"
#include "mpqmc/errors.hpp"
#include "mpqmc/finite_chain.hpp"
#include "mpqmc/parallel.hpp"
#include "mpqmc/proposals.hpp"
#include "mpqmc/targets.hpp"

namespace mpqmc {

enum class SamplerMode { Sampling, ImportanceSampling };
enum class AdaptMode { Off, Cov, MeanAndCov };

const char* sampler_mode_name(SamplerMode m);
const char* adapt_mode_name(AdaptMode m);

// Optional ergodicity safeguards. bounded_jump_D resamples any proposal
// farther than D from the carried sample (pseudo-random driving only; a
// resample would shift every later tuple of a CUD schedule). freeze_outside_K
// swaps in the initial, unadapted kernel for iterations whose carried sample
// lies outside the box.
struct Safeguards {
  std::optional<double> bounded_jump_D;
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> freeze_outside_K;
};

struct SamplerConfig {
  int n_proposals = 1;        // N, fresh proposals per iteration
  int m_per_iter = 1;         // M, accepted samples per iteration (Sampling mode)
  std::uint64_t iterations = 1;  // L, recorded iterations
  std::uint64_t burn_in = 0;     // extra leading iterations, discarded
  SamplerMode mode = SamplerMode::Sampling;
  TransitionKind transition = TransitionKind::Barker;
  AdaptMode adapt = AdaptMode::Off;
  Safeguards safeguards;
};

// Function integrated under the importance-sampling estimator. Defaults to
// the identity (posterior mean) when unset.
struct Integrand {
  int out_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> fn;
};

// Running weighted estimate. mu is the plain arithmetic mean of the
// per-iteration weighted sums (the 1/(ell+1) recursion telescopes exactly, no
// initialization term). Sigma is the weighted covariance recursion over the
// proposal space: in adaptive runs it starts from the kernel's initial
// covariance counted as one observation, matching how the adaptive listings
// seed it; otherwise it starts empty.
struct WeightedEstimate {
  Eigen::VectorXd mu;
  Eigen::MatrixXd Sigma;
  std::uint64_t ell = 0;
};

struct IterationDiag {
  std::uint64_t iter = 0;
  double accept_rate = 0.0;  // NaN in importance-sampling mode
  double msjd = 0.0;
  int carried_index = 0;          // candidate row carried into the next iteration
  Eigen::VectorXd weighted_sum;   // per-iteration weighted sum of the integrand
  Eigen::VectorXd mu;             // running estimate after this iteration
  Eigen::MatrixXd sigma;          // covariance recursion state after this iteration
  double trace_sigma = 0.0;
};

struct RunMeta {
  StreamKind stream = StreamKind::PseudoRandom;
  SamplerMode mode = SamplerMode::Sampling;
  AdaptMode adapt = AdaptMode::Off;
  TransitionKind transition = TransitionKind::Barker;
  KernelKind kernel = KernelKind::IndependentGaussian;
  std::string governing_listing;  // which algorithm variant shaped the loop
  std::uint64_t uniforms_per_iteration = 0;
  std::uint64_t uniforms_consumed = 0;
  std::uint64_t zero_mass_retries = 0;
  std::uint64_t resamples = 0;
  std::uint64_t frozen_iterations = 0;
  // Cleared when the run combines CUD driving with a position-dependent
  // kernel; the coupling argument behind the consistency theorem needs
  // proposals that ignore the carried sample.
  bool consistency_guaranteed = true;
  std::uint64_t config_hash = 0;
};

struct RunOutput {
  Eigen::MatrixXd samples;  // (L*M) x d in Sampling mode, 0 rows otherwise
  WeightedEstimate estimate;
  std::vector<IterationDiag> diagnostics;  // L rows
  RunMeta meta;
};

// Adaptation covariance as actually installed into the kernel: a relative
// ridge plus eigenvalue clamping into [1e-6, 1e6]. Exposed for tests.
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& sigma);

// One engine for all seven variants. The combination of config.mode,
// config.adapt and the stream kind selects the variant; the uniform
// consumption order is identical across them: per iteration, the kernel's
// batch uniforms first, then M (Sampling) or 1 (ImportanceSampling) index
// draws. The carried sample starts at x0 and always occupies candidate row 0.
RunOutput run_sampler(const SamplerConfig& config, const Target& target, const Kernel& kernel,
                      const Eigen::VectorXd& x0, DrivingSource source,
                      ThreadPool* pool = nullptr, const Integrand* integrand = nullptr);

// Runs one iteration from two different carried points with the same
// innovation tuple and reports whether the carried samples coincide after it.
// Meaningful for independent kernels, where the fresh candidate pools agree.
bool coupling_check(const SamplerConfig& config, const Target& target, const Kernel& kernel,
                    const std::vector<double>& u_iteration, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& x_prime);

}  // namespace mpqmc
