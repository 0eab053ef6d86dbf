#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "mpqmc/errors.hpp"
#include "mpqmc/samplers.hpp"

namespace mpqmc {

// Estimates of the same quantity from repeated independent runs, plus the
// known truth when one exists. All reductions below need at least two
// replicates (TooFewSamples) and equal dimensions across entries
// (ConfigError). Vector estimates are reduced by averaging the per-component
// metric, so in one dimension the familiar scalar formulas come back.
struct ReplicateSet {
  std::vector<Eigen::VectorXd> estimates;
  std::optional<Eigen::VectorXd> reference;
};

// Unbiased sample variance across replicates, averaged over components.
double empirical_variance(const ReplicateSet& s);

// Squared gap between the replicate mean and the reference. Throws
// NoReference when the set has no reference.
double squared_bias(const ReplicateSet& s);

// empirical_variance + squared_bias. Identical to the mean squared deviation
// from the reference up to the usual R/(R-1) factor on the variance term;
// both forms are exposed so plots can state which one they show.
double mse(const ReplicateSet& s);

// (1/R) sum_r |estimate_r - reference|^2 / d, the biased-variance flavour.
double mean_squared_deviation(const ReplicateSet& s);

// Ordinary least squares on log(metric) against log(n).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  // residual-based standard error of the slope
};

// points holds (n, metric) pairs. Needs at least three points
// (TooFewSamples) and strictly positive entries (NonPositiveMetric), since
// both axes are logged. An exact power law c * n^p comes back with
// slope == p at machine precision and zero standard error.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

// Fraction of index draws that moved off the current candidate. Defined for
// Sampling-mode runs only; importance-sampling output has no accept/reject
// step to speak of, so those runs throw WrongMode.
double acceptance_rate(const RunOutput& run);

// Mean squared jumping distance per recorded draw. In Sampling mode each
// draw's jump counts (the first draw of an iteration measures against the
// carried sample, which is the previous recorded draw, so the average over
// iterations equals the average over the whole trajectory). In
// importance-sampling mode the jump of the carried point is used.
double mean_msjd(const RunOutput& run);

// Batch-means estimate of the asymptotic variance of the sample mean,
// sigma^2 = lim n * Var(mean of n samples), averaged over components.
// Needs at least 10 samples per batch (TooFewSamples); any trailing
// remainder after cutting equal batches is dropped.
double asymptotic_variance_batch_means(const Eigen::MatrixXd& samples, int batch_count);

// Same, applied to a Sampling-mode run's recorded trajectory. Throws
// WrongMode for importance-sampling runs, which record no trajectory.
double asymptotic_variance_batch_means(const RunOutput& run, int batch_count);

// Reference posterior mean computed the expensive way: the given
// importance-sampling configuration is run once per replicate on its own
// full-period CUD schedule (replicate r seeds the register with r + 1, a
// cyclic shift of the period), and the replicate estimates are averaged.
struct GoldStandard {
  Eigen::VectorXd mean;
  Eigen::VectorXd se;  // standard error of the averaged mean, per component
  int replicates = 0;
  bool from_cache = false;
};

// cache_file, when non-empty, persists results as JSON keyed by a fingerprint
// of the configuration and cache_tag; a later call with the same key returns
// the stored value without rerunning. cache_tag names the target/dataset,
// which the configuration fingerprint cannot see.
GoldStandard gold_standard_mean(const SamplerConfig& config, const Target& target,
                                const Kernel& kernel, const Eigen::VectorXd& x0,
                                unsigned register_size, int replicates,
                                const std::string& cache_file = "",
                                const std::string& cache_tag = "");

}  // namespace mpqmc
