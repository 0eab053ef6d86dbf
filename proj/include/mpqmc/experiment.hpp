#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mpqmc/proposals.hpp"
#include "mpqmc/samplers.hpp"
#include "mpqmc/targets.hpp"

namespace mpqmc {

// Everything an experiment needs to know about its inference problem: the
// posterior, the initial proposal kernel, the start point, and the reference
// mean (when one is known) that error metrics are computed against.
struct TargetBundle {
  TargetPtr target;
  Kernel kernel;
  Eigen::VectorXd x0;
  std::optional<Eigen::VectorXd> reference;
  std::string description;
};

// One algorithm variant: driving stream x estimator mode x adaptation.
struct VariantSpec {
  bool cud = false;
  SamplerMode mode = SamplerMode::Sampling;
  AdaptMode adapt = AdaptMode::Off;
  TransitionKind transition = TransitionKind::Barker;
  int m_per_iter = 1;
};

// The same naming scheme the sampler stamps into RunMeta.governing_listing,
// so CSV rows and run metadata agree on what ran.
std::string variant_label(const VariantSpec& v);

struct ExperimentPoint {
  int n_proposals = 1;
  std::uint64_t iterations = 1;
  unsigned register_size = 0;  // LFSR size for CUD variants, ignored otherwise
};

struct ExperimentCell {
  ExperimentPoint point;
  VariantSpec variant;
};

struct ExperimentSpec {
  std::string name;
  TargetBundle bundle;
  std::vector<ExperimentCell> cells;
  int replicates = 1;
  std::uint64_t seed0 = 1;
  std::string out_dir;  // empty: compute only, write nothing
  // Also write each replicate's per-iteration diagnostics under
  // out_dir/runs/. Off by default since big grids produce a lot of CSV.
  bool per_run_outputs = false;
};

// One row of metrics.csv. n is the total number of weighted proposals the
// cell consumed (iterations * (N+1) under importance sampling, recorded
// samples otherwise); rate-fit rows use n = 0 since they span the grid.
struct MetricRow {
  std::string experiment;
  std::uint64_t n = 0;
  int n_proposals = 0;
  std::string variant;
  std::string metric;
  double value = 0.0;
  std::optional<double> stderr_;
};

struct ExperimentResult {
  std::vector<MetricRow> rows;
  std::string metrics_csv;  // exact bytes written to metrics.csv
  std::string meta_json;    // exact bytes written to meta.json
};

// Runs every cell for every replicate seed seed0 + r, aggregates error
// metrics against the bundle reference, fits convergence rates per variant,
// and emits PSR-vs-CUD reduction factors where both flavours of a cell ran.
// Replicates execute in parallel on `workers` threads; results land in
// preallocated slots, so the output bytes do not depend on the worker count.
// A cell that throws is recorded as failed and the others proceed.
ExperimentResult run_experiment(const ExperimentSpec& spec, int workers = 1);

// Built-in experiment definitions, runnable by name from the CLI.
std::vector<std::string> preset_names();
ExperimentSpec make_preset(const std::string& name, const std::string& out_dir = "");

// The bundles behind the presets, exposed for tests that want to drive the
// sampler directly on the same problems.
TargetBundle gaussian1d_bundle();
TargetBundle zellner_bundle(int d, int n_obs, std::uint64_t data_seed);
TargetBundle lv_reduced_bundle();

// Negative inverse Hessian of the log density at x, by central finite
// differences, pushed through the usual SPD repair. Used to seed adaptive
// kernels near a mode.
Eigen::MatrixXd laplace_covariance(const Target& target, const Eigen::VectorXd& x,
                                   double rel_step = 1e-3);

// Reads an experiment description: [experiment] names a preset and may
// override replicates, seed0 and the output directory.
ExperimentSpec load_experiment_spec(const std::string& path);

// Entry point behind the mpqmc binary, exposed so tests can call it
// in-process. Returns 0 on success, 1 on configuration errors, 2 otherwise.
int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace mpqmc
