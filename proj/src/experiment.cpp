#include "mpqmc/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "mpqmc/config.hpp"
#include "mpqmc/csvio.hpp"
#include "mpqmc/diagnostics.hpp"
#include "mpqmc/discrepancy.hpp"
#include "mpqmc/driving.hpp"
#include "mpqmc/mathutil.hpp"
#include "mpqmc/parallel.hpp"

namespace fs = std::filesystem;

namespace mpqmc {

std::string variant_label(const VariantSpec& v) {
  if (v.mode == SamplerMode::Sampling) {
    if (v.cud) return "mp-qmcmc";
    return v.adapt == AdaptMode::Off ? "mp-mcmc" : "adaptive mp-mcmc";
  }
  if (v.cud) return v.adapt == AdaptMode::Off ? "is-mp-qmcmc" : "adaptive is-mp-qmcmc";
  return v.adapt == AdaptMode::Off ? "is-mp-mcmc" : "adaptive is-mp-mcmc";
}

namespace {

std::uint64_t weighted_proposals(const ExperimentCell& cell) {
  if (cell.variant.mode == SamplerMode::ImportanceSampling)
    return cell.point.iterations * static_cast<std::uint64_t>(cell.point.n_proposals + 1);
  return cell.point.iterations * static_cast<std::uint64_t>(cell.variant.m_per_iter);
}

std::size_t cell_tuple_width(const ExperimentCell& cell, const Kernel& kernel) {
  const int per_batch = kernel.uniforms_per_batch(cell.point.n_proposals);
  const int draws =
      cell.variant.mode == SamplerMode::Sampling ? cell.variant.m_per_iter : 1;
  return static_cast<std::size_t>(per_batch + draws);
}

// Tuples a width-w schedule of register size m can serve: the period is
// trimmed to a multiple of w and one starting tuple is prepended.
std::uint64_t cud_capacity(unsigned register_size, std::size_t width) {
  const std::uint64_t period = (std::uint64_t{1} << register_size) - 1;
  return (period / width) * width + 1;
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.name.empty()) fail(Errc::ConfigError, "experiment name is empty");
  if (spec.cells.empty()) fail(Errc::ConfigError, "experiment grid is empty");
  if (spec.replicates < 1) fail(Errc::ConfigError, "replicate count must be at least 1");
  if (!spec.bundle.target) fail(Errc::ConfigError, "experiment bundle has no target");
  const int d = spec.bundle.target->dim();
  if (spec.bundle.kernel.dim() != d || spec.bundle.x0.size() != d)
    fail(Errc::ConfigError, "bundle target, kernel and start point disagree on dimension");
  if (spec.bundle.reference && spec.bundle.reference->size() != d)
    fail(Errc::ConfigError, "bundle reference has the wrong dimension");

  const auto sizes = lfsr_table_sizes();
  for (std::size_t i = 0; i < spec.cells.size(); ++i) {
    const ExperimentCell& cell = spec.cells[i];
    const std::string at = "cell " + std::to_string(i) + " (" + variant_label(cell.variant) + ")";
    if (cell.point.n_proposals < 1 || cell.point.iterations < 1 ||
        cell.variant.m_per_iter < 1)
      fail(Errc::ConfigError, at + ": counts must be positive");
    if (!cell.variant.cud) continue;
    if (std::find(sizes.begin(), sizes.end(), cell.point.register_size) == sizes.end())
      fail(Errc::ConfigError, at + ": no embedded LFSR of size " +
                                  std::to_string(cell.point.register_size));
    const std::size_t width = cell_tuple_width(cell, spec.bundle.kernel);
    const std::uint64_t cap = cud_capacity(cell.point.register_size, width);
    if (cell.point.iterations > cap)
      fail(Errc::ConfigError,
           at + ": " + std::to_string(cell.point.iterations) + " iterations of width " +
               std::to_string(width) + " overrun the m=" +
               std::to_string(cell.point.register_size) + " schedule (capacity " +
               std::to_string(cap) + ")");
  }
}

SamplerConfig cell_config(const ExperimentCell& cell) {
  SamplerConfig cfg;
  cfg.n_proposals = cell.point.n_proposals;
  cfg.m_per_iter = cell.variant.m_per_iter;
  cfg.iterations = cell.point.iterations;
  cfg.mode = cell.variant.mode;
  cfg.transition = cell.variant.transition;
  cfg.adapt = cell.variant.adapt;
  return cfg;
}

struct ReplicateResult {
  bool ok = false;
  Eigen::VectorXd estimate;
  double accept = std::numeric_limits<double>::quiet_NaN();
  double msjd = 0.0;
  std::string error;
};

std::string diag_csv_body(const RunOutput& out) {
  std::string body = "iter,accept_rate,msjd,carried_index,trace_sigma\n";
  for (const auto& d : out.diagnostics) {
    body += std::to_string(d.iter) + ',' + csv_double(d.accept_rate) + ',' +
            csv_double(d.msjd) + ',' + std::to_string(d.carried_index) + ',' +
            csv_double(d.trace_sigma) + '\n';
  }
  return body;
}

ReplicateResult run_replicate(const ExperimentSpec& spec, const ExperimentCell& cell,
                              int replicate, const std::string& per_run_path) {
  ReplicateResult res;
  try {
    const SamplerConfig cfg = cell_config(cell);
    const std::uint64_t seed = spec.seed0 + static_cast<std::uint64_t>(replicate);
    DrivingSource source =
        cell.variant.cud
            ? DrivingSource(make_tuple_schedule(
                  build_lfsr_cud(cell.point.register_size, seed),
                  cell_tuple_width(cell, spec.bundle.kernel)))
            : DrivingSource(UniformStream::pseudo_random(seed));
    RunOutput out = run_sampler(cfg, *spec.bundle.target, spec.bundle.kernel, spec.bundle.x0,
                                std::move(source));
    res.estimate = cfg.mode == SamplerMode::ImportanceSampling
                       ? out.estimate.mu
                       : Eigen::VectorXd(out.samples.colwise().mean());
    res.msjd = mean_msjd(out);
    if (cfg.mode == SamplerMode::Sampling) res.accept = acceptance_rate(out);
    if (!per_run_path.empty()) write_text_file(per_run_path, diag_csv_body(out));
    res.ok = true;
  } catch (const Error& e) {
    res.error = e.what();
  }
  return res;
}

double sd_of(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (n - 1.0));
}

double mean_of(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  return mean / static_cast<double>(xs.size());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, int workers) {
  validate_spec(spec);
  if (workers < 1) fail(Errc::ConfigError, "worker count must be at least 1");

  const std::size_t n_cells = spec.cells.size();
  const std::size_t reps = static_cast<std::size_t>(spec.replicates);
  std::vector<ReplicateResult> slots(n_cells * reps);

  std::vector<std::string> per_run_paths(slots.size());
  if (spec.per_run_outputs && !spec.out_dir.empty()) {
    for (std::size_t c = 0; c < n_cells; ++c) {
      const fs::path dir = fs::path(spec.out_dir) / "runs" / ("cell" + std::to_string(c));
      fs::create_directories(dir);
      for (std::size_t r = 0; r < reps; ++r)
        per_run_paths[c * reps + r] = (dir / ("rep" + std::to_string(r) + ".csv")).string();
    }
  }

  ThreadPool pool(static_cast<std::size_t>(workers));
  pool.run(slots.size(), [&](std::size_t i) {
    const std::size_t c = i / reps;
    slots[i] = run_replicate(spec, spec.cells[c], static_cast<int>(i % reps),
                             per_run_paths[i]);
  });

  std::vector<MetricRow> rows;
  nlohmann::json errors = nlohmann::json::object();
  // Per-cell mse values, kept for the rate fits and reduction factors.
  std::vector<std::optional<double>> cell_mse(n_cells);

  for (std::size_t c = 0; c < n_cells; ++c) {
    const ExperimentCell& cell = spec.cells[c];
    const std::string label = variant_label(cell.variant);
    MetricRow base;
    base.experiment = spec.name;
    base.n = weighted_proposals(cell);
    base.n_proposals = cell.point.n_proposals;
    base.variant = label;

    std::string first_error;
    ReplicateSet set;
    set.reference = spec.bundle.reference;
    std::vector<double> accepts, msjds;
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicateResult& slot = slots[c * reps + r];
      if (!slot.ok) {
        if (first_error.empty()) first_error = slot.error;
        continue;
      }
      set.estimates.push_back(slot.estimate);
      if (!std::isnan(slot.accept)) accepts.push_back(slot.accept);
      msjds.push_back(slot.msjd);
    }
    if (!first_error.empty()) {
      errors["cell" + std::to_string(c) + ":" + label] = first_error;
      MetricRow row = base;
      row.metric = "failed";
      row.value = 1.0;
      rows.push_back(row);
      continue;
    }

    if (set.estimates.size() >= 2) {
      if (set.reference) {
        // The stderr column carries the replicate scatter of the squared
        // deviations, the natural error bar for an averaged-squared metric.
        std::vector<double> devs;
        const double d = static_cast<double>(set.estimates.front().size());
        for (const auto& e : set.estimates)
          devs.push_back((e - *set.reference).squaredNorm() / d);
        MetricRow row = base;
        row.metric = "mse";
        row.value = mse(set);
        row.stderr_ = sd_of(devs) / std::sqrt(static_cast<double>(devs.size()));
        cell_mse[c] = row.value;
        rows.push_back(row);
      }
      MetricRow row = base;
      row.metric = "var";
      row.value = empirical_variance(set);
      rows.push_back(row);
      if (set.reference) {
        MetricRow brow = base;
        brow.metric = "bias2";
        brow.value = squared_bias(set);
        rows.push_back(brow);
      }
    }
    if (!accepts.empty()) {
      MetricRow row = base;
      row.metric = "acceptance";
      row.value = mean_of(accepts);
      if (accepts.size() >= 2)
        row.stderr_ = sd_of(accepts) / std::sqrt(static_cast<double>(accepts.size()));
      rows.push_back(row);
    }
    if (!msjds.empty()) {
      MetricRow row = base;
      row.metric = "msjd";
      row.value = mean_of(msjds);
      if (msjds.size() >= 2)
        row.stderr_ = sd_of(msjds) / std::sqrt(static_cast<double>(msjds.size()));
      rows.push_back(row);
    }
  }

  // Convergence-rate fits, one per variant that produced at least three
  // positive mse points.
  std::vector<std::string> label_order;
  for (const auto& cell : spec.cells) {
    const std::string label = variant_label(cell.variant);
    if (std::find(label_order.begin(), label_order.end(), label) == label_order.end())
      label_order.push_back(label);
  }
  for (const std::string& label : label_order) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t c = 0; c < n_cells; ++c) {
      if (variant_label(spec.cells[c].variant) != label || !cell_mse[c]) continue;
      if (*cell_mse[c] > 0.0)
        pts.emplace_back(static_cast<double>(weighted_proposals(spec.cells[c])), *cell_mse[c]);
    }
    if (pts.size() < 3) continue;
    const RateFit fit = fit_rate(pts);
    MetricRow row;
    row.experiment = spec.name;
    row.variant = label;
    row.metric = "mse_rate";
    row.value = fit.slope;
    row.stderr_ = fit.slope_stderr;
    rows.push_back(row);
  }

  // CUD-vs-pseudo-random reduction factor wherever both flavours of the same
  // grid point ran to completion.
  for (std::size_t c = 0; c < n_cells; ++c) {
    const ExperimentCell& cell = spec.cells[c];
    if (!cell.variant.cud || !cell_mse[c] || *cell_mse[c] <= 0.0) continue;
    VariantSpec partner = cell.variant;
    partner.cud = false;
    for (std::size_t p = 0; p < n_cells; ++p) {
      const ExperimentCell& other = spec.cells[p];
      if (other.variant.cud || !cell_mse[p]) continue;
      if (other.point.n_proposals != cell.point.n_proposals ||
          other.point.iterations != cell.point.iterations)
        continue;
      if (variant_label(other.variant) != variant_label(partner) ||
          other.variant.transition != cell.variant.transition ||
          other.variant.m_per_iter != cell.variant.m_per_iter)
        continue;
      MetricRow row;
      row.experiment = spec.name;
      row.n = weighted_proposals(cell);
      row.n_proposals = cell.point.n_proposals;
      row.variant = variant_label(cell.variant);
      row.metric = "mse_reduction_vs_psr";
      row.value = *cell_mse[p] / *cell_mse[c];
      rows.push_back(row);
      break;
    }
  }

  // Serialize.
  std::string csv = "experiment,n,N,variant,metric,value,stderr\n";
  for (const auto& row : rows) {
    csv += csv_escape(row.experiment) + ',' + std::to_string(row.n) + ',' +
           std::to_string(row.n_proposals) + ',' + csv_escape(row.variant) + ',' +
           csv_escape(row.metric) + ',' + csv_double(row.value) + ',' +
           (row.stderr_ ? csv_double(*row.stderr_) : std::string()) + '\n';
  }

  nlohmann::json meta;
  meta["name"] = spec.name;
  meta["target"] = spec.bundle.description;
  meta["replicates"] = spec.replicates;
  meta["seed0"] = spec.seed0;
  nlohmann::json seeds = nlohmann::json::array();
  for (std::size_t r = 0; r < reps; ++r) seeds.push_back(spec.seed0 + r);
  meta["seeds"] = seeds;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : spec.cells) {
    cells.push_back({{"N", cell.point.n_proposals},
                     {"iterations", cell.point.iterations},
                     {"register_size", cell.point.register_size},
                     {"variant", variant_label(cell.variant)},
                     {"n", weighted_proposals(cell)}});
  }
  meta["cells"] = cells;
  meta["errors"] = errors;

  ExperimentResult result;
  result.rows = std::move(rows);
  result.metrics_csv = std::move(csv);
  result.meta_json = meta.dump(2) + "\n";
  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    write_text_file((fs::path(spec.out_dir) / "metrics.csv").string(), result.metrics_csv);
    write_text_file((fs::path(spec.out_dir) / "meta.json").string(), result.meta_json);
  }
  return result;
}

Eigen::MatrixXd laplace_covariance(const Target& target, const Eigen::VectorXd& x,
                                   double rel_step) {
  const int d = target.dim();
  if (x.size() != d) fail(Errc::ConfigError, "expansion point has the wrong dimension");
  if (!std::isfinite(target.log_density(x)))
    fail(Errc::ConfigError, "log density is not finite at the expansion point");

  Eigen::VectorXd h(d);
  for (int i = 0; i < d; ++i) h(i) = rel_step * std::max(std::abs(x(i)), 1.0);
  auto at = [&](int i, double si, int j, double sj) {
    Eigen::VectorXd p = x;
    p(i) += si * h(i);
    p(j) += sj * h(j);
    const double v = target.log_density(p);
    if (!std::isfinite(v))
      fail(Errc::ConfigError, "curvature probe stepped outside the support");
    return v;
  };

  const double f0 = target.log_density(x);
  Eigen::MatrixXd hess(d, d);
  for (int i = 0; i < d; ++i) {
    hess(i, i) = (at(i, 1, i, 0) - 2.0 * f0 + at(i, -1, i, 0)) / (h(i) * h(i));
    for (int j = i + 1; j < d; ++j) {
      const double v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) /
                       (4.0 * h(i) * h(j));
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  // Negative inverse curvature, clamped SPD in case the surface is flat or
  // bumpy along some direction at this point.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hess);
  Eigen::VectorXd ev = eig.eigenvalues();
  const double floor_ev = 1e-8 * std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  for (int i = 0; i < d; ++i) ev(i) = std::max(ev(i), floor_ev);
  const Eigen::MatrixXd prec =
      eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  return regularize_covariance(prec.inverse());
}

TargetBundle gaussian1d_bundle() {
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd kcov(1, 1);
  kcov << 2.4 * 2.4;
  return TargetBundle{gaussian_target(mean, cov), Kernel::independent(mean, kcov), mean, mean,
                      "standard normal, independence kernel sd 2.4"};
}

TargetBundle zellner_bundle(int d, int n_obs, std::uint64_t data_seed) {
  const RegressionData data = simulate_linreg(n_obs, d, data_seed, 1.0);
  TargetPtr target = zellner_linreg_target(data.X, data.y, 1.0, 100.0);
  const Eigen::VectorXd mean = target->analytic_mean();
  const Eigen::MatrixXd cov = target->analytic_cov();
  // Twice the posterior covariance keeps the importance weights tame while
  // the mean sits on the analytic posterior mean.
  return TargetBundle{target, Kernel::independent(mean, 2.0 * cov), mean, mean,
                      "g-prior linear regression, d=" + std::to_string(d) + ", n=" +
                          std::to_string(n_obs) + ", seed=" + std::to_string(data_seed)};
}

TargetBundle lv_reduced_bundle() {
  Eigen::VectorXd times(40);
  for (int k = 0; k < 40; ++k) times(k) = 0.25 * (k + 1);
  const OdeModel model = lotka_volterra_model(times);
  Eigen::VectorXd truth(4);
  truth << 1.8, 0.5, 2.5, 1.0;
  const Eigen::MatrixXd obs = simulate_ode(model, truth, 4242);
  TargetPtr target = ode_target(model, obs);
  const Eigen::MatrixXd kcov = laplace_covariance(*target, truth);
  return TargetBundle{target, Kernel::independent(truth, kcov), truth, std::nullopt,
                      "reduced Lotka-Volterra, 40 observations, seed 4242"};
}

namespace {

TargetBundle smoke_bundle() {
  Eigen::VectorXd mean(2);
  mean << 0.5, -0.25;
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.0, 0.0, 2.0;
  return TargetBundle{gaussian_target(mean, cov),
                      Kernel::independent(Eigen::VectorXd::Zero(2),
                                          2.0 * Eigen::MatrixXd::Identity(2, 2)),
                      Eigen::VectorXd::Zero(2), mean, "offset 2-d normal smoke target"};
}

VariantSpec variant(bool cud, SamplerMode mode, AdaptMode adapt,
                    TransitionKind transition = TransitionKind::Barker, int m = 1) {
  return VariantSpec{cud, mode, adapt, transition, m};
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"smoke", "gaussian1d", "zellner-d1", "zellner-d5", "lv-reduced"};
}

ExperimentSpec make_preset(const std::string& name, const std::string& out_dir) {
  using SM = SamplerMode;
  using AM = AdaptMode;
  if (name == "smoke") {
    ExperimentSpec spec{"smoke", smoke_bundle(), {}, 3, 7, out_dir};
    const ExperimentPoint pt{4, 40, 10};
    spec.cells = {
        {pt, variant(false, SM::Sampling, AM::Off)},
        {pt, variant(true, SM::Sampling, AM::Off)},
        {pt, variant(false, SM::ImportanceSampling, AM::Off)},
        {pt, variant(true, SM::ImportanceSampling, AM::Off)},
        {pt, variant(false, SM::ImportanceSampling, AM::MeanAndCov)},
        {pt, variant(false, SM::Sampling, AM::Cov)},
    };
    return spec;
  }
  if (name == "gaussian1d") {
    ExperimentSpec spec{"gaussian1d", gaussian1d_bundle(), {}, 25, 1, out_dir};
    const ExperimentPoint mh{1, 65535, 16};
    const ExperimentPoint mp{256, 256, 16};
    spec.cells = {
        {mh, variant(false, SM::Sampling, AM::Off, TransitionKind::Peskun)},
        {mh, variant(true, SM::Sampling, AM::Off, TransitionKind::Peskun)},
        {mp, variant(true, SM::ImportanceSampling, AM::Off)},
    };
    return spec;
  }
  if (name == "zellner-d1" || name == "zellner-d5") {
    const int d = name == "zellner-d1" ? 1 : 5;
    ExperimentSpec spec{name, zellner_bundle(d, 128, d == 1 ? 777 : 778), {}, 10, 1, out_dir};
    // Register size and proposal count grow together so each run consumes its
    // stream's entire tuple schedule (the near-zero tuple plus all T shifted
    // tuples). Stopping short of the full schedule leaves each tuple slot
    // covering only part of the register's period, which caps the quadrature
    // accuracy at dimension > 1 no matter how long the register is.
    const std::vector<std::pair<unsigned, int>> grid =
        d == 1 ? std::vector<std::pair<unsigned, int>>{{10, 1}, {11, 3}, {12, 7}, {13, 7}}
               : std::vector<std::pair<unsigned, int>>{{10, 3}, {11, 5}, {12, 7}, {13, 7}};
    for (const auto& [m, n_prop] : grid) {
      const std::uint64_t period = (std::uint64_t{1} << m) - 1;
      const std::size_t width = static_cast<std::size_t>(n_prop) * d + 1;
      const std::uint64_t iters = (period / width) * width + 1;
      const ExperimentPoint pt{n_prop, iters, m};
      spec.cells.push_back({pt, variant(false, SM::ImportanceSampling, AM::Off)});
      spec.cells.push_back({pt, variant(true, SM::ImportanceSampling, AM::Off)});
    }
    return spec;
  }
  if (name == "lv-reduced") {
    ExperimentSpec spec{"lv-reduced", lv_reduced_bundle(), {}, 10, 1, out_dir};
    const ExperimentPoint pt{64, 255, 16};
    spec.cells = {
        {pt, variant(false, SM::ImportanceSampling, AM::MeanAndCov)},
        {pt, variant(true, SM::ImportanceSampling, AM::MeanAndCov)},
    };
    return spec;
  }
  fail(Errc::ConfigError, "unknown preset '" + name + "'; available: " + [] {
    std::string all;
    for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
    return all;
  }());
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  const ConfigFile cf = ConfigFile::parse_file(path);
  const std::string preset = cf.get_string("experiment", "preset");
  ExperimentSpec spec = make_preset(preset, cf.get_string_or("experiment", "out", ""));
  spec.replicates =
      static_cast<int>(cf.get_number_or("experiment", "replicates", spec.replicates));
  spec.seed0 =
      static_cast<std::uint64_t>(cf.get_number_or("experiment", "seed0",
                                                  static_cast<double>(spec.seed0)));
  return spec;
}

// ---------------------------------------------------------------------------
// Command-line front end.

namespace {

Eigen::VectorXd to_vector(const std::vector<double>& xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v(static_cast<Eigen::Index>(i)) = xs[i];
  return v;
}

void require_register_size(unsigned m) {
  const auto sizes = lfsr_table_sizes();
  if (std::find(sizes.begin(), sizes.end(), m) == sizes.end())
    fail(Errc::ConfigError, "no embedded polynomial for m=" + std::to_string(m));
}

Eigen::MatrixXd diag_cov(const std::vector<double>& vars, const std::string& what) {
  for (double v : vars)
    if (!(v > 0.0)) fail(Errc::ConfigError, what + " entries must be positive");
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(vars.size(), vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) cov(i, i) = vars[i];
  return cov;
}

TargetPtr build_target(const ConfigFile& cf, Eigen::VectorXd& default_x0) {
  const std::string kind = cf.get_string("target", "kind");
  if (kind == "gaussian") {
    const Eigen::VectorXd mean = to_vector(cf.get_list("target", "mean"));
    const Eigen::MatrixXd cov = diag_cov(cf.get_list("target", "var"), "target.var");
    if (cov.rows() != mean.size())
      fail(Errc::ConfigError, "target.mean and target.var lengths differ");
    default_x0 = Eigen::VectorXd::Zero(mean.size());
    return gaussian_target(mean, cov);
  }
  if (kind == "zellner") {
    const int d = static_cast<int>(cf.get_number("target", "d"));
    const int n = static_cast<int>(cf.get_number_or("target", "n_obs", 128));
    const auto seed = static_cast<std::uint64_t>(cf.get_number_or("target", "seed", 777));
    const RegressionData data =
        simulate_linreg(n, d, seed, cf.get_number_or("target", "sigma2", 1.0));
    TargetPtr t = zellner_linreg_target(data.X, data.y, cf.get_number_or("target", "sigma2", 1.0),
                                        cf.get_number_or("target", "g", 100.0));
    default_x0 = t->analytic_mean();
    return t;
  }
  if (kind == "logistic") {
    const int d = static_cast<int>(cf.get_number("target", "d"));
    const int n = static_cast<int>(cf.get_number_or("target", "n_obs", 128));
    const auto seed = static_cast<std::uint64_t>(cf.get_number_or("target", "seed", 777));
    const RegressionData data = simulate_logistic(n, d, seed);
    default_x0 = Eigen::VectorXd::Zero(d);
    return logistic_target(data.X, data.y, cf.get_number_or("target", "alpha", 100.0));
  }
  if (kind == "lv" || kind == "fhn") {
    const int n = static_cast<int>(cf.get_number_or("target", "n_obs", 40));
    const double dt = cf.get_number_or("target", "dt", 0.25);
    Eigen::VectorXd times(n);
    for (int k = 0; k < n; ++k) times(k) = dt * (k + 1);
    const OdeModel model =
        kind == "lv" ? lotka_volterra_model(times) : fitzhugh_nagumo_model(times);
    Eigen::VectorXd truth;
    if (cf.has("target", "true_params")) {
      truth = to_vector(cf.get_list("target", "true_params"));
    } else if (kind == "lv") {
      truth = to_vector({1.8, 0.5, 2.5, 1.0});
    } else {
      truth = to_vector({0.5, 0.5, 1.5});
    }
    const auto seed = static_cast<std::uint64_t>(cf.get_number_or("target", "seed", 4242));
    const Eigen::MatrixXd obs = simulate_ode(model, truth, seed);
    default_x0 = truth;
    return ode_target(model, obs, cf.get_number_or("target", "prior_scale", 3.0));
  }
  fail(Errc::ConfigError, "unknown target.kind '" + kind + "'");
}

Kernel build_kernel(const ConfigFile& cf, const TargetPtr& target,
                    const Eigen::VectorXd& default_x0) {
  const int d = target->dim();
  const std::string kind = cf.get_string_or("kernel", "kind", "independent");
  std::vector<double> unit_vars(static_cast<std::size_t>(d), 1.0);
  if (kind == "independent") {
    const Eigen::VectorXd mean = cf.has("kernel", "mean")
                                     ? to_vector(cf.get_list("kernel", "mean"))
                                     : default_x0;
    const Eigen::MatrixXd cov =
        diag_cov(cf.has("kernel", "var") ? cf.get_list("kernel", "var") : unit_vars,
                 "kernel.var");
    if (mean.size() != d || cov.rows() != d)
      fail(Errc::ConfigError, "kernel moments do not match the target dimension");
    return Kernel::independent(mean, cov);
  }
  if (kind == "random-walk" || kind == "aux-random-walk") {
    const Eigen::MatrixXd cov =
        diag_cov(cf.has("kernel", "var") ? cf.get_list("kernel", "var") : unit_vars,
                 "kernel.var");
    if (cov.rows() != d) fail(Errc::ConfigError, "kernel.var does not match the target dimension");
    return kind == "random-walk" ? Kernel::random_walk(cov) : Kernel::auxiliary_random_walk(cov);
  }
  if (kind == "smmala" || kind == "aux-smmala") {
    const double eps = cf.get_number_or("kernel", "eps", 1.0);
    return kind == "smmala" ? Kernel::smmala(target, eps) : Kernel::auxiliary_smmala(target, eps);
  }
  fail(Errc::ConfigError, "unknown kernel.kind '" + kind + "'");
}

SamplerConfig build_sampler_config(const ConfigFile& cf, int dim) {
  SamplerConfig cfg;
  cfg.n_proposals = static_cast<int>(cf.get_number_or("sampler", "n_proposals", 1));
  cfg.m_per_iter = static_cast<int>(cf.get_number_or("sampler", "m_per_iter", 1));
  cfg.iterations = static_cast<std::uint64_t>(cf.get_number_or("sampler", "iterations", 1000));
  cfg.burn_in = static_cast<std::uint64_t>(cf.get_number_or("sampler", "burn_in", 0));

  const std::string mode = cf.get_string_or("sampler", "mode", "sampling");
  if (mode == "sampling") cfg.mode = SamplerMode::Sampling;
  else if (mode == "is") cfg.mode = SamplerMode::ImportanceSampling;
  else fail(Errc::ConfigError, "sampler.mode must be \"sampling\" or \"is\"");

  const std::string tr = cf.get_string_or("sampler", "transition", "barker");
  if (tr == "barker") cfg.transition = TransitionKind::Barker;
  else if (tr == "peskun") cfg.transition = TransitionKind::Peskun;
  else if (tr == "suwa-todo") cfg.transition = TransitionKind::SuwaTodo;
  else if (tr == "tjelmeland") cfg.transition = TransitionKind::Tjelmeland;
  else fail(Errc::ConfigError, "unknown sampler.transition '" + tr + "'");

  const std::string adapt = cf.get_string_or("sampler", "adapt", "off");
  if (adapt == "off") cfg.adapt = AdaptMode::Off;
  else if (adapt == "cov") cfg.adapt = AdaptMode::Cov;
  else if (adapt == "mean-cov") cfg.adapt = AdaptMode::MeanAndCov;
  else fail(Errc::ConfigError, "unknown sampler.adapt '" + adapt + "'");

  if (cf.has("sampler", "bounded_jump_D"))
    cfg.safeguards.bounded_jump_D = cf.get_number("sampler", "bounded_jump_D");
  if (cf.has("sampler", "freeze_lo") || cf.has("sampler", "freeze_hi")) {
    const Eigen::VectorXd lo = to_vector(cf.get_list("sampler", "freeze_lo"));
    const Eigen::VectorXd hi = to_vector(cf.get_list("sampler", "freeze_hi"));
    if (lo.size() != dim || hi.size() != dim)
      fail(Errc::ConfigError, "freeze box does not match the target dimension");
    cfg.safeguards.freeze_outside_K = std::make_pair(lo, hi);
  }
  return cfg;
}

DrivingSource build_driving(const ConfigFile& cf, const Kernel& kernel,
                            const SamplerConfig& cfg) {
  const std::string kind = cf.get_string_or("driving", "kind", "psr");
  const auto seed = static_cast<std::uint64_t>(cf.get_number_or("driving", "seed", 1));
  if (kind == "psr") return DrivingSource(UniformStream::pseudo_random(seed));
  if (kind == "cud") {
    const auto m = static_cast<unsigned>(cf.get_number_or("driving", "register_size", 16));
    require_register_size(m);
    const std::size_t width =
        static_cast<std::size_t>(kernel.uniforms_per_batch(cfg.n_proposals) +
                                 (cfg.mode == SamplerMode::Sampling ? cfg.m_per_iter : 1));
    return DrivingSource(make_tuple_schedule(build_lfsr_cud(m, seed), width));
  }
  fail(Errc::ConfigError, "driving.kind must be \"psr\" or \"cud\"");
}

std::string resolve_out(const std::string& path) {
  if (path.empty()) return path;
  const char* root = std::getenv("MPQMC_OUT_ROOT");
  if (!root || !*root || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

int default_workers() {
  if (const char* env = std::getenv("MPQMC_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::string json_vector(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += csv_double(v(i));
  }
  return s + "]";
}

void cmd_sample(const std::string& config_path, const std::string& out_dir, int workers) {
  const ConfigFile cf = ConfigFile::parse_file(config_path);
  Eigen::VectorXd x0;
  TargetPtr target = build_target(cf, x0);
  const Kernel kernel = build_kernel(cf, target, x0);
  if (cf.has("sampler", "x0")) x0 = to_vector(cf.get_list("sampler", "x0"));
  if (x0.size() != target->dim())
    fail(Errc::ConfigError, "sampler.x0 does not match the target dimension");
  const SamplerConfig cfg = build_sampler_config(cf, target->dim());
  DrivingSource source = build_driving(cf, kernel, cfg);

  ThreadPool pool(static_cast<std::size_t>(workers));
  const RunOutput out = run_sampler(cfg, *target, kernel, x0, std::move(source), &pool);

  fs::create_directories(out_dir);
  if (out.samples.rows() > 0) {
    std::string body;
    for (Eigen::Index j = 0; j < out.samples.cols(); ++j)
      body += (j ? "," : "") + ("x" + std::to_string(j));
    body += '\n';
    for (Eigen::Index i = 0; i < out.samples.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.samples.cols(); ++j)
        body += (j ? "," : "") + csv_double(out.samples(i, j));
      body += '\n';
    }
    write_text_file((fs::path(out_dir) / "samples.csv").string(), body);
    std::cout << "wrote " << (fs::path(out_dir) / "samples.csv").string() << " ("
              << out.samples.rows() << " rows)\n";
  }
  write_text_file((fs::path(out_dir) / "diagnostics.csv").string(), diag_csv_body(out));

  nlohmann::json meta;
  meta["config"] = config_path;
  meta["listing"] = out.meta.governing_listing;
  meta["stream"] = stream_kind_name(out.meta.stream);
  meta["transition"] = transition_kind_name(out.meta.transition);
  meta["kernel"] = kernel_kind_name(out.meta.kernel);
  meta["uniforms_per_iteration"] = out.meta.uniforms_per_iteration;
  meta["uniforms_consumed"] = out.meta.uniforms_consumed;
  meta["zero_mass_retries"] = out.meta.zero_mass_retries;
  meta["resamples"] = out.meta.resamples;
  meta["frozen_iterations"] = out.meta.frozen_iterations;
  meta["consistency_guaranteed"] = out.meta.consistency_guaranteed;
  meta["config_hash"] = out.meta.config_hash;
  meta["estimate_mu"] = json_vector(out.estimate.mu);
  meta["estimate_ell"] = out.estimate.ell;
  if (out.estimate.Sigma.size()) meta["estimate_trace_sigma"] = csv_double(out.estimate.Sigma.trace());
  write_text_file((fs::path(out_dir) / "meta.json").string(), meta.dump(2) + "\n");
  std::cout << "wrote " << (fs::path(out_dir) / "diagnostics.csv").string() << " and meta.json\n";
  std::cout << "estimate " << json_vector(out.estimate.mu) << " from " << out.estimate.ell
            << " iterations\n";
}

void cmd_cud_gen(unsigned m, std::uint64_t seed, std::uint64_t count, const std::string& out) {
  require_register_size(m);
  UniformStream stream = build_lfsr_cud(m, seed);
  const std::uint64_t total = count == 0 ? stream.length() : count;
  if (total > stream.length())
    fail(Errc::ConfigError, "count exceeds the m=" + std::to_string(m) + " period of " +
                                std::to_string(stream.length()));
  std::string body;
  for (std::uint64_t i = 0; i < total; ++i) body += csv_double(stream.next()) + '\n';
  if (out.empty()) {
    std::cout << body;
  } else {
    write_text_file(out, body);
    std::cout << "wrote " << total << " values to " << out << "\n";
  }
}

void cmd_cud_check(unsigned only_m) {
  if (only_m != 0) require_register_size(only_m);
  const auto sizes = lfsr_table_sizes();
  for (unsigned m : sizes) {
    if (only_m != 0 && m != only_m) continue;
    UniformStream stream = build_lfsr_cud(m, 1);
    const std::uint64_t expect = (std::uint64_t{1} << m) - 1;
    // A broken table is an internal defect, not a usage error.
    if (stream.length() != expect)
      throw std::runtime_error("m=" + std::to_string(m) + " period " +
                               std::to_string(stream.length()) + ", expected " +
                               std::to_string(expect));
    std::vector<double> values = stream.values();
    for (double v : values)
      if (!(v > 0.0 && v < 1.0))
        throw std::runtime_error("m=" + std::to_string(m) + " emits values outside (0,1)");
    std::sort(values.begin(), values.end());
    if (std::adjacent_find(values.begin(), values.end()) != values.end())
      throw std::runtime_error("m=" + std::to_string(m) + " revisits a state inside one period");

    // Two-dimensional uniformity of non-overlapping pairs, on a prefix small
    // enough for the exact computation.
    const std::size_t take = std::min<std::size_t>(stream.values().size(), 4096);
    const std::vector<double> prefix(stream.values().begin(),
                                     stream.values().begin() + take);
    const PointSet pairs = nonoverlapping_tuples(prefix, 2);
    const double dstar = star_discrepancy(pairs);
    std::cout << "m=" << m << " period=" << stream.length() << " distinct=yes pair-D*=" << dstar
              << " (first " << pairs.size() << " pairs)\n";
  }
}

void cmd_report(const std::string& dir) {
  const auto records = read_csv((fs::path(dir) / "metrics.csv").string());
  if (records.size() < 2) {
    std::cout << "no metric rows in " << dir << "\n";
    return;
  }
  // Columns: experiment,n,N,variant,metric,value,stderr.
  std::vector<std::string> variants;
  std::vector<std::string> ns;
  std::map<std::string, std::map<std::string, std::string>> mse_cell;  // n -> variant -> value
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.size() < 7) continue;
    if (std::find(variants.begin(), variants.end(), r[3]) == variants.end())
      variants.push_back(r[3]);
    if (r[4] == "mse") {
      if (std::find(ns.begin(), ns.end(), r[1]) == ns.end()) ns.push_back(r[1]);
      mse_cell[r[1]][r[3]] = r[6].empty() ? r[5] : r[5] + " (se " + r[6] + ")";
    }
  }
  auto print_padded = [](const std::string& s, std::size_t w) {
    std::cout << s;
    for (std::size_t i = s.size(); i < w; ++i) std::cout << ' ';
  };
  if (!ns.empty()) {
    std::cout << "mse by sample budget and variant\n";
    print_padded("n", 10);
    for (const auto& v : variants) print_padded(v, 54);
    std::cout << "\n";
    for (const auto& n : ns) {
      print_padded(n, 10);
      for (const auto& v : variants) {
        auto it = mse_cell[n].find(v);
        print_padded(it == mse_cell[n].end() ? "-" : it->second, 54);
      }
      std::cout << "\n";
    }
    std::cout << "\n";
  }
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.size() < 7 || (r[4] != "mse_rate" && r[4] != "mse_reduction_vs_psr" &&
                         r[4] != "acceptance" && r[4] != "failed"))
      continue;
    std::cout << r[4] << "  " << r[3];
    if (r[1] != "0") std::cout << "  n=" << r[1];
    std::cout << "  " << r[5];
    if (!r[6].empty()) std::cout << " (se " << r[6] << ")";
    std::cout << "\n";
  }
}

int cli_impl(int argc, const char* const* argv) {
  CLI::App app{"multiple-proposal MCMC sampling toolkit"};
  app.require_subcommand(1);

  auto* cud = app.add_subcommand("cud", "shift-register uniform sequences");
  cud->require_subcommand(1);
  unsigned gen_m = 10;
  std::uint64_t gen_seed = 1, gen_count = 0;
  std::string gen_out;
  auto* gen = cud->add_subcommand("gen", "emit a sequence");
  gen->add_option("--m", gen_m, "register size (10..20)");
  gen->add_option("--seed", gen_seed, "starting-state seed");
  gen->add_option("--count", gen_count, "values to emit, 0 = full period");
  gen->add_option("--out", gen_out, "output file, default stdout");
  gen->callback([&] { cmd_cud_gen(gen_m, gen_seed, gen_count, gen_out); });

  unsigned check_m = 0;
  auto* check = cud->add_subcommand("check", "verify period and pair uniformity");
  check->add_option("--m", check_m, "single register size, default all");
  check->callback([&] { cmd_cud_check(check_m); });

  std::string sample_config, sample_out = ".";
  int workers = default_workers();
  auto* sample = app.add_subcommand("sample", "run one sampler configuration");
  sample->add_option("--config", sample_config, "TOML run description")->required();
  sample->add_option("--out", sample_out, "output directory");
  sample->add_option("--workers", workers, "likelihood fan-out threads");
  sample->callback([&] { cmd_sample(sample_config, resolve_out(sample_out), workers); });

  std::string exp_preset, exp_spec, exp_out;
  int exp_reps = 0;
  std::uint64_t exp_seed0 = 0;
  bool per_run = false;
  auto* experiment = app.add_subcommand("experiment", "run a replicate grid");
  experiment->add_option("--preset", exp_preset, "built-in experiment name");
  experiment->add_option("--spec", exp_spec, "TOML experiment description");
  experiment->add_option("--out", exp_out, "output directory");
  experiment->add_option("--workers", workers, "replicate-level threads");
  experiment->add_option("--replicates", exp_reps, "override replicate count");
  experiment->add_option("--seed0", exp_seed0, "override base seed");
  experiment->add_flag("--per-run", per_run, "keep per-replicate diagnostics CSVs");
  experiment->callback([&] {
    if (exp_preset.empty() == exp_spec.empty())
      fail(Errc::ConfigError, "give exactly one of --preset and --spec");
    ExperimentSpec spec =
        exp_preset.empty() ? load_experiment_spec(exp_spec) : make_preset(exp_preset);
    if (!exp_out.empty()) spec.out_dir = exp_out;
    if (spec.out_dir.empty()) spec.out_dir = "runs/" + spec.name;
    spec.out_dir = resolve_out(spec.out_dir);
    if (exp_reps > 0) spec.replicates = exp_reps;
    if (exp_seed0 > 0) spec.seed0 = exp_seed0;
    spec.per_run_outputs = per_run;
    const ExperimentResult result = run_experiment(spec, workers);
    std::cout << "wrote " << (fs::path(spec.out_dir) / "metrics.csv").string() << " ("
              << result.rows.size() << " rows)\n";
  });

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize an experiment directory");
  report->add_option("--dir", report_dir, "experiment output directory")->required();
  report->callback([&] { cmd_report(report_dir); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: ConfigError: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv) { return cli_impl(argc, argv); }

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("mpqmc");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_impl(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mpqmc
