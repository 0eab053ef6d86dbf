#include "mpqmc/samplers.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mpqmc/mathutil.hpp"

using namespace mpqmc;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

TargetPtr std_normal_1d() {
  return gaussian_target(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
}

DrivingSource psr(std::uint64_t seed) { return DrivingSource(UniformStream::pseudo_random(seed)); }

// Variance of the run mean from B non-overlapping batch means.
double batch_means_var_of_mean(const std::vector<double>& xs, int n_batches) {
  const int b = static_cast<int>(xs.size()) / n_batches;
  double grand = 0.0;
  for (double x : xs) grand += x;
  grand /= static_cast<double>(n_batches) * b;
  double s2 = 0.0;
  for (int i = 0; i < n_batches; ++i) {
    double m = 0.0;
    for (int j = 0; j < b; ++j) m += xs[i * b + j];
    m = m / b - grand;
    s2 += m * m;
  }
  return s2 / (n_batches - 1) / n_batches;
}

// Target supported on a box, flat inside, impossible outside. Exists to
// drive the all-zero-mass recovery paths.
class BoxTarget final : public Target {
 public:
  BoxTarget(double lo, double hi) : lo_(lo), hi_(hi) {}
  int dim() const override { return 1; }
  double log_density(const Eigen::VectorXd& x) const override {
    return x[0] >= lo_ && x[0] <= hi_ ? 0.0 : -std::numeric_limits<double>::infinity();
  }

 private:
  double lo_, hi_;
};

}  // namespace

TEST_CASE("single-proposal peskun run is bitwise metropolis-hastings") {
  auto target = std_normal_1d();
  const double step = 0.8;
  Eigen::MatrixXd cov(1, 1);
  cov << step * step;
  auto kernel = Kernel::random_walk(cov);

  SamplerConfig cfg;
  cfg.n_proposals = 1;
  cfg.m_per_iter = 1;
  cfg.iterations = 2000;
  cfg.mode = SamplerMode::Sampling;
  cfg.transition = TransitionKind::Peskun;

  const Eigen::VectorXd x0 = vec1(1.3);
  RunOutput out = run_sampler(cfg, *target, kernel, x0, psr(42));
  REQUIRE(out.samples.rows() == 2000);

  // Hand-rolled Metropolis-Hastings on the same uniform stream. The index
  // draw convention u > 1 - alpha mirrors the cumulative-interval rule, so
  // the trajectories must agree bit for bit, not just statistically.
  auto s = UniformStream::pseudo_random(42);
  double x = 1.3;
  for (int i = 0; i < 2000; ++i) {
    const double u1 = s.next();
    const double y = x + step * gauss_inv_cdf(u1);
    const auto law_x = MvNormal::from_moments(vec1(x), cov);
    const auto law_y = MvNormal::from_moments(vec1(y), cov);
    const double lm0 = target->log_density(vec1(x)) + law_x.logpdf(vec1(y));
    const double lm1 = target->log_density(vec1(y)) + law_y.logpdf(vec1(x));
    const double alpha = std::min(1.0, std::exp(lm1 - lm0));
    const double u2 = s.next();
    if (u2 > 1.0 - alpha) x = y;
    CHECK(out.samples(i, 0) == x);
  }
  CHECK(out.meta.uniforms_consumed == 4000);
}

TEST_CASE("uniform consumption is exact for every mode and kernel shape") {
  Eigen::MatrixXd tcov(2, 2);
  tcov << 1.0, 0.2, 0.2, 0.8;
  auto target = gaussian_target(vec2(0.0, 0.0), tcov);

  SamplerConfig cfg;
  cfg.n_proposals = 3;
  cfg.m_per_iter = 2;
  cfg.iterations = 50;
  cfg.mode = SamplerMode::Sampling;

  auto rw = Kernel::random_walk(Eigen::MatrixXd::Identity(2, 2));
  RunOutput a = run_sampler(cfg, *target, rw, vec2(0.1, 0.1), psr(1));
  CHECK(a.meta.uniforms_per_iteration == 3 * 2 + 2);
  CHECK(a.meta.uniforms_consumed == 50 * 8);
  CHECK(a.samples.rows() == 100);
  CHECK(a.diagnostics.size() == 50);

  cfg.burn_in = 7;
  RunOutput b = run_sampler(cfg, *target, rw, vec2(0.1, 0.1), psr(1));
  CHECK(b.meta.uniforms_consumed == 57 * 8);
  CHECK(b.samples.rows() == 100);
  cfg.burn_in = 0;

  cfg.mode = SamplerMode::ImportanceSampling;
  cfg.transition = TransitionKind::Barker;
  RunOutput c = run_sampler(cfg, *target, rw, vec2(0.1, 0.1), psr(1));
  CHECK(c.meta.uniforms_per_iteration == 3 * 2 + 1);
  CHECK(c.meta.uniforms_consumed == 50 * 7);
  CHECK(c.samples.rows() == 0);
  CHECK(c.estimate.ell == 50);

  auto aux = Kernel::auxiliary_random_walk(Eigen::MatrixXd::Identity(2, 2));
  RunOutput d = run_sampler(cfg, *target, aux, vec2(0.1, 0.1), psr(1));
  CHECK(d.meta.uniforms_per_iteration == 4 * 2 + 1);
  CHECK(d.meta.uniforms_consumed == 50 * 9);
}

TEST_CASE("constant integrand is estimated exactly") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig cfg;
  cfg.n_proposals = 5;
  cfg.iterations = 321;
  cfg.mode = SamplerMode::ImportanceSampling;

  Integrand one{1, [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1); }};
  RunOutput out = run_sampler(cfg, *target, kernel, vec1(0.4), psr(5), nullptr, &one);
  CHECK(out.estimate.mu[0] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("importance estimate is the exact mean of the stored weighted sums") {
  Eigen::MatrixXd tcov(2, 2);
  tcov << 1.1, -0.3, -0.3, 0.6;
  auto target = gaussian_target(vec2(0.5, -0.5), tcov);
  auto kernel = Kernel::independent(vec2(0.0, 0.0), 2.0 * tcov);
  SamplerConfig cfg;
  cfg.n_proposals = 8;
  cfg.iterations = 200;
  cfg.mode = SamplerMode::ImportanceSampling;

  RunOutput out = run_sampler(cfg, *target, kernel, vec2(0.0, 0.0), psr(77));
  REQUIRE(out.diagnostics.size() == 200);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
  for (const auto& row : out.diagnostics) acc += row.weighted_sum;
  acc /= 200.0;
  CHECK((acc - out.estimate.mu).norm() < 1e-12 * (1.0 + acc.norm()));
  // The running trace in the diagnostics ends at the reported estimate.
  CHECK((out.diagnostics.back().mu - out.estimate.mu).norm() == 0.0);
}

TEST_CASE("runs are pure functions of config, target and stream") {
  Eigen::MatrixXd tcov(2, 2);
  tcov << 1.0, 0.4, 0.4, 1.2;
  auto target = gaussian_target(vec2(0.2, 0.1), tcov);
  auto kernel = Kernel::independent(vec2(0.0, 0.0), 2.0 * tcov);

  SamplerConfig cfg;
  cfg.n_proposals = 6;
  cfg.m_per_iter = 3;
  cfg.iterations = 120;
  cfg.mode = SamplerMode::Sampling;
  cfg.transition = TransitionKind::SuwaTodo;

  RunOutput a = run_sampler(cfg, *target, kernel, vec2(1.0, -1.0), psr(9));
  RunOutput b = run_sampler(cfg, *target, kernel, vec2(1.0, -1.0), psr(9));
  CHECK((a.samples - b.samples).norm() == 0.0);
  CHECK((a.estimate.mu - b.estimate.mu).norm() == 0.0);

  // Worker pools only fan out per-candidate density evaluation into disjoint
  // slots, so any pool size reproduces the single-threaded run bit for bit.
  ThreadPool pool3(3);
  ThreadPool pool1(1);
  RunOutput c = run_sampler(cfg, *target, kernel, vec2(1.0, -1.0), psr(9), &pool3);
  RunOutput d = run_sampler(cfg, *target, kernel, vec2(1.0, -1.0), psr(9), &pool1);
  CHECK((a.samples - c.samples).norm() == 0.0);
  CHECK((a.samples - d.samples).norm() == 0.0);
  CHECK((a.estimate.Sigma - c.estimate.Sigma).norm() == 0.0);
}

TEST_CASE("cud driven runs replay exactly and enforce schedule shape") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), 4.0 * Eigen::MatrixXd::Identity(1, 1));

  SamplerConfig cfg;
  cfg.n_proposals = 7;
  cfg.iterations = 200;
  cfg.mode = SamplerMode::ImportanceSampling;

  const auto base = build_lfsr_cud(14, 1);
  auto src = [&] { return DrivingSource(make_tuple_schedule(base, 8)); };
  RunOutput a = run_sampler(cfg, *target, kernel, vec1(0.0), src());
  RunOutput b = run_sampler(cfg, *target, kernel, vec1(0.0), src());
  CHECK((a.estimate.mu - b.estimate.mu).norm() == 0.0);
  CHECK(a.meta.stream == StreamKind::CudLfsr);
  CHECK(a.meta.consistency_guaranteed);
  CHECK(a.meta.uniforms_consumed == 200 * 8);

  // Width mismatch would silently break the tuple structure; refuse it.
  try {
    run_sampler(cfg, *target, kernel, vec1(0.0), DrivingSource(make_tuple_schedule(base, 9)));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigError);
  }

  // Asking for more iterations than the schedule holds fails up front.
  SamplerConfig big = cfg;
  big.iterations = 100000;
  try {
    run_sampler(big, *target, kernel, vec1(0.0), src());
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SequenceExhausted);
  }

  // Position-dependent kernels lose the coupling argument under CUD driving.
  auto rw = Kernel::random_walk(Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig scfg = cfg;
  scfg.mode = SamplerMode::Sampling;
  scfg.m_per_iter = 1;
  RunOutput c = run_sampler(scfg, *target, rw, vec1(0.0), src());
  CHECK_FALSE(c.meta.consistency_guaranteed);
}

TEST_CASE("governing listing reflects mode, adaptation and stream") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), Eigen::MatrixXd::Identity(1, 1));
  auto run_listing = [&](SamplerMode mode, AdaptMode adapt, bool cud) {
    SamplerConfig cfg;
    cfg.n_proposals = 3;
    cfg.iterations = 4;
    cfg.mode = mode;
    cfg.adapt = adapt;
    DrivingSource src = cud ? DrivingSource(make_tuple_schedule(build_lfsr_cud(12, 1), 4))
                            : psr(3);
    return run_sampler(cfg, *target, kernel, vec1(0.0), std::move(src)).meta.governing_listing;
  };
  CHECK(run_listing(SamplerMode::Sampling, AdaptMode::Off, false) == "mp-mcmc");
  CHECK(run_listing(SamplerMode::Sampling, AdaptMode::Cov, false) == "adaptive mp-mcmc");
  CHECK(run_listing(SamplerMode::ImportanceSampling, AdaptMode::Off, false) == "is-mp-mcmc");
  CHECK(run_listing(SamplerMode::ImportanceSampling, AdaptMode::MeanAndCov, false) ==
        "adaptive is-mp-mcmc");
  CHECK(run_listing(SamplerMode::Sampling, AdaptMode::Off, true) == "mp-qmcmc");
  CHECK(run_listing(SamplerMode::ImportanceSampling, AdaptMode::Off, true) == "is-mp-qmcmc");
  CHECK(run_listing(SamplerMode::ImportanceSampling, AdaptMode::Cov, true) ==
        "adaptive is-mp-qmcmc");
}

TEST_CASE("config validation rejects the combinations the theory rules out") {
  auto target = std_normal_1d();
  auto ind = Kernel::independent(vec1(0.0), Eigen::MatrixXd::Identity(1, 1));
  auto rw = Kernel::random_walk(Eigen::MatrixXd::Identity(1, 1));
  auto sm = Kernel::smmala(target, 1.0);

  SamplerConfig cfg;
  cfg.n_proposals = 2;
  cfg.iterations = 3;

  auto expect_config_error = [&](const SamplerConfig& c, const Kernel& k, DrivingSource src) {
    try {
      run_sampler(c, *target, k, vec1(0.0), std::move(src));
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ConfigError);
    }
  };

  SamplerConfig bad = cfg;
  bad.n_proposals = 0;
  expect_config_error(bad, ind, psr(1));

  bad = cfg;
  bad.mode = SamplerMode::ImportanceSampling;
  bad.transition = TransitionKind::SuwaTodo;
  expect_config_error(bad, ind, psr(1));

  bad = cfg;
  bad.adapt = AdaptMode::MeanAndCov;
  expect_config_error(bad, rw, psr(1));

  bad = cfg;
  bad.adapt = AdaptMode::Cov;
  expect_config_error(bad, sm, psr(1));

  bad = cfg;
  bad.safeguards.bounded_jump_D = 2.0;
  expect_config_error(bad, ind, DrivingSource(make_tuple_schedule(build_lfsr_cud(12, 1), 3)));

  // Adaptive sampling under CUD is not one of the seven variants.
  bad = cfg;
  bad.adapt = AdaptMode::Cov;
  expect_config_error(bad, ind, DrivingSource(make_tuple_schedule(build_lfsr_cud(12, 1), 3)));

  try {
    run_sampler(cfg, *target, ind, vec2(0.0, 0.0), psr(1));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigError);
  }
}

TEST_CASE("adaptive covariance converges to the target covariance") {
  Eigen::MatrixXd tcov(2, 2);
  tcov << 1.0, 0.3, 0.3, 0.5;
  auto target = gaussian_target(vec2(1.0, -2.0), tcov);
  auto kernel = Kernel::independent(vec2(0.0, 0.0), Eigen::MatrixXd::Identity(2, 2));

  SamplerConfig cfg;
  cfg.n_proposals = 50;
  cfg.iterations = 2000;
  cfg.mode = SamplerMode::ImportanceSampling;
  cfg.adapt = AdaptMode::MeanAndCov;

  RunOutput out = run_sampler(cfg, *target, kernel, vec2(0.0, 0.0), psr(2024));
  CHECK((out.estimate.Sigma - tcov).norm() / tcov.norm() < 0.05);
  CHECK((out.estimate.mu - vec2(1.0, -2.0)).norm() < 0.05);

  // The recursion caps the adaptation speed at C / ell.
  double worst = 0.0;
  for (std::size_t i = 1; i < out.diagnostics.size(); ++i) {
    const double inc = (out.diagnostics[i].sigma - out.diagnostics[i - 1].sigma).norm();
    worst = std::max(worst, inc * static_cast<double>(i + 1));
  }
  CHECK(worst < 1000.0 * tcov.norm());
}

TEST_CASE("bounded jump safeguard clips every accepted move") {
  auto target = std_normal_1d();
  auto kernel = Kernel::random_walk(4.0 * Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig cfg;
  cfg.n_proposals = 4;
  cfg.m_per_iter = 1;
  cfg.iterations = 500;
  cfg.safeguards.bounded_jump_D = 0.5;

  RunOutput out = run_sampler(cfg, *target, kernel, vec1(0.0), psr(31));
  CHECK(out.meta.resamples > 0);
  double prev = 0.0;
  for (int i = 0; i < out.samples.rows(); ++i) {
    CHECK(std::fabs(out.samples(i, 0) - prev) <= 0.5 + 1e-12);
    prev = out.samples(i, 0);
  }

  // An impossible radius exhausts the per-iteration resample budget.
  SamplerConfig tiny = cfg;
  tiny.safeguards.bounded_jump_D = 1e-9;
  try {
    run_sampler(tiny, *target, kernel, vec1(0.0), psr(31));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ResampleBudgetExceeded);
  }
}

TEST_CASE("freeze box swaps in the initial kernel outside the region") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig cfg;
  cfg.n_proposals = 4;
  cfg.iterations = 100;
  cfg.mode = SamplerMode::ImportanceSampling;
  cfg.adapt = AdaptMode::Cov;
  cfg.safeguards.freeze_outside_K = {vec1(-0.5), vec1(0.5)};

  RunOutput far = run_sampler(cfg, *target, kernel, vec1(7.0), psr(8));
  CHECK(far.meta.frozen_iterations > 0);

  cfg.safeguards.freeze_outside_K = {vec1(-1e6), vec1(1e6)};
  RunOutput near = run_sampler(cfg, *target, kernel, vec1(0.0), psr(8));
  CHECK(near.meta.frozen_iterations == 0);
}

TEST_CASE("all-zero-mass iterations retry under pseudo-random driving and abort under cud") {
  BoxTarget target(0.0, 0.05);
  auto kernel = Kernel::independent(vec1(0.025), Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig cfg;
  cfg.n_proposals = 8;
  cfg.iterations = 5;
  cfg.mode = SamplerMode::ImportanceSampling;

  bool saw_retry_success = false;
  bool saw_abort = false;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    try {
      RunOutput out = run_sampler(cfg, target, kernel, vec1(-3.0), psr(seed));
      if (out.meta.zero_mass_retries > 0) saw_retry_success = true;
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::AllZeroMass);
      saw_abort = true;
    }
    if (saw_retry_success && saw_abort) break;
  }
  CHECK(saw_retry_success);
  CHECK(saw_abort);

  // Under CUD the retry would desynchronize the schedule, so the run aborts
  // on the first zero-mass iteration.
  try {
    run_sampler(cfg, target, kernel, vec1(-3.0),
                DrivingSource(make_tuple_schedule(build_lfsr_cud(12, 1), 9)));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AllZeroMass);
  }
}

TEST_CASE("independent-kernel chains couple and stay coupled") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), 4.0 * Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig cfg;
  cfg.n_proposals = 3;
  cfg.m_per_iter = 1;
  cfg.iterations = 60;

  RunOutput a = run_sampler(cfg, *target, kernel, vec1(5.0), psr(121));
  RunOutput b = run_sampler(cfg, *target, kernel, vec1(-4.0), psr(121));

  int coupled_at = -1;
  for (std::size_t t = 0; t < a.diagnostics.size(); ++t) {
    if (a.diagnostics[t].carried_index >= 1 &&
        a.diagnostics[t].carried_index == b.diagnostics[t].carried_index) {
      coupled_at = static_cast<int>(t);
      break;
    }
  }
  REQUIRE(coupled_at >= 0);
  for (int t = coupled_at; t < 60; ++t) CHECK(a.samples(t, 0) == b.samples(t, 0));

  // One-iteration probe: same carried point trivially coincides.
  std::vector<double> u(4, 0.37);
  CHECK(coupling_check(cfg, *target, kernel, u, vec1(0.5), vec1(0.5)));
}

TEST_CASE("more accepted draws per iteration do not hurt the estimate") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), 4.0 * Eigen::MatrixXd::Identity(1, 1));

  int wins = 0;
  for (std::uint64_t rep = 1; rep <= 10; ++rep) {
    auto var_at = [&](int m) {
      SamplerConfig cfg;
      cfg.n_proposals = 8;
      cfg.m_per_iter = m;
      cfg.iterations = 256;
      RunOutput out = run_sampler(cfg, *target, kernel, vec1(0.0), psr(1000 + rep));
      std::vector<double> xs(out.samples.rows());
      for (int i = 0; i < out.samples.rows(); ++i) xs[i] = out.samples(i, 0);
      return batch_means_var_of_mean(xs, 32);
    };
    if (var_at(16 * 8) <= var_at(8)) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("importance weighting beats single-draw sampling on the same budget") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), 4.0 * Eigen::MatrixXd::Identity(1, 1));

  int wins = 0;
  for (std::uint64_t rep = 1; rep <= 10; ++rep) {
    SamplerConfig cfg;
    cfg.n_proposals = 8;
    cfg.m_per_iter = 1;
    cfg.iterations = 512;
    RunOutput samp = run_sampler(cfg, *target, kernel, vec1(0.0), psr(7000 + rep));
    std::vector<double> xs(samp.samples.rows());
    for (int i = 0; i < samp.samples.rows(); ++i) xs[i] = samp.samples(i, 0);
    const double var_samp = batch_means_var_of_mean(xs, 32);

    cfg.mode = SamplerMode::ImportanceSampling;
    RunOutput is = run_sampler(cfg, *target, kernel, vec1(0.0), psr(7000 + rep));
    std::vector<double> ws(is.diagnostics.size());
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i] = is.diagnostics[i].weighted_sum[0];
    const double var_is = batch_means_var_of_mean(ws, 32);
    if (var_is <= var_samp) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("long multiproposal run lands inside its own clt band") {
  auto target = std_normal_1d();
  auto kernel = Kernel::independent(vec1(0.0), 4.0 * Eigen::MatrixXd::Identity(1, 1));
  SamplerConfig cfg;
  cfg.n_proposals = 63;
  cfg.m_per_iter = 1;
  cfg.iterations = 16384;

  RunOutput out = run_sampler(cfg, *target, kernel, vec1(0.0), psr(606));
  std::vector<double> xs(out.samples.rows());
  double mean = 0.0;
  for (int i = 0; i < out.samples.rows(); ++i) {
    xs[i] = out.samples(i, 0);
    mean += xs[i];
  }
  mean /= static_cast<double>(xs.size());
  const double sd_mean = std::sqrt(batch_means_var_of_mean(xs, 64));
  CHECK(std::fabs(mean) < 4.0 * sd_mean);

  // Acceptance bookkeeping stays in range on a healthy run.
  double acc = 0.0;
  for (const auto& row : out.diagnostics) acc += row.accept_rate;
  acc /= static_cast<double>(out.diagnostics.size());
  CHECK(acc > 0.2);
  CHECK(acc <= 1.0);
}

TEST_CASE("covariance regularization clamps spectra into the allowed band") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 5.0, 0.0, 0.0, 1e-12;
  const Eigen::MatrixXd reg = regularize_covariance(sigma);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reg);
  CHECK(eig.eigenvalues().minCoeff() >= 1e-6);
  CHECK((reg - reg.transpose()).norm() == 0.0);

  Eigen::MatrixXd huge = 1e9 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2(regularize_covariance(huge));
  CHECK(eig2.eigenvalues().maxCoeff() <= 1e6 * 1.0001);

  Eigen::MatrixXd good(2, 2);
  good << 1.0, 0.2, 0.2, 0.9;
  CHECK((regularize_covariance(good) - good).norm() < 1e-7);
}
