#include "mpqmc/samplers.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "mpqmc/mathutil.hpp"

namespace mpqmc {

namespace {

bool inside_box(const Eigen::VectorXd& x,
                const std::pair<Eigen::VectorXd, Eigen::VectorXd>& box) {
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < box.first[i] || x[i] > box.second[i]) return false;
  return true;
}

std::string listing_name(SamplerMode mode, AdaptMode adapt, bool cud) {
  if (mode == SamplerMode::Sampling) {
    if (cud) return "mp-qmcmc";
    return adapt == AdaptMode::Off ? "mp-mcmc" : "adaptive mp-mcmc";
  }
  if (cud) return adapt == AdaptMode::Off ? "is-mp-qmcmc" : "adaptive is-mp-qmcmc";
  return adapt == AdaptMode::Off ? "is-mp-mcmc" : "adaptive is-mp-mcmc";
}

std::uint64_t per_iteration_uniforms(const SamplerConfig& cfg, const Kernel& kernel) {
  const std::uint64_t batch = kernel.uniforms_per_batch(cfg.n_proposals);
  return batch + (cfg.mode == SamplerMode::Sampling ? cfg.m_per_iter : 1);
}

void validate(const SamplerConfig& cfg, const Target& target, const Kernel& kernel,
              const Eigen::VectorXd& x0, const DrivingSource& source,
              const Integrand* integrand) {
  const int d = target.dim();
  if (cfg.n_proposals < 1) fail(Errc::ConfigError, "need at least one proposal per iteration");
  if (cfg.iterations < 1) fail(Errc::ConfigError, "need at least one iteration");
  if (cfg.mode == SamplerMode::Sampling && cfg.m_per_iter < 1)
    fail(Errc::ConfigError, "sampling mode needs at least one accepted draw per iteration");
  if (x0.size() != d) fail(Errc::ConfigError, "start point dimension mismatch");
  if (kernel.dim() != d) fail(Errc::ConfigError, "kernel dimension mismatch");
  if (cfg.mode == SamplerMode::ImportanceSampling && cfg.transition != TransitionKind::Barker)
    fail(Errc::ConfigError,
         "importance sampling draws its carried index from the stationary weights");
  if (cfg.adapt != AdaptMode::Off) {
    if (!kernel.has_adaptable_cov())
      fail(Errc::ConfigError, "adaptation needs a kernel with a free covariance slot");
    if (cfg.adapt == AdaptMode::MeanAndCov && !kernel.is_independent())
      fail(Errc::ConfigError, "only the independent kernel carries an adaptable mean");
  }
  if (cfg.safeguards.bounded_jump_D) {
    if (!(*cfg.safeguards.bounded_jump_D > 0.0))
      fail(Errc::ConfigError, "bounded-jump radius must be positive");
    if (source.finite())
      fail(Errc::ConfigError, "bounded-jump resampling would shift the CUD tuple schedule");
  }
  if (cfg.safeguards.freeze_outside_K) {
    const auto& box = *cfg.safeguards.freeze_outside_K;
    if (box.first.size() != d || box.second.size() != d)
      fail(Errc::ConfigError, "freeze box dimension mismatch");
    if ((box.first.array() > box.second.array()).any())
      fail(Errc::ConfigError, "freeze box has lo > hi");
  }
  if (integrand && (integrand->out_dim < 1 || !integrand->fn))
    fail(Errc::ConfigError, "integrand needs a positive output dimension and a function");
  if (source.finite()) {
    if (cfg.mode == SamplerMode::Sampling && cfg.adapt != AdaptMode::Off)
      fail(Errc::ConfigError, "no sampling-mode listing adapts under a CUD stream");
    const std::uint64_t per = per_iteration_uniforms(cfg, kernel);
    if (source.tuple_width() != per) {
      std::ostringstream os;
      os << "schedule tuple width " << source.tuple_width()
         << " does not match the per-iteration consumption " << per;
      fail(Errc::ConfigError, os.str());
    }
    const std::uint64_t need = (cfg.burn_in + cfg.iterations) * per;
    const std::uint64_t cap = source.tuple_count() * source.tuple_width();
    if (source.consumed() + need > cap)
      fail(Errc::SequenceExhausted, "the schedule holds too few tuples for this run");
  }
}

std::uint64_t hash_config(const SamplerConfig& cfg, const Kernel& kernel, StreamKind stream,
                          int dim) {
  std::ostringstream os;
  os << cfg.n_proposals << '|' << cfg.m_per_iter << '|' << cfg.iterations << '|' << cfg.burn_in
     << '|' << sampler_mode_name(cfg.mode) << '|' << adapt_mode_name(cfg.adapt) << '|'
     << transition_kind_name(cfg.transition) << '|' << kernel_kind_name(kernel.kind()) << '|'
     << stream_kind_name(stream) << '|' << dim;
  if (cfg.safeguards.bounded_jump_D) os << "|D=" << *cfg.safeguards.bounded_jump_D;
  if (cfg.safeguards.freeze_outside_K) os << "|K";
  return fnv1a64(os.str());
}

}  // namespace

const char* sampler_mode_name(SamplerMode m) {
  return m == SamplerMode::Sampling ? "Sampling" : "ImportanceSampling";
}

const char* adapt_mode_name(AdaptMode m) {
  switch (m) {
    case AdaptMode::Off: return "off";
    case AdaptMode::Cov: return "cov";
    case AdaptMode::MeanAndCov: return "mean_and_cov";
  }
  return "?";
}

Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  Eigen::MatrixXd s = 0.5 * (sigma + sigma.transpose());
  s += (1e-8 * s.trace() / d) * Eigen::MatrixXd::Identity(d, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success)
    fail(Errc::NonSPDAdaptation, "eigendecomposition of the adapted covariance failed");
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(1e-6).cwiseMin(1e6);
  const Eigen::MatrixXd out =
      eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

RunOutput run_sampler(const SamplerConfig& cfg, const Target& target, const Kernel& kernel,
                      const Eigen::VectorXd& x0, DrivingSource source, ThreadPool* pool,
                      const Integrand* integrand) {
  validate(cfg, target, kernel, x0, source, integrand);

  const int d = target.dim();
  const int N = cfg.n_proposals;
  const int M = cfg.m_per_iter;
  const bool sampling = cfg.mode == SamplerMode::Sampling;
  const bool cud = source.finite();

  Integrand identity;
  if (!integrand) {
    identity.out_dim = d;
    identity.fn = [](const Eigen::VectorXd& v) { return v; };
    integrand = &identity;
  }

  Kernel k = kernel;
  const Kernel k_init = kernel;

  RunOutput out;
  out.meta.stream = source.stream_kind();
  out.meta.mode = cfg.mode;
  out.meta.adapt = cfg.adapt;
  out.meta.transition = cfg.transition;
  out.meta.kernel = kernel.kind();
  out.meta.governing_listing = listing_name(cfg.mode, cfg.adapt, cud);
  out.meta.uniforms_per_iteration = per_iteration_uniforms(cfg, kernel);
  out.meta.consistency_guaranteed = !cud || kernel.is_independent();
  out.meta.config_hash = hash_config(cfg, kernel, out.meta.stream, d);

  // Covariance recursion state. Adaptive runs count the kernel's initial
  // moments as one observation, the way the adaptive listings seed their
  // recursions; otherwise the first iteration provides the first term.
  Eigen::VectorXd mu_a;
  Eigen::MatrixXd sigma_a;
  std::uint64_t ell_a;
  if (cfg.adapt != AdaptMode::Off) {
    sigma_a = k.cov();
    mu_a = cfg.adapt == AdaptMode::MeanAndCov ? k.mean() : x0;
    ell_a = 1;
  } else {
    sigma_a = Eigen::MatrixXd::Zero(d, d);
    mu_a = Eigen::VectorXd::Zero(d);
    ell_a = 0;
  }

  Eigen::VectorXd mu_est = Eigen::VectorXd::Zero(integrand->out_dim);
  std::uint64_t ell_e = 0;

  Eigen::VectorXd x = x0;
  const std::uint64_t total_iters = cfg.burn_in + cfg.iterations;
  if (sampling) out.samples.resize(static_cast<Eigen::Index>(cfg.iterations) * M, d);
  out.diagnostics.reserve(cfg.iterations);

  std::vector<double> ubuf;
  Eigen::VectorXd lp(N + 1);

  for (std::uint64_t it = 0; it < total_iters; ++it) {
    const bool record = it >= cfg.burn_in;

    const Kernel* eff = &k;
    if (cfg.safeguards.freeze_outside_K && !inside_box(x, *cfg.safeguards.freeze_outside_K)) {
      eff = &k_init;
      ++out.meta.frozen_iterations;
    }
    const int nb = eff->uniforms_per_batch(N);
    ubuf.resize(nb);

    Eigen::MatrixXd pts;
    Eigen::VectorXd aux, lm, w;
    int attempts = 0;
    for (;;) {
      for (int i = 0; i < nb; ++i) ubuf[i] = source.next();
      pts = eff->propose_batch(x, ubuf.data(), N, &aux);

      if (cfg.safeguards.bounded_jump_D) {
        const double bound = *cfg.safeguards.bounded_jump_D;
        const MvNormal law = eff->law_at(aux.size() ? aux : x);
        int budget = 100;
        std::vector<double> ures(d);
        for (int i = 1; i <= N; ++i) {
          while ((pts.row(i).transpose() - x).norm() > bound) {
            if (--budget < 0)
              fail(Errc::ResampleBudgetExceeded,
                   "bounded-jump resampling used more than 100 draws in one iteration");
            for (int j = 0; j < d; ++j) {
              ures[j] = source.next();
              if (!(ures[j] > 0.0) || !(ures[j] < 1.0))
                fail(Errc::DegenerateTuple, "uniform outside the open unit interval");
            }
            pts.row(i) = law.map_uniforms(ures.data()).transpose();
            ++out.meta.resamples;
          }
        }
      }

      auto eval = [&](int i) { lp[i] = target.log_density(pts.row(i).transpose()); };
      if (pool) {
        pool->run(N + 1, eval);
      } else {
        for (int i = 0; i <= N; ++i) eval(i);
      }

      lm = lp + eff->log_kappa_all(pts, aux);
      try {
        w = stationary_weights(lm);
        break;
      } catch (const Error& e) {
        if (e.code() == Errc::AllZeroMass && !cud && attempts < 3) {
          ++attempts;
          ++out.meta.zero_mass_retries;
          continue;
        }
        throw;
      }
    }

    Eigen::VectorXd mu_tilde_f = Eigen::VectorXd::Zero(integrand->out_dim);
    Eigen::VectorXd mu_tilde_x = Eigen::VectorXd::Zero(d);
    for (int i = 0; i <= N; ++i) {
      const Eigen::VectorXd yi = pts.row(i).transpose();
      mu_tilde_f += w[i] * integrand->fn(yi);
      mu_tilde_x += w[i] * yi;
    }

    int carried_next = 0;
    double acc_rate = std::numeric_limits<double>::quiet_NaN();
    double msjd = 0.0;
    if (sampling) {
      // Barker selection ignores the current index, so the rank-one matrix
      // never needs materializing.
      const bool direct = cfg.transition == TransitionKind::Barker;
      Eigen::MatrixXd A;
      if (!direct) A = transition_matrix(cfg.transition, lm);
      int idx = 0;
      int moves = 0;
      for (int m = 0; m < M; ++m) {
        const double u = source.next();
        const int nidx = direct ? sample_index(w, u) : sample_index(A.row(idx).transpose(), u);
        if (record) out.samples.row((it - cfg.burn_in) * M + m) = pts.row(nidx);
        msjd += (pts.row(nidx) - pts.row(idx)).squaredNorm();
        if (nidx != idx) ++moves;
        idx = nidx;
      }
      carried_next = idx;
      acc_rate = static_cast<double>(moves) / M;
      msjd /= M;
      if (record) {
        ++ell_e;
        mu_est += (mu_tilde_f - mu_est) / static_cast<double>(ell_e);
      }
    } else {
      // The importance-sampling listings update the running means before the
      // index draw and the covariance after it; the mean update must not see
      // the new carried sample.
      if (record) {
        ++ell_e;
        mu_est += (mu_tilde_f - mu_est) / static_cast<double>(ell_e);
      }
      if (cfg.adapt != AdaptMode::Off)
        mu_a += (mu_tilde_x - mu_a) / static_cast<double>(ell_a + 1);
      const double u = source.next();
      carried_next = sample_index(w, u);
      msjd = (pts.row(carried_next).transpose() - x).squaredNorm();
    }

    if (sampling || cfg.adapt == AdaptMode::Off)
      mu_a += (mu_tilde_x - mu_a) / static_cast<double>(ell_a + 1);
    Eigen::MatrixXd sigma_tilde = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i <= N; ++i) {
      const Eigen::VectorXd c = pts.row(i).transpose() - mu_a;
      sigma_tilde.noalias() += w[i] * (c * c.transpose());
    }
    sigma_a += (sigma_tilde - sigma_a) / static_cast<double>(ell_a + 1);
    ++ell_a;
    if (cfg.adapt != AdaptMode::Off) {
      k.set_cov(regularize_covariance(sigma_a));
      if (cfg.adapt == AdaptMode::MeanAndCov) k.set_mean(mu_a);
    }

    x = pts.row(carried_next).transpose();

    if (record) {
      IterationDiag dg;
      dg.iter = it - cfg.burn_in;
      dg.accept_rate = acc_rate;
      dg.msjd = msjd;
      dg.carried_index = carried_next;
      dg.weighted_sum = mu_tilde_f;
      dg.mu = mu_est;
      dg.sigma = sigma_a;
      dg.trace_sigma = sigma_a.trace();
      out.diagnostics.push_back(std::move(dg));
    }
  }

  out.estimate.mu = std::move(mu_est);
  out.estimate.Sigma = std::move(sigma_a);
  out.estimate.ell = ell_e;
  out.meta.uniforms_consumed = source.consumed();
  return out;
}

bool coupling_check(const SamplerConfig& cfg, const Target& target, const Kernel& kernel,
                    const std::vector<double>& u_iteration, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& x_prime) {
  const int N = cfg.n_proposals;
  const std::size_t per = per_iteration_uniforms(cfg, kernel);
  if (u_iteration.size() != per)
    fail(Errc::ConfigError, "coupling check needs exactly one iteration of uniforms");

  auto step = [&](const Eigen::VectorXd& start) {
    Eigen::VectorXd aux;
    const Eigen::MatrixXd pts = kernel.propose_batch(start, u_iteration.data(), N, &aux);
    Eigen::VectorXd lp(N + 1);
    for (int i = 0; i <= N; ++i) lp[i] = target.log_density(pts.row(i).transpose());
    const Eigen::VectorXd lm = lp + kernel.log_kappa_all(pts, aux);
    const Eigen::VectorXd w = stationary_weights(lm);
    const double* uu = u_iteration.data() + kernel.uniforms_per_batch(N);
    int idx = 0;
    if (cfg.mode == SamplerMode::Sampling) {
      const bool direct = cfg.transition == TransitionKind::Barker;
      Eigen::MatrixXd A;
      if (!direct) A = transition_matrix(cfg.transition, lm);
      for (int m = 0; m < cfg.m_per_iter; ++m)
        idx = direct ? sample_index(w, uu[m]) : sample_index(A.row(idx).transpose(), uu[m]);
    } else {
      idx = sample_index(w, uu[0]);
    }
    return Eigen::VectorXd(pts.row(idx).transpose());
  };

  const Eigen::VectorXd a = step(x);
  const Eigen::VectorXd b = step(x_prime);
  for (int i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace mpqmc
