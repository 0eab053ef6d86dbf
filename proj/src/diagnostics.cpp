#include "mpqmc/diagnostics.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpqmc/driving.hpp"
#include "mpqmc/mathutil.hpp"

namespace mpqmc {

namespace {

void check_set(const ReplicateSet& s, bool needs_reference) {
  if (s.estimates.size() < 2) fail(Errc::TooFewSamples, "need at least two replicates");
  const Eigen::Index d = s.estimates.front().size();
  for (const auto& e : s.estimates)
    if (e.size() != d) fail(Errc::ConfigError, "replicate estimates have mixed dimensions");
  if (needs_reference && !s.reference)
    fail(Errc::NoReference, "this reduction needs a reference value");
  if (s.reference && s.reference->size() != d)
    fail(Errc::ConfigError, "reference dimension does not match the estimates");
}

Eigen::VectorXd replicate_mean(const ReplicateSet& s) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(s.estimates.front().size());
  for (const auto& e : s.estimates) m += e;
  return m / static_cast<double>(s.estimates.size());
}

}  // namespace

double empirical_variance(const ReplicateSet& s) {
  check_set(s, false);
  const double r = static_cast<double>(s.estimates.size());
  const Eigen::VectorXd m = replicate_mean(s);
  double acc = 0.0;
  for (const auto& e : s.estimates) acc += (e - m).squaredNorm();
  return acc / ((r - 1.0) * static_cast<double>(m.size()));
}

double squared_bias(const ReplicateSet& s) {
  check_set(s, true);
  const Eigen::VectorXd m = replicate_mean(s);
  return (m - *s.reference).squaredNorm() / static_cast<double>(m.size());
}

double mse(const ReplicateSet& s) { return empirical_variance(s) + squared_bias(s); }

double mean_squared_deviation(const ReplicateSet& s) {
  check_set(s, true);
  const double r = static_cast<double>(s.estimates.size());
  double acc = 0.0;
  for (const auto& e : s.estimates) acc += (e - *s.reference).squaredNorm();
  return acc / (r * static_cast<double>(s.reference->size()));
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) fail(Errc::TooFewSamples, "rate fits need at least three points");
  const double k = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0) || !(v > 0.0))
      fail(Errc::NonPositiveMetric, "log-log fit needs positive sizes and metrics");
    sx += std::log(n);
    sy += std::log(v);
  }
  const double xbar = sx / k, ybar = sy / k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, v] : points) {
    const double dx = std::log(n) - xbar;
    sxx += dx * dx;
    sxy += dx * (std::log(v) - ybar);
  }
  if (sxx == 0.0) fail(Errc::ConfigError, "all sample sizes coincide, the slope is undefined");

  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  double rss = 0.0;
  for (const auto& [n, v] : points) {
    const double resid = std::log(v) - f.intercept - f.slope * std::log(n);
    rss += resid * resid;
  }
  f.slope_stderr = std::sqrt(rss / (k - 2.0) / sxx);
  return f;
}

double acceptance_rate(const RunOutput& run) {
  if (run.meta.mode == SamplerMode::ImportanceSampling)
    fail(Errc::WrongMode, "importance-sampling runs have no accept/reject step");
  if (run.diagnostics.empty()) fail(Errc::TooFewSamples, "run recorded no iterations");
  double acc = 0.0;
  for (const auto& d : run.diagnostics) acc += d.accept_rate;
  return acc / static_cast<double>(run.diagnostics.size());
}

double mean_msjd(const RunOutput& run) {
  if (run.diagnostics.empty()) fail(Errc::TooFewSamples, "run recorded no iterations");
  double acc = 0.0;
  for (const auto& d : run.diagnostics) acc += d.msjd;
  return acc / static_cast<double>(run.diagnostics.size());
}

double asymptotic_variance_batch_means(const Eigen::MatrixXd& samples, int batch_count) {
  if (batch_count < 2) fail(Errc::ConfigError, "batch means need at least two batches");
  const Eigen::Index n = samples.rows();
  if (n < 10 * static_cast<Eigen::Index>(batch_count))
    fail(Errc::TooFewSamples, "need at least ten samples per batch");

  const Eigen::Index b = n / batch_count;
  double total = 0.0;
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    Eigen::VectorXd means(batch_count);
    for (int i = 0; i < batch_count; ++i) means(i) = samples.col(c).segment(i * b, b).mean();
    const double grand = means.mean();
    const double s2 = (means.array() - grand).square().sum() / (batch_count - 1.0);
    total += static_cast<double>(b) * s2;
  }
  return total / static_cast<double>(samples.cols());
}

double asymptotic_variance_batch_means(const RunOutput& run, int batch_count) {
  if (run.meta.mode == SamplerMode::ImportanceSampling || run.samples.rows() == 0)
    fail(Errc::WrongMode, "batch means work on a recorded trajectory");
  return asymptotic_variance_batch_means(run.samples, batch_count);
}

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void append_matrix(std::ostringstream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << '|' << format_double(m(i, j));
}

std::string gold_cache_key(const SamplerConfig& config, const Kernel& kernel,
                           const Eigen::VectorXd& x0, unsigned register_size, int replicates,
                           const std::string& tag) {
  std::ostringstream os;
  os << tag << '|' << config.n_proposals << '|' << config.m_per_iter << '|' << config.iterations
     << '|' << config.burn_in << '|' << sampler_mode_name(config.mode) << '|'
     << adapt_mode_name(config.adapt) << '|' << transition_kind_name(config.transition) << '|'
     << kernel_kind_name(kernel.kind()) << '|' << kernel.dim() << '|' << register_size << '|'
     << replicates;
  append_matrix(os, x0);
  if (kernel.is_independent()) append_matrix(os, kernel.mean());
  if (kernel.has_adaptable_cov()) append_matrix(os, kernel.cov());
  os << '|' << format_double(kernel.eps());
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(os.str())));
  return hex;
}

nlohmann::json load_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) return nlohmann::json::object();
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    fail(Errc::IoError, "gold-standard cache " + path + " is not a JSON object");
  return j;
}

// Doubles go through the cache as %.17g strings, which round-trip exactly and
// keep the file diffable against logged values.
nlohmann::json encode_vector(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(format_double(v(i)));
  return arr;
}

Eigen::VectorXd decode_vector(const nlohmann::json& arr) {
  if (!arr.is_array()) fail(Errc::IoError, "gold-standard cache entry is malformed");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = std::strtod(arr[i].get<std::string>().c_str(), nullptr);
  return v;
}

}  // namespace

GoldStandard gold_standard_mean(const SamplerConfig& config, const Target& target,
                                const Kernel& kernel, const Eigen::VectorXd& x0,
                                unsigned register_size, int replicates,
                                const std::string& cache_file, const std::string& cache_tag) {
  if (config.mode != SamplerMode::ImportanceSampling)
    fail(Errc::ConfigError, "the gold standard runs in importance-sampling mode");
  if (replicates < 2) fail(Errc::ConfigError, "the gold standard needs at least two replicates");

  const std::string key = gold_cache_key(config, kernel, x0, register_size, replicates, cache_tag);
  if (!cache_file.empty()) {
    const nlohmann::json cache = load_cache(cache_file);
    if (cache.contains(key)) {
      const auto& entry = cache.at(key);
      GoldStandard g;
      g.mean = decode_vector(entry.at("mean"));
      g.se = decode_vector(entry.at("se"));
      g.replicates = entry.at("replicates").get<int>();
      g.from_cache = true;
      return g;
    }
  }

  const std::size_t width = kernel.uniforms_per_batch(config.n_proposals) + 1;
  std::vector<Eigen::VectorXd> means;
  means.reserve(static_cast<std::size_t>(replicates));
  for (int r = 0; r < replicates; ++r) {
    UniformStream base = build_lfsr_cud(register_size, static_cast<std::uint64_t>(r) + 1);
    DrivingSource source(make_tuple_schedule(base, width));
    RunOutput out = run_sampler(config, target, kernel, x0, std::move(source));
    means.push_back(std::move(out.estimate.mu));
  }

  ReplicateSet set;
  set.estimates = means;
  GoldStandard g;
  g.mean = replicate_mean(set);
  const double rr = static_cast<double>(replicates);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(g.mean.size());
  for (const auto& m : means) var += (m - g.mean).cwiseAbs2();
  g.se = (var / ((rr - 1.0) * rr)).cwiseSqrt();
  g.replicates = replicates;
  g.from_cache = false;

  if (!cache_file.empty()) {
    nlohmann::json cache = load_cache(cache_file);
    cache[key] = {{"mean", encode_vector(g.mean)},
                  {"se", encode_vector(g.se)},
                  {"replicates", g.replicates},
                  {"tag", cache_tag}};
    std::ofstream out(cache_file);
    if (!out) fail(Errc::IoError, "cannot write gold-standard cache " + cache_file);
    out << cache.dump(2) << '\n';
  }
  return g;
}

}  // namespace mpqmc
