#include "mpqmc/finite_chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mpqmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_weights(const Eigen::VectorXd& w) {
  if (w.size() < 2) fail(Errc::InvalidWeights, "need at least two candidates");
  double sum = 0.0;
  for (int i = 0; i < w.size(); ++i) {
    if (std::isnan(w[i]) || w[i] < -1e-15) fail(Errc::InvalidWeights, "negative weight");
    sum += w[i];
  }
  if (std::fabs(sum - 1.0) > 1e-9) fail(Errc::InvalidWeights, "weights do not sum to one");
}

}  // namespace

const char* transition_kind_name(TransitionKind k) {
  switch (k) {
    case TransitionKind::Barker: return "barker";
    case TransitionKind::Peskun: return "peskun";
    case TransitionKind::SuwaTodo: return "suwa_todo";
    case TransitionKind::Tjelmeland: return "tjelmeland";
  }
  return "?";
}

Eigen::VectorXd stationary_weights(const Eigen::VectorXd& log_mass) {
  const int n = static_cast<int>(log_mass.size());
  if (n < 1) fail(Errc::InvalidWeights, "empty mass vector");
  double mx = -kInf;
  for (int i = 0; i < n; ++i) {
    if (std::isnan(log_mass[i]) || log_mass[i] == kInf)
      fail(Errc::InvalidWeights, "log mass must be finite or -inf");
    mx = std::max(mx, log_mass[i]);
  }
  if (mx == -kInf) fail(Errc::AllZeroMass, "every candidate has zero mass");
  Eigen::VectorXd w(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = log_mass[i] == -kInf ? 0.0 : std::exp(log_mass[i] - mx);
    sum += w[i];
  }
  return w / sum;
}

Eigen::MatrixXd barker_matrix(const Eigen::VectorXd& weights) {
  validate_weights(weights);
  const int n = static_cast<int>(weights.size());
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) A.row(i) = weights.transpose();
  return A;
}

Eigen::MatrixXd peskun_matrix(const Eigen::VectorXd& log_mass) {
  const int n = static_cast<int>(log_mass.size());
  if (n < 2) fail(Errc::InvalidWeights, "need at least two candidates");
  stationary_weights(log_mass);  // validates masses
  const double inv_n = 1.0 / (n - 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double a;
      if (log_mass[j] == -kInf)
        a = 0.0;
      else if (log_mass[i] == -kInf)
        a = inv_n;
      else
        a = inv_n * std::min(1.0, std::exp(log_mass[j] - log_mass[i]));
      A(i, j) = a;
      off += a;
    }
    A(i, i) = std::max(0.0, 1.0 - off);
  }
  return A;
}

Eigen::MatrixXd suwa_todo_matrix(const Eigen::VectorXd& weights) {
  validate_weights(weights);
  const int n = static_cast<int>(weights.size());

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weights[a] > weights[b]; });

  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = weights[order[i]];

  // Prefix boundaries of the sorted intervals on the unit circle.
  std::vector<double> S(n + 1, 0.0);
  for (int i = 0; i < n; ++i) S[i + 1] = S[i] + v[i];
  const double total = S[n];
  const double shift = v[0];

  // Length of the intersection of [a,b) shifted onto the circle with [c,d).
  auto overlap = [&](double a, double b, double c, double d) {
    double len = 0.0;
    // Unroll the wrap-around into at most two linear segments.
    for (int seg = 0; seg < 2; ++seg) {
      const double lo = seg == 0 ? a : a - total;
      const double hi = seg == 0 ? b : b - total;
      len += std::max(0.0, std::min(hi, d) - std::max(lo, c));
    }
    return len;
  };

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> ov(n);
  for (int i = 0; i < n; ++i) {
    if (v[i] <= 0.0) {
      // Unreachable state; give it the stationary row to stay stochastic.
      for (int j = 0; j < n; ++j) A(order[i], order[j]) = v[j];
      continue;
    }
    const double a = S[i] + shift;
    const double b = S[i + 1] + shift;
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      ov[j] = v[j] > 0.0 ? overlap(a, b, S[j], S[j + 1]) : 0.0;
      row_sum += ov[j];
    }
    if (row_sum > 0.0) {
      // Normalizing by the computed sum instead of v[i] keeps rows exactly
      // stochastic when the interval endpoints round against each other.
      for (int j = 0; j < n; ++j) A(order[i], order[j]) = ov[j] / row_sum;
    } else {
      // The whole interval collapsed below resolution; treat it as the point
      // at its left edge and hand all mass to the interval covering it.
      double p = a >= total ? a - total : a;
      int j = static_cast<int>(std::upper_bound(S.begin(), S.end(), p) - S.begin()) - 1;
      j = std::min(std::max(j, 0), n - 1);
      A(order[i], order[j]) = 1.0;
    }
  }
  return A;
}

Eigen::MatrixXd tjelmeland_matrix(const Eigen::VectorXd& weights) {
  validate_weights(weights);
  const int n = static_cast<int>(weights.size());
  if (n > 129) fail(Errc::TooLarge, "pair-transfer optimization capped at 129 states");

  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) A.row(i) = weights.transpose();

  for (int i = 0; i < n; ++i) {
    if (weights[i] <= 0.0 || A(i, i) <= 0.0) continue;
    for (int j = i + 1; j < n; ++j) {
      if (weights[j] <= 0.0 || A(j, j) <= 0.0) continue;
      const double delta = std::min(A(i, i) * weights[i], A(j, j) * weights[j]);
      if (delta < 1e-14) continue;
      A(i, i) = std::max(0.0, A(i, i) - delta / weights[i]);
      A(i, j) += delta / weights[i];
      A(j, j) = std::max(0.0, A(j, j) - delta / weights[j]);
      A(j, i) += delta / weights[j];
      if (A(i, i) <= 0.0) break;
    }
  }
  return A;
}

Eigen::MatrixXd transition_matrix(TransitionKind k, const Eigen::VectorXd& log_mass) {
  switch (k) {
    case TransitionKind::Barker: return barker_matrix(stationary_weights(log_mass));
    case TransitionKind::Peskun: return peskun_matrix(log_mass);
    case TransitionKind::SuwaTodo: return suwa_todo_matrix(stationary_weights(log_mass));
    case TransitionKind::Tjelmeland: return tjelmeland_matrix(stationary_weights(log_mass));
  }
  fail(Errc::WrongMode, "unknown transition kind");
}

int sample_index(const Eigen::VectorXd& row, double u) {
  if (!(u > 0.0 && u <= 1.0)) fail(Errc::InvalidWeights, "index uniform must be in (0,1]");
  const int n = static_cast<int>(row.size());
  double c = 0.0;
  int last_positive = -1;
  for (int j = 0; j < n; ++j) {
    if (row[j] <= 0.0) continue;
    last_positive = j;
    c += row[j];
    if (u <= c) return j;
  }
  if (last_positive < 0) fail(Errc::AllZeroMass, "probability row has no positive entry");
  return last_positive;  // u beyond the accumulated mass (rounding or u = 1)
}

double rejection_rate(const Eigen::MatrixXd& A, const Eigen::VectorXd& weights) {
  validate_weights(weights);
  double r = 0.0;
  for (int i = 0; i < A.rows(); ++i) r += weights[i] * A(i, i);
  return r;
}

}  // namespace mpqmc
