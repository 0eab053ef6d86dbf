#pragma once

#include <Eigen/Dense>

#include "mpqmc/errors.hpp"

namespace mpqmc {

enum class TransitionKind { Barker, Peskun, SuwaTodo, Tjelmeland };

const char* transition_kind_name(TransitionKind k);

// Selection probabilities p(I = j | y_{1:N+1}) from unnormalized log masses
// log pi(y_j) + log kappa(y_j, y_{-j}); log-sum-exp normalized. Throws
// AllZeroMass when every mass vanishes.
Eigen::VectorXd stationary_weights(const Eigen::VectorXd& log_mass);

// All rows equal to the weights; reversible, selection independent of the
// current index.
Eigen::MatrixXd barker_matrix(const Eigen::VectorXd& weights);

// A(i,j) = min(1, mass_j/mass_i) / N off the diagonal, remainder on the
// diagonal; reversible and for N=1 identical to Metropolis-Hastings.
Eigen::MatrixXd peskun_matrix(const Eigen::VectorXd& log_mass);

// Non-reversible allocation: states sorted by weight (descending, ties by
// index), probability shifted cyclically by the largest weight. Satisfies
// balance but not detailed balance; weighted rejection is max(0, 2 w_max - 1).
Eigen::MatrixXd suwa_todo_matrix(const Eigen::VectorXd& weights);

// Starts from the Barker matrix and moves diagonal mass into reversible pair
// transfers until at most one diagonal entry is positive. Capped at 129
// states (TooLarge beyond).
Eigen::MatrixXd tjelmeland_matrix(const Eigen::VectorXd& weights);

Eigen::MatrixXd transition_matrix(TransitionKind k, const Eigen::VectorXd& log_mass);

// Inverse-transform draw on a probability row: the first j with u <= cumsum_j
// and positive mass; u exhausting the row falls back to the last index with
// positive mass.
int sample_index(const Eigen::VectorXd& row, double u);

// Average probability of staying put, sum_i w_i A(i,i).
double rejection_rate(const Eigen::MatrixXd& A, const Eigen::VectorXd& weights);

}  // namespace mpqmc
