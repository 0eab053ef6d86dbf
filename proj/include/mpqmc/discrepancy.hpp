#pragma once

#include <cstddef>
#include <vector>

#include "mpqmc/errors.hpp"

namespace mpqmc {

// Points in [0,1)^dim, row-major.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t size() const { return dim ? data.size() / dim : 0; }
  double at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
};

// Consecutive windows (u_i, ..., u_{i+d-1}), i = 0..n-d.
PointSet overlapping_tuples(const std::vector<double>& seq, std::size_t d);

// Disjoint blocks (u_{kd}, ..., u_{kd+d-1}), k = 0..floor(n/d)-1.
PointSet nonoverlapping_tuples(const std::vector<double>& seq, std::size_t d);

// Exact star discrepancy by enumerating anchored boxes with corners on the
// coordinate grid, evaluating both the open and the closed count at each
// anchor. Supported sizes: dim <= 3 and n <= 4096 (TooLarge otherwise);
// dim 3 costs O(n^4)-ish and is only meant for small sets.
double star_discrepancy(const PointSet& ps);

}  // namespace mpqmc
