#include "mpqmc/discrepancy.hpp"

#include <algorithm>
#include <cmath>

namespace mpqmc {

namespace {

void validate(const PointSet& ps) {
  if (ps.dim < 1 || ps.dim > 3) fail(Errc::TooLarge, "star discrepancy supports dim 1..3");
  if (ps.size() == 0) fail(Errc::DegenerateTuple, "empty point set");
  if (ps.size() > 4096) fail(Errc::TooLarge, "exact star discrepancy limited to n <= 4096");
  for (double v : ps.data)
    if (!(v >= 0.0 && v < 1.0)) fail(Errc::DegenerateTuple, "coordinates must lie in [0,1)");
}

std::vector<double> axis_candidates(const PointSet& ps, std::size_t j) {
  std::vector<double> c;
  c.reserve(ps.size() + 1);
  for (std::size_t i = 0; i < ps.size(); ++i) c.push_back(ps.at(i, j));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  c.push_back(1.0);
  return c;
}

struct Fenwick {
  explicit Fenwick(std::size_t n) : tree(n + 1, 0) {}
  void add(std::size_t i) {
    for (++i; i < tree.size(); i += i & (~i + 1)) ++tree[i];
  }
  // Count of inserted ranks in [0, r).
  long prefix(std::size_t r) const {
    long s = 0;
    for (; r > 0; r -= r & (~r + 1)) s += tree[r];
    return s;
  }
  std::vector<long> tree;
};

double star_1d(const PointSet& ps) {
  const std::size_t n = ps.size();
  std::vector<double> x = ps.data;
  std::sort(x.begin(), x.end());
  auto xs = axis_candidates(ps, 0);
  double best = 0.0;
  std::size_t open = 0, closed = 0;
  for (double ax : xs) {
    while (closed < n && x[closed] <= ax) ++closed;
    while (open < n && x[open] < ax) ++open;
    best = std::max(best, ax - static_cast<double>(open) / n);
    best = std::max(best, static_cast<double>(closed) / n - ax);
  }
  return best;
}

double star_2d(const PointSet& ps) {
  const std::size_t n = ps.size();
  auto xs = axis_candidates(ps, 0);
  auto ys = axis_candidates(ps, 1);

  struct Pt {
    double x, y;
    std::size_t yrank;
  };
  std::vector<Pt> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].x = ps.at(i, 0);
    pts[i].y = ps.at(i, 1);
    pts[i].yrank = std::lower_bound(ys.begin(), ys.end(), pts[i].y) - ys.begin();
  }
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });

  Fenwick open(ys.size()), closed(ys.size());
  std::size_t p = 0, q = 0;
  double best = 0.0;
  for (double ax : xs) {
    while (q < n && pts[q].x <= ax) closed.add(pts[q++].yrank);
    while (p < n && pts[p].x < ax) open.add(pts[p++].yrank);
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double vol = ax * ys[j];
      best = std::max(best, vol - static_cast<double>(open.prefix(j)) / n);
      best = std::max(best, static_cast<double>(closed.prefix(j + 1)) / n - vol);
    }
  }
  return best;
}

double star_3d(const PointSet& ps) {
  const std::size_t n = ps.size();
  auto xs = axis_candidates(ps, 0);
  auto ys = axis_candidates(ps, 1);
  auto zs = axis_candidates(ps, 2);

  struct Pt {
    double x, y, z;
  };
  std::vector<Pt> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {ps.at(i, 0), ps.at(i, 1), ps.at(i, 2)};
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });

  double best = 0.0;
  std::size_t p = 0, q = 0;
  for (double ax : xs) {
    while (q < n && pts[q].x <= ax) ++q;
    while (p < n && pts[p].x < ax) ++p;
    for (double ay : ys) {
      for (double az : zs) {
        std::size_t open = 0, closed = 0;
        for (std::size_t i = 0; i < q; ++i) {
          if (i < p && pts[i].y < ay && pts[i].z < az) ++open;
          if (pts[i].y <= ay && pts[i].z <= az) ++closed;
        }
        const double vol = ax * ay * az;
        best = std::max(best, vol - static_cast<double>(open) / n);
        best = std::max(best, static_cast<double>(closed) / n - vol);
      }
    }
  }
  return best;
}

}  // namespace

PointSet overlapping_tuples(const std::vector<double>& seq, std::size_t d) {
  if (d < 1 || seq.size() < d) fail(Errc::DegenerateTuple, "sequence shorter than tuple width");
  PointSet ps;
  ps.dim = d;
  ps.data.reserve((seq.size() - d + 1) * d);
  for (std::size_t i = 0; i + d <= seq.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) ps.data.push_back(seq[i + j]);
  return ps;
}

PointSet nonoverlapping_tuples(const std::vector<double>& seq, std::size_t d) {
  if (d < 1 || seq.size() < d) fail(Errc::DegenerateTuple, "sequence shorter than tuple width");
  PointSet ps;
  ps.dim = d;
  const std::size_t k = seq.size() / d;
  ps.data.assign(seq.begin(), seq.begin() + k * d);
  return ps;
}

double star_discrepancy(const PointSet& ps) {
  validate(ps);
  switch (ps.dim) {
    case 1: return star_1d(ps);
    case 2: return star_2d(ps);
    default: return star_3d(ps);
  }
}

}  // namespace mpqmc
