#pragma once

// Reference implementations shared by the unit tests and the acceptance
// binary. Written against plain loops and std::vector so they share no code
// with the library routines they check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lcmopg/common.hpp"

namespace oracle {

using lcmopg::ReturnVector;
using lcmopg::Vector;
using Pt = std::vector<double>;

inline std::vector<Pt> to_pts(const std::vector<ReturnVector>& xs) {
  std::vector<Pt> out;
  for (const auto& x : xs) out.emplace_back(x.data(), x.data() + x.size());
  return out;
}

inline bool dom(const Pt& a, const Pt& b) {
  bool strict = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] < b[j]) return false;
    if (a[j] > b[j]) strict = true;
  }
  return strict;
}

inline std::vector<std::size_t> brute_force_front(const std::vector<ReturnVector>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (i == j) continue;
      bool ge = true, gt = false;
      for (Eigen::Index d = 0; d < pts[i].size(); ++d) {
        ge = ge && pts[j][d] >= pts[i][d];
        gt = gt || pts[j][d] > pts[i][d];
      }
      dominated = ge && gt;
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

// Inclusion-exclusion over all subsets; exact for small sets.
inline double hv_inclusion_exclusion(const std::vector<ReturnVector>& pts, const ReturnVector& ref) {
  const std::size_t n = pts.size();
  double total = 0.0;
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    ReturnVector lo = ReturnVector::Constant(ref.size(), 1e300);
    int bits = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) {
        lo = lo.cwiseMin(pts[i]);
        ++bits;
      }
    const double vol = (lo - ref).cwiseMax(0.0).prod();
    total += (bits % 2 ? 1.0 : -1.0) * vol;
  }
  return total;
}

inline double sorted_median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

// Score: minus the smallest of the distance to the front and the per-dimension
// gaps to the front's maxima, then centered.
inline std::vector<double> ref_scores(const std::vector<Pt>& g, bool use_median) {
  std::vector<Pt> front;
  for (std::size_t i = 0; i < g.size(); ++i) {
    bool d = false;
    for (std::size_t j = 0; j < g.size(); ++j) d = d || dom(g[j], g[i]);
    if (!d) front.push_back(g[i]);
  }
  const std::size_t m = g[0].size();
  std::vector<double> f;
  for (const auto& gi : g) {
    std::vector<double> D;
    double best = 1e300;
    for (const auto& z : front) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += (z[j] - gi[j]) * (z[j] - gi[j]);
      best = std::min(best, std::sqrt(s));
    }
    D.push_back(best);
    for (std::size_t j = 0; j < m; ++j) {
      double mx = -1e300;
      for (const auto& z : front) mx = std::max(mx, z[j]);
      D.push_back(mx - gi[j]);
    }
    f.push_back(-*std::min_element(D.begin(), D.end()));
  }
  const double avg =
      use_median ? sorted_median(f) : std::accumulate(f.begin(), f.end(), 0.0) / f.size();
  for (double& x : f) x -= avg;
  return f;
}

// k-th nearest-neighbour distance where the score is positive.
inline std::vector<double> ref_bonuses(const std::vector<Pt>& g, const std::vector<double>& f, int k) {
  std::vector<double> b;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < g[i].size(); ++c) s += (g[i][c] - g[j][c]) * (g[i][c] - g[j][c]);
      d.push_back(std::sqrt(s));
    }
    std::sort(d.begin(), d.end());
    b.push_back(f[i] > 0 ? d[k - 1] : 0.0);
  }
  return b;
}

// Central differences of a scalar function of a parameter vector.
template <typename F>
Vector numeric_grad(Vector x, F&& f, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest |a - n| relative to max(1, |n|_inf).
inline double grad_error(const Vector& analytic, const Vector& numeric) {
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace oracle
