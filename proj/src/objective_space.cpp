#include "lcmopg/objective_space.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace lcmopg {

bool dominates(const ReturnVector& a, const ReturnVector& b) {
  require(a.size() == b.size(), "dominates: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
  bool strict = false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

std::vector<std::size_t> pareto_filter(std::span<const ReturnVector> points) {
  require(!points.empty(), "pareto_filter: empty input");
  const auto m = points.front().size();
  for (const auto& p : points)
    require(p.size() == m, "pareto_filter: non-uniform dimension");

  // Candidates in descending coordinate sum: a dominator always has a larger
  // sum, so most dominated points are rejected against a small front. The
  // eviction pass keeps the result exact under rounding of the sums.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sums(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) sums[i] = points[i].sum();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sums[a] > sums[b]; });

  std::vector<std::size_t> front;
  for (std::size_t idx : order) {
    const auto& p = points[idx];
    bool dominated = false;
    for (std::size_t f : front) {
      if (dominates(points[f], p)) {
        dominated = true;
        break;
      }
    }
    if (dominated) continue;
    std::erase_if(front, [&](std::size_t f) { return dominates(p, points[f]); });
    front.push_back(idx);
  }
  std::sort(front.begin(), front.end());
  return front;
}

namespace {

using Point = std::array<double, kMaxExactHvDimension>;

bool dominates_prefix(const Point& a, const Point& b, int d) {
  bool strict = false;
  for (int i = 0; i < d; ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

bool equal_prefix(const Point& a, const Point& b, int d) {
  for (int i = 0; i < d; ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// Nondominated, duplicate-free subset over the first d coordinates.
std::vector<Point> nondominated(std::vector<Point> pts, int d) {
  std::sort(pts.begin(), pts.end(), [d](const Point& a, const Point& b) {
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < d; ++i) {
      sa += a[i];
      sb += b[i];
    }
    return sa > sb;
  });
  std::vector<Point> front;
  front.reserve(pts.size());
  for (const auto& p : pts) {
    bool reject = false;
    for (const auto& f : front) {
      if (dominates_prefix(f, p, d) || equal_prefix(f, p, d)) {
        reject = true;
        break;
      }
    }
    if (reject) continue;
    std::erase_if(front, [&](const Point& f) { return dominates_prefix(p, f, d); });
    front.push_back(p);
  }
  return front;
}

// Points are relative to the reference (all coordinates > 0) and
// nondominated over the first d coordinates.
double hv_recursive(std::vector<Point> pts, int d) {
  if (pts.empty()) return 0.0;
  if (d == 1) {
    double best = 0.0;
    for (const auto& p : pts) best = std::max(best, p[0]);
    return best;
  }
  if (d == 2) {
    std::sort(pts.begin(), pts.end(),
              [](const Point& a, const Point& b) { return a[0] > b[0]; });
    double area = 0.0, covered_y = 0.0;
    for (const auto& p : pts) {
      if (p[1] > covered_y) {
        area += p[0] * (p[1] - covered_y);
        covered_y = p[1];
      }
    }
    return area;
  }
  const int last = d - 1;
  std::sort(pts.begin(), pts.end(),
            [last](const Point& a, const Point& b) { return a[last] < b[last]; });
  double total = 0.0;
  std::vector<Point> limit;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Point& pk = pts[k];
    double box = 1.0;
    for (int i = 0; i < last; ++i) box *= pk[i];
    limit.clear();
    for (std::size_t j = k + 1; j < pts.size(); ++j) {
      Point q{};
      for (int i = 0; i < last; ++i) q[i] = std::min(pk[i], pts[j][i]);
      limit.push_back(q);
    }
    const double covered =
        limit.empty() ? 0.0 : hv_recursive(nondominated(limit, last), last);
    total += pk[last] * (box - covered);
  }
  return total;
}

std::vector<Point> relative_front(std::span<const ReturnVector> points,
                                  const ReturnVector& ref, bool clip) {
  const int m = static_cast<int>(ref.size());
  require(m >= 1 && m <= kMaxExactHvDimension,
          "hypervolume: supported dimensions are 1.." +
              std::to_string(kMaxExactHvDimension));
  std::vector<Point> rel;
  rel.reserve(points.size());
  for (const auto& p : points) {
    require(p.size() == m, "hypervolume: point/reference dimension mismatch");
    for (int i = 0; i < m; ++i)
      require(std::isfinite(p[i]), "hypervolume: non-finite coordinate");
    Point q{};
    bool inside = true;
    for (int i = 0; i < m; ++i) {
      q[i] = p[i] - ref[i];
      if (!(q[i] > 0.0)) inside = false;
    }
    if (clip && !inside) continue;
    rel.push_back(q);
  }
  auto front = nondominated(std::move(rel), m);
  for (const auto& q : front) {
    for (int i = 0; i < m; ++i) {
      require(q[i] > 0.0,
              "hypervolume: nondominated point does not strictly dominate the "
              "reference point in objective " + std::to_string(i));
    }
  }
  return front;
}

}  // namespace

double hypervolume(std::span<const ReturnVector> points, const ReturnVector& ref) {
  if (points.empty()) return 0.0;
  const int m = static_cast<int>(ref.size());
  return hv_recursive(relative_front(points, ref, false), m);
}

double hypervolume_clipped(std::span<const ReturnVector> points,
                           const ReturnVector& ref) {
  if (points.empty()) return 0.0;
  const int m = static_cast<int>(ref.size());
  return hv_recursive(relative_front(points, ref, true), m);
}

MonteCarloHv hypervolume_mc(std::span<const ReturnVector> points,
                            const ReturnVector& ref, std::size_t n_samples,
                            std::uint64_t seed) {
  require(n_samples > 0, "hypervolume_mc: n_samples must be positive");
  if (points.empty()) return {};
  const auto m = ref.size();
  std::vector<std::size_t> front = pareto_filter(points);
  Vector upper = ref;
  for (std::size_t f : front) {
    require(points[f].size() == m, "hypervolume_mc: dimension mismatch");
    for (Eigen::Index i = 0; i < m; ++i)
      require(points[f][i] > ref[i],
              "hypervolume_mc: nondominated point does not dominate reference");
    upper = upper.cwiseMax(points[f]);
  }
  const double box = (upper - ref).prod();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t hits = 0;
  Vector x(m);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (Eigen::Index i = 0; i < m; ++i) x[i] = ref[i] + unit(rng) * (upper[i] - ref[i]);
    for (std::size_t f : front) {
      if ((points[f].array() >= x.array()).all()) {
        ++hits;
        break;
      }
    }
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n_samples);
  return {box * p, box * std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples))};
}

ParetoArchive ParetoArchive::from_entries(std::vector<ArchiveEntry> entries) {
  ParetoArchive archive;
  if (entries.empty()) return archive;
  std::vector<ReturnVector> pts;
  pts.reserve(entries.size());
  for (const auto& e : entries) pts.push_back(e.point);
  for (std::size_t i : pareto_filter(pts)) archive.entries_.push_back(std::move(entries[i]));
  return archive;
}

ParetoArchive ParetoArchive::from_points(std::span<const ReturnVector> points) {
  std::vector<ArchiveEntry> entries;
  entries.reserve(points.size());
  for (const auto& p : points) entries.push_back({p, {}, -1});
  return from_entries(std::move(entries));
}

bool ParetoArchive::insert(ArchiveEntry entry) {
  for (const auto& e : entries_) {
    require(e.point.size() == entry.point.size(), "ParetoArchive: dimension mismatch");
    if (dominates(e.point, entry.point)) return false;
  }
  std::erase_if(entries_, [&](const ArchiveEntry& e) { return dominates(entry.point, e.point); });
  entries_.push_back(std::move(entry));
  return true;
}

std::vector<ReturnVector> ParetoArchive::points() const {
  std::vector<ReturnVector> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.point);
  return out;
}

double ParetoArchive::hypervolume(const ReturnVector& ref) const {
  const auto pts = points();
  return lcmopg::hypervolume(pts, ref);
}

}  // namespace lcmopg
