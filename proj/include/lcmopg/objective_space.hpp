#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lcmopg/common.hpp"

namespace lcmopg {

/// Largest objective count for which hypervolume() is exact.
inline constexpr int kMaxExactHvDimension = 6;

/// True iff a >= b componentwise with at least one strict inequality.
/// Comparisons are exact; no epsilon.
bool dominates(const ReturnVector& a, const ReturnVector& b);

/// Indices (ascending) of the points not dominated by any other point.
/// Duplicates of a nondominated point are all kept.
std::vector<std::size_t> pareto_filter(std::span<const ReturnVector> points);

/// Lebesgue measure of the union of boxes [ref, p] over the nondominated p.
///
/// Dominated points are ignored. Every nondominated point must strictly
/// dominate `ref` in all coordinates, otherwise the measure is ill-posed and
/// ContractViolation is thrown. m = 2 uses a sort-and-sweep; 3 <= m <= 6 uses
/// recursive slicing on the last objective (WFG-style limit sets).
double hypervolume(std::span<const ReturnVector> points, const ReturnVector& ref);

/// Same measure, but points that fail to strictly dominate `ref` are dropped
/// first (their boxes have zero volume). Used when scoring learned fronts.
double hypervolume_clipped(std::span<const ReturnVector> points,
                           const ReturnVector& ref);

struct MonteCarloHv {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of hypervolume() by uniform sampling in the bounding
/// box [ref, max(points)]. Test oracle only.
MonteCarloHv hypervolume_mc(std::span<const ReturnVector> points,
                            const ReturnVector& ref, std::size_t n_samples,
                            std::uint64_t seed);

/// One archived return with its optional provenance.
struct ArchiveEntry {
  ReturnVector point;
  Vector latent;                 // empty when not tracked
  std::int64_t trajectory_id = -1;
};

/// A mutually nondominated set of returns.
class ParetoArchive {
 public:
  ParetoArchive() = default;

  /// Keeps the nondominated subset of `entries` (duplicates retained).
  static ParetoArchive from_entries(std::vector<ArchiveEntry> entries);
  static ParetoArchive from_points(std::span<const ReturnVector> points);

  /// Inserts unless dominated; evicts entries the new point dominates.
  /// Returns true when the point was inserted.
  bool insert(ArchiveEntry entry);

  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::vector<ReturnVector> points() const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double hypervolume(const ReturnVector& ref) const;

 private:
  std::vector<ArchiveEntry> entries_;
};

}  // namespace lcmopg
