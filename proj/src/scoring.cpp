#include "lcmopg/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lcmopg/objective_space.hpp"

namespace lcmopg {

NormalizationMode parse_normalization(const std::string& name) {
  if (name == "standard") return NormalizationMode::Standard;
  if (name == "robust") return NormalizationMode::Robust;
  if (name == "maxmin" || name == "max-min") return NormalizationMode::MaxMin;
  throw ContractViolation("unknown normalization mode: " + name);
}

std::string to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::Standard: return "standard";
    case NormalizationMode::Robust: return "robust";
    case NormalizationMode::MaxMin: return "maxmin";
  }
  return "maxmin";
}

Centering parse_centering(const std::string& name) {
  if (name == "mean") return Centering::Mean;
  if (name == "median") return Centering::Median;
  throw ContractViolation("unknown centering: " + name);
}

std::string to_string(Centering c) { return c == Centering::Mean ? "mean" : "median"; }

Centering default_centering(NormalizationMode mode) {
  return mode == NormalizationMode::Standard ? Centering::Mean : Centering::Median;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<ReturnVector> normalize_returns(std::span<const ReturnVector> returns,
                                            NormalizationMode mode, double eps) {
  require(returns.size() >= 2, "normalize_returns: need at least two returns");
  const auto m = returns.front().size();
  for (const auto& g : returns)
    require(g.size() == m, "normalize_returns: non-uniform dimension");
  const auto n = returns.size();

  Vector center(m), scale(m);
  std::vector<double> column(n);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = returns[i][j];
    switch (mode) {
      case NormalizationMode::Standard: {
        const double mean = std::accumulate(column.begin(), column.end(), 0.0) / n;
        double var = 0.0;
        for (double x : column) var += (x - mean) * (x - mean);
        center[j] = mean;
        scale[j] = std::sqrt(var / n);
        break;
      }
      case NormalizationMode::Robust:
        center[j] = median(column);
        scale[j] = quantile(column, 0.75) - quantile(column, 0.25);
        break;
      case NormalizationMode::MaxMin: {
        const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
        center[j] = median(column);
        scale[j] = *hi - *lo;
        break;
      }
    }
    scale[j] = std::max(scale[j], eps);
  }

  std::vector<ReturnVector> out;
  out.reserve(n);
  for (const auto& g : returns) out.push_back((g - center).cwiseQuotient(scale));
  return out;
}

std::vector<double> raw_scores(std::span<const ReturnVector> normalized) {
  require(!normalized.empty(), "compute_scores: empty batch");
  const auto front = pareto_filter(normalized);
  const auto m = normalized.front().size();
  Vector best = Vector::Constant(m, -std::numeric_limits<double>::infinity());
  for (std::size_t f : front) best = best.cwiseMax(normalized[f]);

  std::vector<double> f(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto& g = normalized[i];
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t z : front) nearest = std::min(nearest, (normalized[z] - g).norm());
    double smallest = nearest;
    for (Eigen::Index j = 0; j < m; ++j) smallest = std::min(smallest, best[j] - g[j]);
    f[i] = -smallest;
  }
  return f;
}

std::vector<double> compute_scores(std::span<const ReturnVector> normalized,
                                   Centering avg) {
  auto f = raw_scores(normalized);
  const double c = avg == Centering::Mean
                       ? std::accumulate(f.begin(), f.end(), 0.0) / f.size()
                       : median(f);
  for (double& x : f) x -= c;
  return f;
}

std::vector<double> compute_bonuses(std::span<const ReturnVector> normalized,
                                    std::span<const double> scores, int k) {
  const auto n = normalized.size();
  require(scores.size() == n, "compute_bonuses: score/return length mismatch");
  require(k >= 1 && static_cast<std::size_t>(k) < n,
          "compute_bonuses: k must satisfy 1 <= k <= N-1");
  std::vector<double> bonus(n, 0.0);
  std::vector<double> dist(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(scores[i] > 0.0)) continue;
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist[c++] = (normalized[j] - normalized[i]).norm();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    bonus[i] = dist[k - 1];
  }
  return bonus;
}

std::vector<double> final_scores(std::span<const double> scores,
                                 std::span<const double> bonuses, double beta,
                                 bool clip) {
  require(scores.size() == bonuses.size(), "final_scores: length mismatch");
  require(beta >= 0.0, "final_scores: beta must be nonnegative");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double v = scores[i] + beta * bonuses[i];
    out[i] = clip ? std::max(v, 0.0) : v;
  }
  return out;
}

ScoreBatch score_batch(std::span<const ReturnVector> returns, const ScoringConfig& config) {
  ScoreBatch batch;
  batch.normalized = normalize_returns(returns, config.normalization, config.eps);
  batch.scores = compute_scores(batch.normalized, config.centering);
  batch.bonuses = compute_bonuses(batch.normalized, batch.scores, config.k);
  batch.final = final_scores(batch.scores, batch.bonuses, config.beta, config.clip);
  return batch;
}

}  // namespace lcmopg
