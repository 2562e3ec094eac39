#pragma once

#include <span>
#include <string>
#include <vector>

#include "lcmopg/common.hpp"

namespace lcmopg {

enum class NormalizationMode { Standard, Robust, MaxMin };
enum class Centering { Mean, Median };

NormalizationMode parse_normalization(const std::string& name);
std::string to_string(NormalizationMode mode);
Centering parse_centering(const std::string& name);
std::string to_string(Centering c);

/// Centering that pairs with a normalization: median for Robust/MaxMin,
/// mean for Standard.
Centering default_centering(NormalizationMode mode);

inline constexpr double kNormalizationEps = 1e-8;

/// Per-dimension normalization of a batch of returns.
///   Standard: (G - mean) / max(std, eps)      (population std)
///   Robust:   (G - median) / max(iqr, eps)    (linear-interpolated quartiles)
///   MaxMin:   (G - median) / max(max - min, eps)
std::vector<ReturnVector> normalize_returns(std::span<const ReturnVector> returns,
                                            NormalizationMode mode,
                                            double eps = kNormalizationEps);

/// Pareto-distance scores. For each point the candidate set holds the
/// Euclidean distance to the nearest nondominated point together with the
/// per-objective gaps max_z z_j - G_j; the score is minus the smallest
/// candidate, then the batch is centered by `avg`.
std::vector<double> compute_scores(std::span<const ReturnVector> normalized,
                                   Centering avg);

/// Same as compute_scores but without the final centering step.
std::vector<double> raw_scores(std::span<const ReturnVector> normalized);

/// k-th nearest-neighbour distance (self excluded), granted only where the
/// score is strictly positive.
std::vector<double> compute_bonuses(std::span<const ReturnVector> normalized,
                                    std::span<const double> scores, int k);

/// F_i = f_i + beta * b_i, clipped at zero when `clip` is set.
std::vector<double> final_scores(std::span<const double> scores,
                                 std::span<const double> bonuses, double beta,
                                 bool clip);

struct ScoringConfig {
  NormalizationMode normalization = NormalizationMode::MaxMin;
  Centering centering = Centering::Median;
  int k = 10;
  double beta = 4.0;
  bool clip = true;
  double eps = kNormalizationEps;
};

struct ScoreBatch {
  std::vector<ReturnVector> normalized;
  std::vector<double> scores;
  std::vector<double> bonuses;
  std::vector<double> final;
};

/// Full pipeline: normalize, score, bonus, combine.
ScoreBatch score_batch(std::span<const ReturnVector> returns, const ScoringConfig& config);

/// Median of a sample (average of the two middle values for even sizes).
double median(std::vector<double> values);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace lcmopg
