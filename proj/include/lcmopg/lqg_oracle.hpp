#pragma once

#include <cstdint>
#include <vector>

#include "lcmopg/common.hpp"
#include "lcmopg/envs.hpp"
#include "lcmopg/objective_space.hpp"

namespace lcmopg {

struct RiccatiSolution {
  Matrix S;
  double residual = 0.0;
  int iterations = 0;
};

/// Fixed point of S = Q + g S - g^2 S (R + g S)^-1 S, iterated from S = Q.
/// Throws std::runtime_error if the residual is still above tol after max_iter.
RiccatiSolution solve_riccati(const Matrix& Q, const Matrix& R, double gamma,
                              double tol = 1e-12, int max_iter = 100000);

/// Frobenius norm of S - (Q + g S - g^2 S (R + g S)^-1 S).
double riccati_residual(const Matrix& S, const Matrix& Q, const Matrix& R, double gamma);

/// a = -g (R + g S)^-1 S s.
Vector optimal_action(const Matrix& S, const Matrix& R, double gamma, const Vector& s);

/// (w, 1 - w) for w = step, 2 step, ..., 1 - step.
std::vector<Vector> weight_grid_2d(double step = 0.01);
/// Simplex points (i, j, k)/divisions with i, j, k >= 1; 100 divisions gives 4851.
std::vector<Vector> weight_grid_3d(int divisions = 100);

struct OracleConfig {
  LqgConfig env;
  double gamma = 0.9;
  int episodes_per_weight = 1;  // used when env.sigma > 0
  std::uint64_t seed = 0;
};

struct OracleResult {
  std::vector<Vector> weights;       // one per grid point
  std::vector<ReturnVector> returns; // mean discounted return per weight
  ParetoArchive front;               // nondominated subset; trajectory_id = grid index
};

OracleResult oracle_pf(const OracleConfig& config, const std::vector<Vector>& weights,
                       std::size_t threads = 1);

/// Reference points and HV divisors used for reporting LQG results.
ReturnVector lqg_reference_point(int dim);
double lqg_hv_scale(int dim);
/// HV of `points` against lqg_reference_point divided by lqg_hv_scale.
double lqg_normalized_hv(std::span<const ReturnVector> points, int dim);

}  // namespace lcmopg
