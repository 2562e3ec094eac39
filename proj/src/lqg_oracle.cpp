#include "lcmopg/lqg_oracle.hpp"

#include <cmath>
#include <sstream>

#include "lcmopg/parallel.hpp"

namespace lcmopg {

namespace {

Matrix riccati_map(const Matrix& S, const Matrix& Q, const Matrix& R, double g) {
  const Matrix M = R + g * S;
  return Q + g * S - g * g * S * M.ldlt().solve(S);
}

}  // namespace

double riccati_residual(const Matrix& S, const Matrix& Q, const Matrix& R, double gamma) {
  return (S - riccati_map(S, Q, R, gamma)).norm();
}

RiccatiSolution solve_riccati(const Matrix& Q, const Matrix& R, double gamma, double tol,
                              int max_iter) {
  require(Q.rows() == Q.cols() && R.rows() == R.cols() && Q.rows() == R.rows(),
          "solve_riccati: Q and R must be square and of equal size");
  require(gamma > 0.0 && gamma < 1.0, "solve_riccati: gamma must lie in (0, 1)");
  require((Q - Q.transpose()).norm() <= 1e-12 && (R - R.transpose()).norm() <= 1e-12,
          "solve_riccati: Q and R must be symmetric");
  require(Q.llt().info() == Eigen::Success && R.llt().info() == Eigen::Success,
          "solve_riccati: Q and R must be positive definite");
  RiccatiSolution sol;
  sol.S = Q;
  for (int it = 0; it < max_iter; ++it) {
    Matrix next = riccati_map(sol.S, Q, R, gamma);
    next = 0.5 * (next + next.transpose());
    sol.residual = (next - sol.S).norm();
    sol.S = std::move(next);
    sol.iterations = it + 1;
    if (sol.residual <= tol) {
      sol.residual = riccati_residual(sol.S, Q, R, gamma);
      if (sol.residual <= tol) return sol;
    }
  }
  std::ostringstream msg;
  msg << "solve_riccati: no convergence after " << max_iter << " iterations, residual "
      << sol.residual;
  throw std::runtime_error(msg.str());
}

Vector optimal_action(const Matrix& S, const Matrix& R, double gamma, const Vector& s) {
  const Matrix M = R + gamma * S;
  Eigen::LDLT<Matrix> ldlt(M);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive(),
          "optimal_action: R + gamma S is not positive definite");
  return -gamma * ldlt.solve(S * s);
}

std::vector<Vector> weight_grid_2d(double step) {
  require(step > 0.0 && step < 0.5, "weight_grid_2d: step must lie in (0, 0.5)");
  std::vector<Vector> grid;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 1; i < n; ++i) {
    const double w = i * step;
    grid.push_back(Vector{{w, 1.0 - w}});
  }
  return grid;
}

std::vector<Vector> weight_grid_3d(int divisions) {
  require(divisions >= 3, "weight_grid_3d: need at least 3 divisions");
  std::vector<Vector> grid;
  for (int i = 1; i < divisions; ++i)
    for (int j = 1; i + j < divisions; ++j) {
      const int k = divisions - i - j;
      grid.push_back(Vector{{static_cast<double>(i) / divisions,
                             static_cast<double>(j) / divisions,
                             static_cast<double>(k) / divisions}});
    }
  return grid;
}

OracleResult oracle_pf(const OracleConfig& config, const std::vector<Vector>& weights,
                       std::size_t threads) {
  const int m = config.env.dim;
  require(!weights.empty(), "oracle_pf: empty weight grid");
  require(config.episodes_per_weight >= 1, "oracle_pf: episodes_per_weight must be >= 1");
  std::vector<Matrix> Qs, Rs;
  for (int i = 0; i < m; ++i) {
    Qs.push_back(lqg_state_cost(m, config.env.xi, i));
    Rs.push_back(lqg_action_cost(m, config.env.xi, i));
  }
  for (const auto& w : weights) {
    require(w.size() == m, "oracle_pf: weight dimension mismatch");
    require((w.array() >= 0.0).all() && std::abs(w.sum() - 1.0) < 1e-9,
            "oracle_pf: weights must be nonnegative and sum to 1");
  }
  OracleResult res;
  res.weights = weights;
  res.returns.resize(weights.size());
  const int episodes = config.env.sigma > 0.0 ? config.episodes_per_weight : 1;
  parallel_for(weights.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      Matrix Q = Matrix::Zero(m, m), R = Matrix::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        Q += weights[k][i] * Qs[i];
        R += weights[k][i] * Rs[i];
      }
      const RiccatiSolution sol = solve_riccati(Q, R, config.gamma);
      const Matrix gain = config.gamma * (R + config.gamma * sol.S).ldlt().solve(sol.S);
      LinearQuadraticGaussian env(config.env);
      ReturnVector total = ReturnVector::Zero(m);
      for (int ep = 0; ep < episodes; ++ep) {
        Rng rng = derive_stream(config.seed, k, ep);
        Vector s = env.reset(rng);
        double discount = 1.0;
        for (int t = 0; t < config.env.horizon; ++t) {
          StepResult r = env.step(Action::box(-gain * s), rng);
          total += discount * r.reward;
          discount *= config.gamma;
          s = std::move(r.state);
          if (r.done) break;
        }
      }
      res.returns[k] = total / episodes;
    }
  });
  std::vector<ArchiveEntry> entries;
  for (std::size_t k = 0; k < weights.size(); ++k)
    entries.push_back({res.returns[k], weights[k], static_cast<int>(k)});
  res.front = ParetoArchive::from_entries(std::move(entries));
  return res;
}

ReturnVector lqg_reference_point(int dim) {
  require(dim == 2 || dim == 3, "lqg_reference_point: dim must be 2 or 3");
  return ReturnVector::Constant(dim, dim == 2 ? -310.0 : -500.0);
}

double lqg_hv_scale(int dim) {
  require(dim == 2 || dim == 3, "lqg_hv_scale: dim must be 2 or 3");
  return dim == 2 ? 160.0 * 160.0 : 350.0 * 350.0 * 350.0;
}

double lqg_normalized_hv(std::span<const ReturnVector> points, int dim) {
  return hypervolume_clipped(points, lqg_reference_point(dim)) / lqg_hv_scale(dim);
}

}  // namespace lcmopg
