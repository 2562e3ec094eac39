#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "lcmopg/common.hpp"
#include "lcmopg/envs.hpp"
#include "lcmopg/neural.hpp"
#include "lcmopg/rng.hpp"

namespace lcmopg {

enum class HeadKind { Categorical, Beta };

struct PolicyConfig {
  int state_dim = 2;                 // length of Environment::features()
  std::vector<int> state_embedding;  // per-feature cosine widths; empty = raw
  int latent_dim = 3;
  int inflation = 10;                // K in cos(k pi c), k = 1..K
  int width = 36;
  int depth = 3;                     // linear layers after the mixing point, head included
  HeadKind head = HeadKind::Categorical;
  int num_actions = 4;               // categorical
  Vector action_lower, action_upper; // beta
  double beta_offset = 1.0;

  int action_dim() const { return head == HeadKind::Beta ? static_cast<int>(action_lower.size()) : 1; }
  int head_outputs() const { return head == HeadKind::Beta ? 2 * action_dim() : num_actions; }
};

/// Fills state_dim, head kind and action space from an environment.
PolicyConfig policy_config_for(const EnvDescriptor& env, int latent_dim, int inflation,
                               int width, int depth, std::vector<int> state_embedding);

struct PolicyAction {
  Action env_action;
  Vector unit_action;  // Beta head: point in (0,1)^dim; empty for categorical
  double log_prob = 0.0;
};

/// pi(a | s, c): a state tower (Linear+SELU) and a latent tower over
/// cosine_embed(c, K) (Linear+Tanh) multiplied elementwise, then depth - 1
/// SELU layers and a linear head layer.
class LatentConditionedPolicy {
 public:
  LatentConditionedPolicy() = default;
  LatentConditionedPolicy(PolicyConfig config, Rng& rng, double init_stddev = kInitStddev);
  LatentConditionedPolicy(PolicyConfig config, Mlp state_tower, Mlp latent_tower, Mlp trunk);

  const PolicyConfig& config() const { return config_; }
  const Mlp& state_tower() const { return state_; }
  const Mlp& latent_tower() const { return latent_; }
  const Mlp& trunk() const { return trunk_; }
  Mlp& state_tower() { return state_; }
  Mlp& latent_tower() { return latent_; }
  Mlp& trunk() { return trunk_; }

  Eigen::Index num_parameters() const;
  /// Concatenation state tower | latent tower | trunk.
  Vector parameters() const;
  void set_parameters(const Vector& flat);
  bool parameters_finite() const;

  /// Tower inputs, one sample per column.
  Matrix embed_states(const Matrix& features) const;
  Matrix embed_latents(const Matrix& latents) const;

  /// Raw head outputs for embedded inputs (one column per sample).
  Matrix head(const Matrix& state_in, const Matrix& latent_in) const;
  Vector head_one(const Vector& features, const Vector& latent) const;

  /// Accumulates into `grad` (sized num_parameters()) the parameter gradient
  /// of sum(grad_head .* head(state_in, latent_in)).
  void backward(const Matrix& state_in, const Matrix& latent_in, const Matrix& grad_head,
                Vector& grad) const;

  /// Interprets one raw head column.
  PolicyAction act_from_head(const Vector& raw, Rng& rng) const;
  Action act_deterministic_from_head(const Vector& raw) const;
  double log_prob_from_head(const Vector& raw, int action, const Vector& unit_action) const;
  /// d log pi / d raw for one transition.
  Vector log_prob_grad_from_head(const Vector& raw, int action, const Vector& unit_action) const;

  PolicyAction act_stochastic(const Vector& features, const Vector& latent, Rng& rng) const;
  Action act_deterministic(const Vector& features, const Vector& latent) const;

  /// Maps a unit-interval action to the environment box.
  Vector to_env_action(const Vector& unit) const;

  bool operator==(const LatentConditionedPolicy& other) const;

 private:
  PolicyConfig config_;
  Mlp state_, latent_, trunk_;
};

void write_policy(std::ostream& os, const LatentConditionedPolicy& policy);
LatentConditionedPolicy read_policy(std::istream& is);

/// Uniform([0,1]^d).
Vector sample_latent(int latent_dim, Rng& rng);

struct Transition {
  Vector state;
  Vector features;
  int action = -1;     // categorical
  Vector unit_action;  // beta
  ReturnVector reward;
};

struct Trajectory {
  std::vector<Transition> transitions;
  Vector latent;
  ReturnVector return_;  // sum_t gamma^t r_t
  int length = 0;
};

enum class RolloutMode { Stochastic, Deterministic };

Trajectory rollout(const LatentConditionedPolicy& policy, Environment& env, const Vector& latent,
                   double gamma, int max_steps, Rng& rng, RolloutMode mode);

/// Episodes advance in lockstep within fixed blocks so that every network
/// evaluation sees the same batch regardless of thread count. Episode i uses
/// derive_stream(seed, stream, i).
inline constexpr std::size_t kRolloutBlock = 32;

std::vector<Trajectory> rollout_batch(const LatentConditionedPolicy& policy,
                                      const EnvFactory& factory,
                                      std::span<const Vector> latents, double gamma,
                                      int max_steps, RolloutMode mode, std::uint64_t seed,
                                      std::uint64_t stream, std::size_t threads = 1,
                                      bool keep_transitions = true);

/// One trajectory's contribution to the loss -sum_i w_i sum_t log pi(a_t|s_t,c_i).
/// Either a single trajectory weight or one weight per transition.
struct WeightedTrajectory {
  const Trajectory* trajectory = nullptr;
  double weight = 0.0;
  std::vector<double> per_transition;  // overrides weight when non-empty
};

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
  std::size_t transitions = 0;  // transitions with nonzero weight
};

LossAndGrad policy_loss_and_grad(const LatentConditionedPolicy& policy,
                                 std::span<const WeightedTrajectory> batch);

/// Sum of log pi over a trajectory's transitions.
double trajectory_log_prob(const LatentConditionedPolicy& policy, const Trajectory& traj);

/// One Adam state per network.
class PolicyOptimizer {
 public:
  PolicyOptimizer() = default;
  PolicyOptimizer(const LatentConditionedPolicy& policy, AdamConfig config = {});
  /// Rejects non-finite gradients without touching the policy.
  void step(LatentConditionedPolicy& policy, const Vector& grad);
  long step_count() const { return state_.step_count(); }

 private:
  Adam state_, latent_, trunk_;
};

}  // namespace lcmopg
