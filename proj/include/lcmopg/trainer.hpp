#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lcmopg/envs.hpp"
#include "lcmopg/objective_space.hpp"
#include "lcmopg/policy.hpp"
#include "lcmopg/scoring.hpp"

namespace lcmopg {

enum class Variant { PG, PGV };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct TrainConfig {
  Variant variant = Variant::PG;
  int latent_dim = 3;
  int n_lat_train = 400;
  int n_lat_test = 400;
  int inflation = 10;
  int width = 36;
  int depth = 3;
  std::vector<int> state_embedding;  // empty = raw features
  int k_nn = 10;
  double beta = 4.0;
  double gamma = 0.99;
  NormalizationMode normalization = NormalizationMode::MaxMin;
  Centering centering = Centering::Median;
  bool clip = true;  // PG only; PG-V never clips
  int iterations = 30;
  int max_len_train = 50;
  int max_len_test = 50;
  int test_episodes_per_latent = 1;
  double learning_rate = 1e-3;
  double init_stddev = kInitStddev;
  double beta_offset = 1.0;
  // Generalized value networks (PG-V).
  int qv_epochs = 1;
  int qv_batch = 64;
  int qv_width = 24;
  int qv_depth = 3;
  // Monitoring.
  ReturnVector reference;
  double hv_scale = 1.0;  // reported HV = HV / hv_scale
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Stop with status Collapsed once test HV falls below this fraction of
  /// its running maximum (0 disables).
  double collapse_fraction = 0.0;
};

void validate(const TrainConfig& config, const EnvDescriptor& env);

struct HistoryRow {
  int iteration = 0;
  double test_hv = 0.0;
  double best_hv = 0.0;
  double mean_length = 0.0;
  int max_length = 0;
  double loss = 0.0;
  double mean_abs_score = 0.0;
  double value_loss = 0.0;  // PG-V: mean squared error of Q and V, summed
  double seconds = 0.0;
};

void write_history_csv(std::ostream& os, const std::vector<HistoryRow>& rows);

enum class TrainStatus { Completed, Diverged, Collapsed };
std::string to_string(TrainStatus s);

struct TrainResult {
  LatentConditionedPolicy best_policy;   // highest per-iteration test HV
  LatentConditionedPolicy final_policy;  // last finite parameters
  std::vector<HistoryRow> history;       // row 0 evaluates the initial policy
  TrainStatus status = TrainStatus::Completed;
  std::string message;
  double best_hv = 0.0;
  int best_iteration = 0;
};

/// Called after every history row; return false to stop early.
using IterationCallback = std::function<bool(const HistoryRow&)>;

TrainResult train_lcmopg(const TrainConfig& config, const EnvFactory& factory,
                         const IterationCallback& callback = {});
TrainResult train_lcmopg_v(const TrainConfig& config, const EnvFactory& factory,
                           const IterationCallback& callback = {});
/// Dispatches on config.variant.
TrainResult train(const TrainConfig& config, const EnvFactory& factory,
                  const IterationCallback& callback = {});

// ---- Generalized value networks ---------------------------------------------

struct BufferEntry {
  int iteration = 0;
  int trajectory = 0;
  int step = 0;
  Vector q_input;  // features | action encoding
  Vector v_input;  // features
  double score = 0.0;
};

/// Transitions of the current iteration, each tagged with its trajectory's
/// final score.
class RolloutBuffer {
 public:
  void clear() { entries_.clear(); }
  void add(const Trajectory& traj, int iteration, int trajectory, double score,
           const std::function<Vector(const Transition&)>& action_encoding);
  const std::vector<BufferEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Shuffled partition of all entries into minibatches of at most batch_size.
  std::vector<std::vector<std::size_t>> minibatches(std::size_t batch_size, Rng& rng) const;

 private:
  std::vector<BufferEntry> entries_;
};

/// Q(s, a) and V(s); neither sees the latent.
class GeneralizedValueNets {
 public:
  GeneralizedValueNets() = default;
  GeneralizedValueNets(const PolicyConfig& policy, int width, int depth, Rng& rng,
                       double learning_rate = 1e-3, double init_stddev = kInitStddev);

  /// One-hot for categorical heads, the environment-box action for Beta heads.
  Vector encode_action(const Transition& tr) const;
  Vector q_input(const Transition& tr) const;

  /// Passes over the buffer in minibatches; returns mean squared errors
  /// (Q, V) of the last epoch.
  std::pair<double, double> fit(const RolloutBuffer& buffer, int epochs, std::size_t batch_size,
                                Rng& rng);

  /// Q(s, a) - V(s) for every transition of `traj`.
  std::vector<double> corrected_scores(const Trajectory& traj) const;

  const Mlp& q() const { return q_; }
  const Mlp& v() const { return v_; }

 private:
  PolicyConfig policy_;
  Mlp q_, v_;
  Adam q_opt_, v_opt_;
};

// ---- Evaluation --------------------------------------------------------------

struct EvalResult {
  std::vector<ReturnVector> returns;  // per latent, averaged over episodes
  std::vector<Vector> latents;
  ParetoArchive front;                // trajectory_id = latent index
  double hv = 0.0;                    // HV(front, ref) / hv_scale
};

struct EvalConfig {
  int n_latents = 400;
  int episodes_per_latent = 1;
  double gamma = 0.99;
  int max_steps = 50;
  ReturnVector reference;
  double hv_scale = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t threads = 1;
};

EvalResult evaluate(const LatentConditionedPolicy& policy, const EnvFactory& factory,
                    const EvalConfig& config);

/// Nondominated rows: return_0..return_{m-1}, latent_0..latent_{d-1}.
void write_pf_csv(std::ostream& os, const EvalResult& result);

}  // namespace lcmopg
