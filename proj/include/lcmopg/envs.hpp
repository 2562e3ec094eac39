#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lcmopg/common.hpp"
#include "lcmopg/objective_space.hpp"
#include "lcmopg/rng.hpp"

namespace lcmopg {

/// Static description of an environment's interface.
struct EnvDescriptor {
  std::string name;
  int num_objectives = 2;
  int state_dim = 0;             // length of the raw state and of features()
  bool discrete = true;
  int num_actions = 0;           // discrete action count
  Vector action_lower, action_upper;  // box bounds, continuous only
  int max_episode_length = 0;    // intrinsic cap (0 = none)
  std::vector<int> suggested_embedding;  // per-feature cosine widths (0 = raw)
};

/// Either a discrete index or a point in the action box.
struct Action {
  int index = -1;
  Vector values;

  static Action discrete(int i) { return {i, {}}; }
  static Action box(Vector v) { return {-1, std::move(v)}; }
};

struct StepResult {
  Vector state;
  ReturnVector reward;
  bool done = false;
};

/// A multi-objective MDP instance. Instances are single-threaded; create one
/// per concurrent rollout.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvDescriptor& descriptor() const = 0;
  /// Samples an initial state and returns it.
  virtual Vector reset(Rng& rng) = 0;
  virtual StepResult step(const Action& action, Rng& rng) = 0;
  /// Policy-facing view of a state, shifted/scaled per environment.
  virtual Vector features(const Vector& state) const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

// ---- Deep Sea Treasure -----------------------------------------------------

enum class DstCell { Sea, Cliff, Treasure };

struct DstConfig {
  int rows = 11;
  int cols = 11;
  int start_row = 0;
  int start_col = 0;
  /// Per-cell treasure index (0-based) or -1; cliffs marked separately.
  std::vector<int> treasure_index;
  std::vector<DstCell> cells;
  std::vector<double> treasure_values;  // one per treasure index

  DstCell cell(int r, int c) const { return cells[r * cols + c]; }
  int treasure_at(int r, int c) const { return treasure_index[r * cols + c]; }
  int num_treasures() const { return static_cast<int>(treasure_values.size()); }
};

/// Loads the ASCII map and selects a treasure preset ("original" or "convex").
DstConfig load_dst_config(const std::filesystem::path& map_file, const std::string& preset);
/// The in-repo map at data/dst_map.txt.
DstConfig default_dst_config(const std::string& preset);

/// Actions: 0 up, 1 down, 2 left, 3 right. State: (row, col).
class DeepSeaTreasure final : public Environment {
 public:
  explicit DeepSeaTreasure(DstConfig config);
  const EnvDescriptor& descriptor() const override { return descriptor_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Action& action, Rng& rng) override;
  Vector features(const Vector& state) const override;
  std::unique_ptr<Environment> clone() const override;
  const DstConfig& config() const { return config_; }

 private:
  DstConfig config_;
  EnvDescriptor descriptor_;
  int row_ = 0, col_ = 0;
  bool done_ = false;
};

/// Shortest-path return for every treasure: time component -sum_{t<L} gamma^t,
/// treasure component T * gamma^(L-1); dominated entries removed.
ParetoArchive dst_exact_pf(const DstConfig& config, double gamma);

// ---- Fruit Tree Navigation -------------------------------------------------

struct FtnConfig {
  int depth = 5;
  std::vector<ReturnVector> leaf_rewards;  // 2^depth rows, 6 objectives
};

inline constexpr int kFtnObjectives = 6;

/// Reads a CSV of 2^d rows x 6 columns.
std::vector<ReturnVector> load_ftn_leaves(const std::filesystem::path& csv, int depth);
/// data/ftn_d<depth>.csv when present; otherwise nullopt-like empty vector.
std::vector<ReturnVector> reference_ftn_leaves(int depth);
/// 2^d distinct points on the positive orthant of the 6-sphere of radius
/// `radius`; equal norms make them mutually nondominated.
std::vector<ReturnVector> ftn_generate_leaves(int depth, Rng& rng, double radius = 10.0);

/// Actions: 0 left (i+1, 2j), 1 right (i+1, 2j+1). State: (i, j).
class FruitTreeNavigation final : public Environment {
 public:
  explicit FruitTreeNavigation(FtnConfig config);
  const EnvDescriptor& descriptor() const override { return descriptor_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Action& action, Rng& rng) override;
  Vector features(const Vector& state) const override;
  std::unique_ptr<Environment> clone() const override;
  const FtnConfig& config() const { return config_; }

 private:
  FtnConfig config_;
  EnvDescriptor descriptor_;
  int level_ = 0, pos_ = 0;
};

// ---- Linear Quadratic Gaussian control -------------------------------------

struct LqgConfig {
  int dim = 2;
  double xi = 0.1;
  double sigma = 0.0;
  double initial_value = 10.0;
  int horizon = 30;
  double action_bound = 10.0;  // box [-b, b] per dimension
};

/// Diagonal Q_i: xi everywhere except (Q_i)_ii = 1 - xi.
Matrix lqg_state_cost(int dim, double xi, int objective);
/// Diagonal R_i: 1 - xi everywhere except (R_i)_ii = xi.
Matrix lqg_action_cost(int dim, double xi, int objective);

/// s' = s + a + sigma * eps, r_i = -s'Q_i s - a'R_i a (pre-transition s).
class LinearQuadraticGaussian final : public Environment {
 public:
  explicit LinearQuadraticGaussian(LqgConfig config);
  const EnvDescriptor& descriptor() const override { return descriptor_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Action& action, Rng& rng) override;
  Vector features(const Vector& state) const override { return state; }
  std::unique_ptr<Environment> clone() const override;
  const LqgConfig& config() const { return config_; }

 private:
  LqgConfig config_;
  EnvDescriptor descriptor_;
  std::vector<Matrix> q_, r_;
  Vector state_;
  int t_ = 0;
};

// ---- Minecart --------------------------------------------------------------

struct MinecartMine {
  double x = 0.0, y = 0.0;
  double ore1 = 0.0, ore2 = 0.0;  // yield per mining frame
};

struct MinecartConfig {
  double capacity = 1.5;
  int frame_skip = 4;
  double rotation_deg = 10.0;     // per frame
  double acceleration = 0.0075;   // per frame
  double deceleration = 1.0;      // per frame (brake)
  double max_speed = 1.0;
  double eps_speed = 0.001;
  double fuel_idle = -0.005;      // per frame
  double fuel_accelerate = -0.025;
  double fuel_mine = -0.05;
  double mine_radius = 0.14;
  double home_radius = 0.15;
  double initial_angle_deg = 45.0;
  int full_capacity_points = 17;  // expected count, checked against the yields
  std::vector<MinecartMine> mines;
};

MinecartConfig load_minecart_config(const std::filesystem::path& file);
void write_minecart_config(std::ostream& os, const MinecartConfig& config);
/// data/minecart.cfg
MinecartConfig default_minecart_config();

/// Distinct (ore1, ore2) loads of a full cart reachable by mining sequences.
std::vector<ReturnVector> minecart_full_capacity_loads(const MinecartConfig& config);

/// Actions: 0 mine, 1 turn left, 2 turn right, 3 accelerate, 4 brake, 5 idle.
/// State: (x, y, speed, angle_deg, ore1, ore2). Reward: (ore1, ore2, fuel).
class Minecart final : public Environment {
 public:
  enum ActionId { kMine = 0, kLeft, kRight, kAccelerate, kBrake, kIdle };

  explicit Minecart(MinecartConfig config);
  const EnvDescriptor& descriptor() const override { return descriptor_; }
  Vector reset(Rng& rng) override;
  StepResult step(const Action& action, Rng& rng) override;
  Vector features(const Vector& state) const override;
  std::unique_ptr<Environment> clone() const override;
  const MinecartConfig& config() const { return config_; }

 private:
  Vector state() const;
  bool mine_once();
  void move_cart();

  MinecartConfig config_;
  EnvDescriptor descriptor_;
  double x_ = 0.0, y_ = 0.0, speed_ = 0.0, angle_ = 45.0;
  double ore1_ = 0.0, ore2_ = 0.0;
  bool departed_ = false, ended_ = false;
};

// ---- Registry --------------------------------------------------------------

/// Environment ids: dst-convex, dst-original, ftn5, ftn6, ftn7 (reference
/// leaves, falling back to generated ones), ftn<d>-generated, lqg2d, lqg3d,
/// lqg2d-noisy, lqg3d-noisy, minecart.
EnvFactory make_env_factory(const std::string& env_id, std::uint64_t seed = 0);
std::vector<std::string> known_env_ids();

std::filesystem::path data_dir();

}  // namespace lcmopg
