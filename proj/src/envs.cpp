#include "lcmopg/envs.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace lcmopg {

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("LCMOPG_DATA")) return env;
  return LCMOPG_DATA_DIR;
}

// ---- Deep Sea Treasure -----------------------------------------------------

DstConfig load_dst_config(const std::filesystem::path& map_file, const std::string& preset) {
  std::ifstream in(map_file);
  if (!in) throw std::runtime_error("cannot open DST map: " + map_file.string());
  DstConfig cfg;
  std::map<std::string, std::vector<double>> presets;
  std::vector<std::vector<std::string>> grid;
  bool in_grid = false, header = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || (line[0] == '#' && !in_grid)) continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (in_grid) {
      grid.push_back(tok);
      continue;
    }
    if (tok[0] == "dst-map") {
      if (tok.size() != 2 || tok[1] != "1") throw std::runtime_error("DST map: unsupported version");
      header = true;
    } else if (tok[0] == "size" && tok.size() == 3) {
      cfg.rows = std::stoi(tok[1]);
      cfg.cols = std::stoi(tok[2]);
    } else if (tok[0] == "preset" && tok.size() >= 3) {
      auto& vals = presets[tok[1]];
      for (std::size_t i = 2; i < tok.size(); ++i) vals.push_back(std::stod(tok[i]));
    } else if (tok[0] == "grid") {
      in_grid = true;
    } else {
      throw std::runtime_error("DST map: unrecognised line '" + line + "'");
    }
  }
  if (!header) throw std::runtime_error("DST map: missing 'dst-map' header");
  if (static_cast<int>(grid.size()) != cfg.rows)
    throw std::runtime_error("DST map: grid row count does not match size");
  auto it = presets.find(preset);
  if (it == presets.end()) throw std::runtime_error("DST map: unknown preset '" + preset + "'");
  cfg.treasure_values = it->second;

  cfg.cells.assign(cfg.rows * cfg.cols, DstCell::Sea);
  cfg.treasure_index.assign(cfg.rows * cfg.cols, -1);
  std::set<int> seen;
  for (int r = 0; r < cfg.rows; ++r) {
    if (static_cast<int>(grid[r].size()) != cfg.cols)
      throw std::runtime_error("DST map: row " + std::to_string(r) + " has wrong width");
    for (int c = 0; c < cfg.cols; ++c) {
      const std::string& t = grid[r][c];
      const int idx = r * cfg.cols + c;
      if (t == ".") continue;
      if (t == "S") {
        cfg.start_row = r;
        cfg.start_col = c;
      } else if (t == "#") {
        cfg.cells[idx] = DstCell::Cliff;
      } else if (t.size() >= 2 && t[0] == 'T') {
        const int n = std::stoi(t.substr(1)) - 1;
        if (n < 0 || n >= cfg.num_treasures() || !seen.insert(n).second)
          throw std::runtime_error("DST map: bad treasure token " + t);
        cfg.cells[idx] = DstCell::Treasure;
        cfg.treasure_index[idx] = n;
      } else {
        throw std::runtime_error("DST map: bad cell token " + t);
      }
    }
  }
  if (static_cast<int>(seen.size()) != cfg.num_treasures())
    throw std::runtime_error("DST map: preset size does not match treasure count");
  return cfg;
}

DstConfig default_dst_config(const std::string& preset) {
  return load_dst_config(data_dir() / "dst_map.txt", preset);
}

DeepSeaTreasure::DeepSeaTreasure(DstConfig config) : config_(std::move(config)) {
  descriptor_.name = "dst";
  descriptor_.num_objectives = 2;
  descriptor_.state_dim = 2;
  descriptor_.discrete = true;
  descriptor_.num_actions = 4;
  descriptor_.suggested_embedding = {0, 0};
  row_ = config_.start_row;
  col_ = config_.start_col;
}

Vector DeepSeaTreasure::reset(Rng&) {
  row_ = config_.start_row;
  col_ = config_.start_col;
  done_ = false;
  return Vector{{static_cast<double>(row_), static_cast<double>(col_)}};
}

StepResult DeepSeaTreasure::step(const Action& action, Rng&) {
  require(action.index >= 0 && action.index < 4, "DST: invalid action index");
  require(!done_, "DST: step after episode end");
  static constexpr int kDr[4] = {-1, 1, 0, 0};
  static constexpr int kDc[4] = {0, 0, -1, 1};
  row_ = std::clamp(row_ + kDr[action.index], 0, config_.rows - 1);
  col_ = std::clamp(col_ + kDc[action.index], 0, config_.cols - 1);
  StepResult res;
  res.reward = Vector{{0.0, -1.0}};
  switch (config_.cell(row_, col_)) {
    case DstCell::Sea: break;
    case DstCell::Cliff: res.done = true; break;
    case DstCell::Treasure:
      res.reward[0] = config_.treasure_values[config_.treasure_at(row_, col_)];
      res.done = true;
      break;
  }
  done_ = res.done;
  res.state = Vector{{static_cast<double>(row_), static_cast<double>(col_)}};
  return res;
}

Vector DeepSeaTreasure::features(const Vector& state) const {
  return Vector{{state[0] / (config_.rows - 1), state[1] / (config_.cols - 1)}};
}

std::unique_ptr<Environment> DeepSeaTreasure::clone() const {
  return std::make_unique<DeepSeaTreasure>(*this);
}

ParetoArchive dst_exact_pf(const DstConfig& config, double gamma) {
  require(gamma > 0.0 && gamma <= 1.0, "dst_exact_pf: gamma must lie in (0, 1]");
  std::vector<ArchiveEntry> entries;
  for (int r = 0; r < config.rows; ++r) {
    for (int c = 0; c < config.cols; ++c) {
      if (config.cell(r, c) != DstCell::Treasure) continue;
      const int length = std::abs(r - config.start_row) + std::abs(c - config.start_col);
      double time = 0.0;
      for (int t = 0; t < length; ++t) time -= std::pow(gamma, t);
      const double treasure =
          config.treasure_values[config.treasure_at(r, c)] * std::pow(gamma, length - 1);
      entries.push_back({Vector{{treasure, time}}, {}, config.treasure_at(r, c)});
    }
  }
  return ParetoArchive::from_entries(std::move(entries));
}

// ---- Fruit Tree Navigation -------------------------------------------------

std::vector<ReturnVector> load_ftn_leaves(const std::filesystem::path& csv, int depth) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot open FTN leaf table: " + csv.string());
  std::vector<ReturnVector> leaves;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ReturnVector row(kFtnObjectives);
    std::string cell;
    int j = 0;
    while (std::getline(ls, cell, ',')) {
      if (j >= kFtnObjectives) throw std::runtime_error("FTN table: too many columns");
      row[j++] = std::stod(cell);
    }
    if (j != kFtnObjectives) throw std::runtime_error("FTN table: expected 6 columns");
    leaves.push_back(row);
  }
  if (leaves.size() != (std::size_t{1} << depth))
    throw std::runtime_error("FTN table: expected " + std::to_string(1 << depth) + " rows");
  return leaves;
}

std::vector<ReturnVector> reference_ftn_leaves(int depth) {
  const auto path = data_dir() / ("ftn_d" + std::to_string(depth) + ".csv");
  if (!std::filesystem::exists(path)) return {};
  return load_ftn_leaves(path, depth);
}

std::vector<ReturnVector> ftn_generate_leaves(int depth, Rng& rng, double radius) {
  require(depth >= 1 && depth <= 20, "ftn_generate_leaves: depth must be in [1, 20]");
  const std::size_t n = std::size_t{1} << depth;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ReturnVector> leaves;
  while (leaves.size() < n) {
    ReturnVector v(kFtnObjectives);
    for (int j = 0; j < kFtnObjectives; ++j) v[j] = std::abs(normal(rng));
    const double norm = v.norm();
    if (!(norm > 0.0)) continue;
    v *= radius / norm;
    bool duplicate = false;
    for (const auto& l : leaves)
      if (l == v) duplicate = true;
    if (!duplicate) leaves.push_back(v);
  }
  return leaves;
}

FruitTreeNavigation::FruitTreeNavigation(FtnConfig config) : config_(std::move(config)) {
  require(config_.depth >= 1, "FTN: depth must be >= 1");
  require(config_.leaf_rewards.size() == (std::size_t{1} << config_.depth),
          "FTN: need 2^depth leaf rewards");
  descriptor_.name = "ftn" + std::to_string(config_.depth);
  descriptor_.num_objectives = kFtnObjectives;
  descriptor_.state_dim = 2;
  descriptor_.discrete = true;
  descriptor_.num_actions = 2;
  descriptor_.max_episode_length = config_.depth;
  descriptor_.suggested_embedding = {10, 20};
}

Vector FruitTreeNavigation::reset(Rng&) {
  level_ = 0;
  pos_ = 0;
  return Vector{{0.0, 0.0}};
}

StepResult FruitTreeNavigation::step(const Action& action, Rng&) {
  require(action.index == 0 || action.index == 1, "FTN: invalid action index");
  require(level_ < config_.depth, "FTN: step after episode end");
  ++level_;
  pos_ = 2 * pos_ + action.index;
  StepResult res;
  res.state = Vector{{static_cast<double>(level_), static_cast<double>(pos_)}};
  res.done = level_ == config_.depth;
  res.reward = res.done ? config_.leaf_rewards[pos_] : ReturnVector::Zero(kFtnObjectives);
  return res;
}

Vector FruitTreeNavigation::features(const Vector& state) const {
  return Vector{{state[0] / config_.depth, state[1] / std::ldexp(1.0, static_cast<int>(state[0]))}};
}

std::unique_ptr<Environment> FruitTreeNavigation::clone() const {
  return std::make_unique<FruitTreeNavigation>(*this);
}

// ---- LQG ---------------------------------------------------------------------

Matrix lqg_state_cost(int dim, double xi, int objective) {
  Matrix q = Matrix::Identity(dim, dim) * xi;
  q(objective, objective) = 1.0 - xi;
  return q;
}

Matrix lqg_action_cost(int dim, double xi, int objective) {
  Matrix r = Matrix::Identity(dim, dim) * (1.0 - xi);
  r(objective, objective) = xi;
  return r;
}

LinearQuadraticGaussian::LinearQuadraticGaussian(LqgConfig config) : config_(config) {
  require(config_.dim >= 1, "LQG: dimension must be >= 1");
  require(config_.sigma >= 0.0, "LQG: sigma must be nonnegative");
  require(config_.horizon >= 1, "LQG: horizon must be >= 1");
  descriptor_.name = "lqg" + std::to_string(config_.dim) + "d";
  descriptor_.num_objectives = config_.dim;
  descriptor_.state_dim = config_.dim;
  descriptor_.discrete = false;
  descriptor_.action_lower = Vector::Constant(config_.dim, -config_.action_bound);
  descriptor_.action_upper = Vector::Constant(config_.dim, config_.action_bound);
  descriptor_.max_episode_length = config_.horizon;
  descriptor_.suggested_embedding.assign(config_.dim, 0);
  for (int i = 0; i < config_.dim; ++i) {
    q_.push_back(lqg_state_cost(config_.dim, config_.xi, i));
    r_.push_back(lqg_action_cost(config_.dim, config_.xi, i));
  }
  state_ = Vector::Constant(config_.dim, config_.initial_value);
}

Vector LinearQuadraticGaussian::reset(Rng&) {
  t_ = 0;
  state_ = Vector::Constant(config_.dim, config_.initial_value);
  return state_;
}

StepResult LinearQuadraticGaussian::step(const Action& action, Rng& rng) {
  const Vector& a = action.values;
  require(a.size() == config_.dim, "LQG: action dimension mismatch");
  require(a.allFinite(), "LQG: non-finite action");
  require((a.array().abs() <= config_.action_bound).all(), "LQG: action outside the box");
  require(t_ < config_.horizon, "LQG: step after horizon");
  StepResult res;
  res.reward = ReturnVector(config_.dim);
  for (int i = 0; i < config_.dim; ++i)
    res.reward[i] = -state_.dot(q_[i] * state_) - a.dot(r_[i] * a);
  Vector next = state_ + a;
  if (config_.sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < config_.dim; ++i) next[i] += config_.sigma * normal(rng);
  }
  state_ = next;
  ++t_;
  res.state = state_;
  res.done = t_ >= config_.horizon;
  return res;
}

std::unique_ptr<Environment> LinearQuadraticGaussian::clone() const {
  return std::make_unique<LinearQuadraticGaussian>(*this);
}

// ---- Registry ----------------------------------------------------------------

std::vector<std::string> known_env_ids() {
  return {"dst-convex", "dst-original", "ftn5", "ftn6", "ftn7", "ftn5-generated",
          "ftn6-generated", "ftn7-generated", "lqg2d", "lqg3d", "lqg2d-noisy",
          "lqg3d-noisy", "minecart"};
}

EnvFactory make_env_factory(const std::string& env_id, std::uint64_t seed) {
  if (env_id == "dst-convex" || env_id == "dst-original") {
    auto proto = std::make_shared<DeepSeaTreasure>(
        default_dst_config(env_id == "dst-convex" ? "convex" : "original"));
    return [proto] { return proto->clone(); };
  }
  if (env_id.rfind("ftn", 0) == 0 && env_id.size() >= 4) {
    const int depth = env_id[3] - '0';
    require(depth >= 5 && depth <= 7, "unknown FTN depth in env id " + env_id);
    const bool generated = env_id.find("-generated") != std::string::npos;
    FtnConfig cfg{depth, generated ? std::vector<ReturnVector>{} : reference_ftn_leaves(depth)};
    if (cfg.leaf_rewards.empty()) {
      Rng rng = derive_stream(seed, 0x46544e, depth);
      cfg.leaf_rewards = ftn_generate_leaves(depth, rng);
    }
    auto proto = std::make_shared<FruitTreeNavigation>(cfg);
    return [proto] { return proto->clone(); };
  }
  if (env_id.rfind("lqg", 0) == 0) {
    LqgConfig cfg;
    if (env_id.rfind("lqg2d", 0) == 0) cfg.dim = 2;
    else if (env_id.rfind("lqg3d", 0) == 0) cfg.dim = 3;
    else throw ContractViolation("unknown environment id: " + env_id);
    if (env_id.ends_with("-noisy")) cfg.sigma = 1.0;
    return [cfg] { return std::make_unique<LinearQuadraticGaussian>(cfg); };
  }
  if (env_id == "minecart") {
    auto proto = std::make_shared<Minecart>(default_minecart_config());
    return [proto] { return proto->clone(); };
  }
  throw ContractViolation("unknown environment id: " + env_id);
}

}  // namespace lcmopg
